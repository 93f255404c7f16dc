#pragma once

#include "nlap/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace nlap {

struct SsimConfig {
  int window_size = 11;
  double window_sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;

  double c1() const { return (k1 * dynamic_range) * (k1 * dynamic_range); }
  double c2() const { return (k2 * dynamic_range) * (k2 * dynamic_range); }

  void validate(int patch_side) const {
    if (window_size < 1 || window_size % 2 == 0) throw std::invalid_argument("SSIM window size must be odd");
    if (window_size > patch_side) throw std::invalid_argument("SSIM window larger than patch");
    if (!(k1 > 0) || !(k2 > 0)) throw std::invalid_argument("SSIM constants must be positive");
    if (!(window_sigma > 0)) throw std::invalid_argument("SSIM window sigma must be positive");
  }
};

/// How the adversarial losses reduce over patch positions.
enum class PatchReduction { sum, mean };

namespace detail {

template <typename Scalar>
Vector<Scalar> gaussian_window(const SsimConfig& cfg) {
  const int w = cfg.window_size;
  const int r = w / 2;
  Vector<double> g(w);
  for (int i = 0; i < w; ++i) {
    const double d = i - r;
    g[i] = std::exp(-d * d / (2.0 * cfg.window_sigma * cfg.window_sigma));
  }
  g /= g.sum();
  return g.cast<Scalar>();
}

/// Separable valid-mode correlation with the outer product g g^T.
template <typename Scalar>
Matrix<Scalar> filter_valid(const Matrix<Scalar>& x, const Vector<Scalar>& g) {
  const Eigen::Index w = g.size();
  const Eigen::Index oh = x.rows() - w + 1;
  const Eigen::Index ow = x.cols() - w + 1;
  Matrix<Scalar> tmp = Matrix<Scalar>::Zero(x.rows(), ow);
  for (Eigen::Index j = 0; j < w; ++j) tmp += g[j] * x.middleCols(j, ow);
  Matrix<Scalar> out = Matrix<Scalar>::Zero(oh, ow);
  for (Eigen::Index i = 0; i < w; ++i) out += g[i] * tmp.middleRows(i, oh);
  return out;
}

/// Adjoint of filter_valid.
template <typename Scalar>
Matrix<Scalar> filter_valid_adjoint(const Matrix<Scalar>& m, const Vector<Scalar>& g, Eigen::Index rows,
                                    Eigen::Index cols) {
  const Eigen::Index w = g.size();
  Matrix<Scalar> tmp = Matrix<Scalar>::Zero(rows, m.cols());
  for (Eigen::Index i = 0; i < w; ++i) tmp.middleRows(i, m.rows()) += g[i] * m;
  Matrix<Scalar> out = Matrix<Scalar>::Zero(rows, cols);
  for (Eigen::Index j = 0; j < w; ++j) out.middleCols(j, m.cols()) += g[j] * tmp;
  return out;
}

}  // namespace detail

/// Mean SSIM over all valid Gaussian-window positions. When `grad_b` is
/// given it receives d ssim / d b.
template <typename Scalar>
Scalar ssim(const Matrix<Scalar>& a, const Matrix<Scalar>& b, const SsimConfig& cfg = {},
            Matrix<Scalar>* grad_b = nullptr) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument("ssim: shape mismatch");
  cfg.validate(static_cast<int>(std::min(a.rows(), a.cols())));
  const auto g = detail::gaussian_window<Scalar>(cfg);
  const auto c1 = static_cast<Scalar>(cfg.c1());
  const auto c2 = static_cast<Scalar>(cfg.c2());

  const Matrix<Scalar> mu_a = detail::filter_valid<Scalar>(a, g);
  const Matrix<Scalar> mu_b = detail::filter_valid<Scalar>(b, g);
  const Matrix<Scalar> e_aa = detail::filter_valid<Scalar>(a.cwiseProduct(a), g);
  const Matrix<Scalar> e_bb = detail::filter_valid<Scalar>(b.cwiseProduct(b), g);
  const Matrix<Scalar> e_ab = detail::filter_valid<Scalar>(a.cwiseProduct(b), g);

  const Eigen::Index count = mu_a.size();
  Matrix<Scalar> g_mu, g_ab, g_bb;
  if (grad_b) {
    g_mu.resize(mu_a.rows(), mu_a.cols());
    g_ab.resize(mu_a.rows(), mu_a.cols());
    g_bb.resize(mu_a.rows(), mu_a.cols());
  }
  Scalar total = 0;
  for (Eigen::Index i = 0; i < count; ++i) {
    const Scalar ma = mu_a.data()[i];
    const Scalar mb = mu_b.data()[i];
    // Each term is written so that swapping a and b gives the same rounding.
    const Scalar cov = e_ab.data()[i] - ma * mb;
    const Scalar var_a = e_aa.data()[i] - ma * ma;
    const Scalar var_b = e_bb.data()[i] - mb * mb;
    const Scalar num_l = Scalar(2) * (ma * mb) + c1;
    const Scalar num_s = Scalar(2) * cov + c2;
    const Scalar den_l = ma * ma + mb * mb + c1;
    const Scalar den_s = var_a + var_b + c2;
    const Scalar s = (num_l * num_s) / (den_l * den_s);
    total += s;
    if (grad_b) {
      g_mu.data()[i] = s * (Scalar(2) * ma / num_l - Scalar(2) * ma / num_s - Scalar(2) * mb / den_l +
                            Scalar(2) * mb / den_s);
      g_ab.data()[i] = Scalar(2) * s / num_s;
      g_bb.data()[i] = -s / den_s;
    }
  }
  const Scalar inv = Scalar(1) / static_cast<Scalar>(count);
  if (grad_b) {
    const auto r = a.rows(), c = a.cols();
    *grad_b = detail::filter_valid_adjoint<Scalar>(g_mu, g, r, c);
    grad_b->noalias() += a.cwiseProduct(detail::filter_valid_adjoint<Scalar>(g_ab, g, r, c));
    grad_b->noalias() += (Scalar(2) * b).cwiseProduct(detail::filter_valid_adjoint<Scalar>(g_bb, g, r, c));
    *grad_b *= inv;
  }
  return total / static_cast<Scalar>(count);
}

/// Reconstruction loss 0.5 * (1 - SSIM(real_next, pred_next)); the optional
/// gradient is with respect to the prediction.
template <typename Scalar>
Scalar loss_g(const Matrix<Scalar>& real_next, const Matrix<Scalar>& pred_next, const SsimConfig& cfg = {},
              Matrix<Scalar>* grad_pred = nullptr) {
  const Scalar s = ssim<Scalar>(real_next, pred_next, cfg, grad_pred);
  if (grad_pred) *grad_pred *= Scalar(-0.5);
  return Scalar(0.5) * (Scalar(1) - s);
}

namespace detail {

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (!m.allFinite()) throw std::domain_error(std::string(what) + ": non-finite patch map");
}

template <typename Scalar>
Scalar reduction_scale(PatchReduction r, Eigen::Index n) {
  return r == PatchReduction::mean ? Scalar(1) / static_cast<Scalar>(n) : Scalar(1);
}

}  // namespace detail

/// Generator-side least-squares adversarial loss: sum of (1 - D(fake))^2.
template <typename Scalar>
Scalar loss_adv_g(const Matrix<Scalar>& d_fake, PatchReduction reduction = PatchReduction::sum,
                  Matrix<Scalar>* grad_fake = nullptr) {
  detail::require_finite(d_fake, "loss_adv_g");
  const Scalar k = detail::reduction_scale<Scalar>(reduction, d_fake.size());
  const auto miss = (Scalar(1) - d_fake.array()).matrix();
  if (grad_fake) *grad_fake = Scalar(-2) * k * miss;
  return k * miss.squaredNorm();
}

/// Discriminator-side least-squares loss: 0.5 * [sum (1 - D(real))^2 + sum D(fake)^2].
template <typename Scalar>
Scalar loss_adv_d(const Matrix<Scalar>& d_real, const Matrix<Scalar>& d_fake,
                  PatchReduction reduction = PatchReduction::sum, Matrix<Scalar>* grad_real = nullptr,
                  Matrix<Scalar>* grad_fake = nullptr) {
  if (d_real.rows() != d_fake.rows() || d_real.cols() != d_fake.cols())
    throw std::invalid_argument("loss_adv_d: shape mismatch");
  detail::require_finite(d_real, "loss_adv_d");
  detail::require_finite(d_fake, "loss_adv_d");
  const Scalar k = detail::reduction_scale<Scalar>(reduction, d_real.size());
  const auto miss = (Scalar(1) - d_real.array()).matrix();
  if (grad_real) *grad_real = -k * miss;
  if (grad_fake) *grad_fake = k * d_fake;
  return Scalar(0.5) * k * (miss.squaredNorm() + d_fake.squaredNorm());
}

}  // namespace nlap
