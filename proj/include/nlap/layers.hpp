#pragma once

#include "nlap/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace nlap {

inline constexpr double kLeakySlope = 0.2;

/// Unfolds k x k receptive fields of x into columns; row index is
/// (ci*k + ky)*k + kx, column index is (n*out_h + oy)*out_w + ox.
namespace detail {

/// Output columns [lo, hi) whose input column ox*stride - pad + kx lies inside [0, width).
inline std::pair<int, int> valid_range(int out, int width, int k_off, int stride, int pad) {
  int lo = 0;
  while (lo < out && lo * stride - pad + k_off < 0) ++lo;
  int hi = out;
  while (hi > lo && (hi - 1) * stride - pad + k_off >= width) --hi;
  return {lo, hi};
}

}  // namespace detail

template <typename Scalar>
void im2col(const Tensor<Scalar>& x, int k, int stride, int pad, int out_h, int out_w, Matrix<Scalar>& cols) {
  cols.resize(static_cast<Eigen::Index>(x.channels) * k * k, static_cast<Eigen::Index>(x.batch) * out_h * out_w);
  for (int ci = 0; ci < x.channels; ++ci) {
    const Scalar* src = x.data.row(ci).data();
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        Scalar* dst = cols.row((ci * k + ky) * k + kx).data();
        const auto [lo, hi] = detail::valid_range(out_w, x.width, kx, stride, pad);
        for (int n = 0; n < x.batch; ++n) {
          const Scalar* plane = src + static_cast<Eigen::Index>(n) * x.plane();
          for (int oy = 0; oy < out_h; ++oy) {
            const int iy = oy * stride - pad + ky;
            Scalar* out = dst + (static_cast<Eigen::Index>(n) * out_h + oy) * out_w;
            if (iy < 0 || iy >= x.height) {
              std::fill(out, out + out_w, Scalar(0));
              continue;
            }
            const Scalar* row = plane + static_cast<Eigen::Index>(iy) * x.width - pad + kx;
            std::fill(out, out + lo, Scalar(0));
            if (stride == 1) {
              std::copy(row + lo, row + hi, out + lo);
            } else {
              for (int ox = lo; ox < hi; ++ox) out[ox] = row[ox * stride];
            }
            std::fill(out + hi, out + out_w, Scalar(0));
          }
        }
      }
    }
  }
}

/// Adjoint of im2col: scatters columns back, accumulating into x.
template <typename Scalar>
void col2im(const Matrix<Scalar>& cols, int k, int stride, int pad, int out_h, int out_w, Tensor<Scalar>& x) {
  for (int ci = 0; ci < x.channels; ++ci) {
    Scalar* dst = x.data.row(ci).data();
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const Scalar* src = cols.row((ci * k + ky) * k + kx).data();
        const auto [lo, hi] = detail::valid_range(out_w, x.width, kx, stride, pad);
        for (int n = 0; n < x.batch; ++n) {
          Scalar* plane = dst + static_cast<Eigen::Index>(n) * x.plane();
          for (int oy = 0; oy < out_h; ++oy) {
            const int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= x.height) continue;
            const Scalar* in = src + (static_cast<Eigen::Index>(n) * out_h + oy) * out_w;
            Scalar* row = plane + static_cast<Eigen::Index>(iy) * x.width - pad + kx;
            for (int ox = lo; ox < hi; ++ox) row[ox * stride] += in[ox];
          }
        }
      }
    }
  }
}

/// Shape of a convolution. For a transposed convolution `in_channels` is the
/// channel count it consumes and `out_channels` the count it produces.
struct ConvShape {
  int in_channels = 1;
  int out_channels = 1;
  int kernel = 4;
  int stride = 2;
  int pad = 1;

  bool operator==(const ConvShape&) const = default;
};

/// Weights of a (transposed) convolution. Conv weight is out x (in*k*k);
/// transposed-conv weight is in x (out*k*k).
template <typename Scalar>
struct ConvParams {
  ConvShape shape;
  bool transposed = false;
  Matrix<Scalar> weight;
  Vector<Scalar> bias;

  static ConvParams zeros(const ConvShape& s, bool transposed) {
    ConvParams p;
    p.shape = s;
    p.transposed = transposed;
    const int kk = s.kernel * s.kernel;
    p.weight = transposed ? Matrix<Scalar>::Zero(s.in_channels, s.out_channels * kk)
                          : Matrix<Scalar>::Zero(s.out_channels, s.in_channels * kk);
    p.bias = Vector<Scalar>::Zero(s.out_channels);
    return p;
  }

  Eigen::Index parameter_count() const { return weight.size() + bias.size(); }

  template <typename Other>
  ConvParams<Other> cast() const {
    ConvParams<Other> o;
    o.shape = shape;
    o.transposed = transposed;
    o.weight = weight.template cast<Other>();
    o.bias = bias.template cast<Other>();
    return o;
  }
};

inline int conv_out_size(int in, const ConvShape& s) { return (in + 2 * s.pad - s.kernel) / s.stride + 1; }
inline int deconv_out_size(int in, const ConvShape& s) { return (in - 1) * s.stride - 2 * s.pad + s.kernel; }

/// Cached values a layer needs for its backward pass.
template <typename Scalar>
struct ConvCache {
  Matrix<Scalar> cols;  // im2col(input) for conv
  Tensor<Scalar> input;  // input for transposed conv
  int in_h = 0, in_w = 0;
};

template <typename Scalar>
Tensor<Scalar> conv_forward(const ConvParams<Scalar>& p, const Tensor<Scalar>& x, ConvCache<Scalar>* cache) {
  const auto& s = p.shape;
  if (x.channels != s.in_channels) throw std::invalid_argument("conv_forward: channel mismatch");
  if (!p.transposed) {
    const int oh = conv_out_size(x.height, s);
    const int ow = conv_out_size(x.width, s);
    Matrix<Scalar> local;
    Matrix<Scalar>& cols = cache ? cache->cols : local;
    im2col(x, s.kernel, s.stride, s.pad, oh, ow, cols);
    Tensor<Scalar> y;
    y.channels = s.out_channels;
    y.batch = x.batch;
    y.height = oh;
    y.width = ow;
    y.data.noalias() = p.weight * cols;
    y.data.colwise() += p.bias;
    if (cache) {
      cache->in_h = x.height;
      cache->in_w = x.width;
    }
    return y;
  }
  const int oh = deconv_out_size(x.height, s);
  const int ow = deconv_out_size(x.width, s);
  Matrix<Scalar> cols;
  cols.noalias() = p.weight.transpose() * x.data;
  Tensor<Scalar> y(s.out_channels, x.batch, oh, ow);
  col2im(cols, s.kernel, s.stride, s.pad, x.height, x.width, y);
  y.data.colwise() += p.bias;
  if (cache) {
    cache->input = x;
    cache->in_h = x.height;
    cache->in_w = x.width;
  }
  return y;
}

/// Accumulates parameter gradients into `grad` (when non-null) and returns
/// the gradient w.r.t. the layer input when `want_input_grad`.
template <typename Scalar>
Tensor<Scalar> conv_backward(const ConvParams<Scalar>& p, const ConvCache<Scalar>& cache, const Tensor<Scalar>& dy,
                             ConvParams<Scalar>* grad, bool want_input_grad) {
  const auto& s = p.shape;
  Tensor<Scalar> dx;
  if (!p.transposed) {
    if (grad) {
      grad->weight.noalias() += dy.data * cache.cols.transpose();
      grad->bias += dy.data.rowwise().sum();
    }
    if (want_input_grad) {
      Matrix<Scalar> dcols;
      dcols.noalias() = p.weight.transpose() * dy.data;
      dx = Tensor<Scalar>(s.in_channels, dy.batch, cache.in_h, cache.in_w);
      col2im(dcols, s.kernel, s.stride, s.pad, dy.height, dy.width, dx);
    }
    return dx;
  }
  Matrix<Scalar> dcols;
  im2col(dy, s.kernel, s.stride, s.pad, cache.in_h, cache.in_w, dcols);
  if (grad) {
    grad->weight.noalias() += cache.input.data * dcols.transpose();
    grad->bias += dy.data.rowwise().sum();
  }
  if (want_input_grad) {
    dx.channels = s.in_channels;
    dx.batch = dy.batch;
    dx.height = cache.in_h;
    dx.width = cache.in_w;
    dx.data.noalias() = p.weight * dcols;
  }
  return dx;
}

template <typename Scalar>
void leaky_relu_inplace(Tensor<Scalar>& t) {
  const auto slope = static_cast<Scalar>(kLeakySlope);
  t.data = (t.data.array() > Scalar(0)).select(t.data, slope * t.data);
}

/// dy scaled by the leaky-ReLU derivative, read off the activation output.
template <typename Scalar>
void leaky_relu_backward_inplace(const Tensor<Scalar>& out, Tensor<Scalar>& dy) {
  const auto slope = static_cast<Scalar>(kLeakySlope);
  dy.data = (out.data.array() > Scalar(0)).select(dy.data, slope * dy.data);
}

template <typename Scalar>
void sigmoid_inplace(Tensor<Scalar>& t) {
  // Kept strictly inside (0,1) so saturation never yields an exact 0 or 1.
  static constexpr Scalar lo = std::numeric_limits<Scalar>::min();
  static constexpr Scalar hi = Scalar(1) - std::numeric_limits<Scalar>::epsilon() / 2;
  t.data = t.data.unaryExpr([](Scalar v) { return std::clamp(Scalar(1) / (Scalar(1) + std::exp(-v)), lo, hi); });
}

template <typename Scalar>
void sigmoid_backward_inplace(const Tensor<Scalar>& out, Tensor<Scalar>& dy) {
  dy.data = dy.data.cwiseProduct(out.data.cwiseProduct((Scalar(1) - out.data.array()).matrix()));
}

}  // namespace nlap
