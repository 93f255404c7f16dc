#include "nlap/metrics.hpp"

#include "doctest.h"
#include "support.hpp"

using namespace nlap;

namespace {

/// Straight double loop over the map.
double brute_adv_g(const Matrix<double>& f) {
  double s = 0;
  for (int y = 0; y < f.rows(); ++y)
    for (int x = 0; x < f.cols(); ++x) s += (1 - f(y, x)) * (1 - f(y, x));
  return s;
}

double brute_adv_d(const Matrix<double>& r, const Matrix<double>& f) {
  double a = 0, b = 0;
  for (int y = 0; y < r.rows(); ++y)
    for (int x = 0; x < r.cols(); ++x) {
      a += (1 - r(y, x)) * (1 - r(y, x));
      b += f(y, x) * f(y, x);
    }
  return 0.5 * (a + b);
}

/// SSIM written window by window from its definition.
double brute_ssim(const Matrix<double>& a, const Matrix<double>& b, const SsimConfig& cfg) {
  const int w = cfg.window_size, r = w / 2;
  std::vector<double> g(w);
  double z = 0;
  for (int i = 0; i < w; ++i) z += g[i] = std::exp(-double((i - r) * (i - r)) / (2 * cfg.window_sigma * cfg.window_sigma));
  for (auto& v : g) v /= z;
  double total = 0;
  int count = 0;
  for (int oy = 0; oy + w <= a.rows(); ++oy)
    for (int ox = 0; ox + w <= a.cols(); ++ox) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (int i = 0; i < w; ++i)
        for (int j = 0; j < w; ++j) {
          const double wt = g[i] * g[j], x = a(oy + i, ox + j), y = b(oy + i, ox + j);
          ma += wt * x;
          mb += wt * y;
          saa += wt * x * x;
          sbb += wt * y * y;
          sab += wt * x * y;
        }
      const double va = saa - ma * ma, vb = sbb - mb * mb, cab = sab - ma * mb;
      total += (2 * ma * mb + cfg.c1()) * (2 * cab + cfg.c2()) /
               ((ma * ma + mb * mb + cfg.c1()) * (va + vb + cfg.c2()));
      ++count;
    }
  return total / count;
}

}  // namespace

TEST_CASE("adversarial losses match double-loop sums") {
  Rng rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const int h = 1 + static_cast<int>(rng.below(9)), w = 1 + static_cast<int>(rng.below(9));
    const auto r = test::random_matrix(rng, h, w, -2, 3);
    const auto f = test::random_matrix(rng, h, w, -2, 3);
    const double g_ref = brute_adv_g(f), d_ref = brute_adv_d(r, f);
    CHECK(std::abs(loss_adv_g(f) - g_ref) <= 1e-10 * std::max(1.0, g_ref));
    CHECK(std::abs(loss_adv_d(r, f) - d_ref) <= 1e-10 * std::max(1.0, d_ref));
    CHECK(std::abs(loss_adv_g(f, PatchReduction::mean) - g_ref / (h * w)) <= 1e-10 * std::max(1.0, g_ref));
  }
}

TEST_CASE("adversarial loss corner values") {
  const Matrix<double> ones = Matrix<double>::Ones(8, 8), zeros = Matrix<double>::Zero(8, 8);
  CHECK(loss_adv_g(ones) == 0.0);
  CHECK(loss_adv_g(zeros) == 64.0);
  CHECK(loss_adv_d(ones, zeros) == 0.0);
  CHECK(loss_adv_d(zeros, ones) == 64.0);
  CHECK_THROWS_AS(loss_adv_d(ones, Matrix<double>(Matrix<double>::Zero(4, 4))), std::invalid_argument);
  Matrix<double> bad = zeros;
  bad(2, 3) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(loss_adv_g(bad), std::domain_error);
}

TEST_CASE("adversarial loss gradients are the derivative of the sums") {
  Rng rng(5);
  const auto r = test::random_matrix(rng, 4, 4, -1, 2), f = test::random_matrix(rng, 4, 4, -1, 2);
  Matrix<double> gg, gr, gf;
  loss_adv_g(f, PatchReduction::sum, &gg);
  loss_adv_d(r, f, PatchReduction::sum, &gr, &gf);
  const double h = 1e-6;
  for (int i = 0; i < 16; ++i) {
    Matrix<double> fp = f, fm = f, rp = r, rm = r;
    fp.data()[i] += h;
    fm.data()[i] -= h;
    rp.data()[i] += h;
    rm.data()[i] -= h;
    CHECK(gg.data()[i] == doctest::Approx((loss_adv_g(fp) - loss_adv_g(fm)) / (2 * h)).epsilon(1e-7));
    CHECK(gf.data()[i] == doctest::Approx((loss_adv_d(r, fp) - loss_adv_d(r, fm)) / (2 * h)).epsilon(1e-7));
    CHECK(gr.data()[i] == doctest::Approx((loss_adv_d(rp, f) - loss_adv_d(rm, f)) / (2 * h)).epsilon(1e-7));
  }
}

TEST_CASE("ssim identities") {
  Rng rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto a = test::random_matrix(rng, 16, 16), b = test::random_matrix(rng, 16, 16);
    const double s = ssim(a, b);
    CHECK(s == doctest::Approx(ssim(b, a)).epsilon(1e-14));
    CHECK(std::abs(s) <= 1.0);
    if (trial < 50) CHECK(ssim(a, a) == 1.0);
  }
}

TEST_CASE("ssim of constant 0 against constant 1") {
  const SsimConfig cfg;
  const double c1 = cfg.c1();
  const double expected = c1 / (1 + c1);
  CHECK(expected == doctest::Approx(9.999e-5).epsilon(1e-4));
  const double s = ssim<double>(Matrix<double>::Zero(32, 32), Matrix<double>::Ones(32, 32), cfg);
  CHECK(std::abs(s - expected) < 1e-8);
}

TEST_CASE("ssim agrees with a window-by-window evaluation") {
  Rng rng(9);
  const SsimConfig cfg;
  for (int trial = 0; trial < 5; ++trial) {
    const auto a = test::random_matrix(rng, 20, 17), b = test::random_matrix(rng, 20, 17);
    CHECK(ssim(a, b, cfg) == doctest::Approx(brute_ssim(a, b, cfg)).epsilon(1e-12));
  }
}

TEST_CASE("loss_g is half of one minus ssim") {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = test::random_matrix(rng, 16, 16), b = test::random_matrix(rng, 16, 16);
    CHECK(loss_g(a, b) == 0.5 * (1 - ssim(a, b)));
    const double l = loss_g(a, b);
    CHECK(l >= 0.0);
    CHECK(l <= 1.0);
  }
  const auto a = test::random_matrix(rng, 16, 16);
  CHECK(loss_g(a, a) == 0.0);
  // An exact negative image of a zero-mean pattern reaches ssim close to -1.
  Matrix<double> p(16, 16), q(16, 16);
  for (int i = 0; i < 16; ++i)
    for (int j = 0; j < 16; ++j) {
      p(i, j) = (i + j) % 2 ? 1.0 : 0.0;
      q(i, j) = 1.0 - p(i, j);
    }
  CHECK(loss_g(p, q) > 0.99);
  CHECK_THROWS_AS(loss_g<double>(Matrix<double>::Zero(16, 16), Matrix<double>::Zero(16, 12)), std::invalid_argument);
}

TEST_CASE("ssim gradient matches central differences") {
  Rng rng(4);
  const auto a = test::random_matrix(rng, 16, 16), b = test::random_matrix(rng, 16, 16);
  Matrix<double> grad;
  ssim(a, b, {}, &grad);
  const double h = 1e-6;
  for (int i = 0; i < 256; i += 7) {
    Matrix<double> bp = b, bm = b;
    bp.data()[i] += h;
    bm.data()[i] -= h;
    const double numeric = (ssim(a, bp) - ssim(a, bm)) / (2 * h);
    CHECK(std::abs(grad.data()[i] - numeric) <= 1e-6 * std::max(std::abs(numeric), 1e-4));
  }
}

TEST_CASE("ssim config validation") {
  SsimConfig even;
  even.window_size = 10;
  CHECK_THROWS(ssim<double>(Matrix<double>::Zero(16, 16), Matrix<double>::Zero(16, 16), even));
  CHECK_THROWS(ssim<double>(Matrix<double>::Zero(8, 8), Matrix<double>::Zero(8, 8)));
}
