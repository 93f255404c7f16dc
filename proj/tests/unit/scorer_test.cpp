#include "nlap/scorer.hpp"

#include "doctest.h"
#include "nlap/trainer.hpp"
#include "support.hpp"

#include <algorithm>

using namespace nlap;

TEST_CASE("aggregate_frame") {
  const std::vector<double> s{0.2, 0.7, 0.4};
  CHECK(aggregate_frame(s) == 0.7);
  CHECK(aggregate_frame({}, 0.0) == 0.0);
  CHECK(aggregate_frame({}, 0.25) == 0.25);
  CHECK(aggregate_frame(std::vector<double>{0.3}) == 0.3);
  Rng rng(3);
  std::vector<double> v(9);
  for (auto& x : v) x = rng.uniform();
  const double m = aggregate_frame(v);
  for (int i = 0; i < 20; ++i) {
    rng.shuffle(v);
    CHECK(aggregate_frame(v) == m);
  }
}

TEST_CASE("region score is loss_g of the prediction") {
  ArchConfig arch;
  arch.patch_size = 16;
  arch.levels = 2;
  arch.base_channels = 4;
  const auto g = init_generator(arch);
  const auto t = test::scene_triplets(16).front();
  const auto r = region_score(g, t, arch);
  const auto pred = generator_forward(g, stack_images<float>(std::vector<Patch>{t.past}),
                                      stack_images<float>(std::vector<Patch>{t.current}), arch);
  CHECK(r.score == static_cast<double>(loss_g<float>(t.next, pred.image(0))));
  CHECK(r.score > 0.0);
  CHECK(r.frame_index == t.frame_index);

  // A perfect prediction scores zero.
  auto perfect = t;
  perfect.next = Matrix<float>(pred.image(0));
  CHECK(region_score(g, perfect, arch).score == 0.0);
}

TEST_CASE("batched scores do not depend on the worker count") {
  ArchConfig arch;
  arch.patch_size = 16;
  arch.levels = 2;
  arch.base_channels = 4;
  const auto g = init_generator(arch);
  const auto data = test::scene_triplets(16, 20);
  setenv("NLAP_THREADS", "1", 1);
  const auto a = region_scores(g, data, arch, {}, 7);
  setenv("NLAP_THREADS", "3", 1);
  const auto b = region_scores(g, data, arch, {}, 7);
  unsetenv("NLAP_THREADS");
  REQUIRE(a.size() == data.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].score == b[i].score);
    CHECK(a[i].frame_index == data[i].frame_index);
  }
}

TEST_CASE("frame scores take the per-frame maximum") {
  std::vector<RegionScore> r{{"v", 1, 0, 0.2}, {"v", 1, 1, 0.6}, {"v", 3, 2, 0.1}, {"w", 2, 0, 0.9}};
  const auto s = frame_scores("v", 5, r, 0.0);
  CHECK(s.scores.size() == 5);
  CHECK(s.scores[0] == 0.0);
  CHECK(s.scores[1] == 0.6);
  CHECK(s.scores[2] == 0.0);
  CHECK(s.scores[3] == 0.1);
}

TEST_CASE("gaussian kernel against direct evaluation") {
  for (double sigma : {0.5, 1.0, 2.0, 3.7}) {
    const int r = static_cast<int>(std::ceil(4 * sigma));
    double z = 0;
    for (int k = -r; k <= r; ++k) z += std::exp(-(k * k) / (2 * sigma * sigma));
    const auto kern = gaussian_kernel(sigma, r);
    CHECK(std::abs(kern.sum() - 1.0) < 1e-12);
    // Impulse in the middle of a long series reproduces the kernel.
    FrameScoreSeries impulse{"v", Vector<double>::Zero(101), SeriesStage::raw};
    impulse.scores[50] = 1.0;
    const auto out = gaussian_smooth(impulse, {sigma, -1});
    CHECK(out.stage == SeriesStage::smoothed);
    for (int k = -r; k <= r; ++k)
      CHECK(std::abs(out.scores[50 + k] - std::exp(-(k * k) / (2 * sigma * sigma)) / z) < 1e-10);
    CHECK(out.scores[50 + r + 1] == 0.0);
  }
}

TEST_CASE("smoothing edge cases") {
  FrameScoreSeries c{"v", Vector<double>::Constant(30, 0.37), SeriesStage::raw};
  CHECK(gaussian_smooth(c).scores == c.scores);
  Rng rng(1);
  FrameScoreSeries r{"v", Vector<double>(25), SeriesStage::raw};
  for (int i = 0; i < 25; ++i) r.scores[i] = rng.uniform();
  CHECK(gaussian_smooth(r, {0.0, -1}).scores == r.scores);
  // Series shorter than the kernel still reflect correctly.
  FrameScoreSeries tiny{"v", Vector<double>::Constant(3, 0.5), SeriesStage::raw};
  CHECK((gaussian_smooth(tiny).scores.array() - 0.5).abs().maxCoeff() < 1e-15);
  CHECK_THROWS(gaussian_smooth(r, {-1.0, -1}));
}

TEST_CASE("reflect padding is half-sample symmetric") {
  CHECK(reflect_index(-1, 5) == 0);
  CHECK(reflect_index(-2, 5) == 1);
  CHECK(reflect_index(5, 5) == 4);
  CHECK(reflect_index(6, 5) == 3);
  CHECK(reflect_index(11, 5) == 1);
  CHECK(reflect_index(-7, 3) == 0);
}

TEST_CASE("normalization") {
  FrameScoreSeries s{"v", Vector<double>(2), SeriesStage::smoothed};
  s.scores << 0.2, 0.7;
  const auto n = normalize(s);
  CHECK(n.scores[0] == 0.0);
  CHECK(n.scores[1] == 1.0);
  FrameScoreSeries c{"v", Vector<double>::Constant(2, 0.4), SeriesStage::smoothed};
  CHECK(normalize(c).scores == Vector<double>::Zero(2));

  Rng rng(8);
  FrameScoreSeries r{"v", Vector<double>(50), SeriesStage::smoothed};
  for (int i = 0; i < 50; ++i) r.scores[i] = rng.uniform(-3, 3);
  const auto rn = normalize(r);
  Eigen::Index a, b;
  r.scores.maxCoeff(&a);
  rn.scores.maxCoeff(&b);
  CHECK(a == b);
  for (int i = 1; i < 50; ++i) CHECK((r.scores[i] < r.scores[i - 1]) == (rn.scores[i] < rn.scores[i - 1]));

  std::vector<FrameScoreSeries> two{s, c};
  const auto g = normalize_global(two);
  CHECK(g[0].scores[0] == 0.0);
  CHECK(g[0].scores[1] == 1.0);
  CHECK(g[1].scores[0] == doctest::Approx(0.4));
}

TEST_CASE("score csv round trip") {
  ScoreTable t;
  t.video_id = "video_003";
  t.raw = Vector<double>::LinSpaced(12, 0, 1);
  t.smoothed = t.raw * 0.3;
  t.normalized = t.raw.array().square();
  const auto path = test::scratch_dir("csv") / "video_003.csv";
  write_score_csv(t, path);
  const auto back = read_score_csv(path);
  CHECK(back.video_id == "video_003");
  CHECK(back.raw == t.raw);
  CHECK(back.smoothed == t.smoothed);
  CHECK(back.normalized == t.normalized);
}
