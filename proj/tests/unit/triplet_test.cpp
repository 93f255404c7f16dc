#include "nlap/triplet.hpp"

#include "doctest.h"
#include "nlap/errors.hpp"
#include "support.hpp"

using namespace nlap;

namespace {

VideoClip numbered_clip(int n, int side) {
  VideoClip clip{"numbered", {}};
  for (int t = 0; t < n; ++t) clip.frames.push_back({t, Image<float>::Constant(side, side, float(t) / 255.0f)});
  return clip;
}

}  // namespace

TEST_CASE("crop_resize identity, clamping and constants") {
  Rng rng(6);
  const Image<float> frame = test::random_matrix<float>(rng, 32, 32);
  CHECK(crop_resize(frame, {0, 0, 32, 32}, 32) == frame);
  CHECK(crop_resize(frame, {10, 4, 42, 20}, 16) == crop_resize(frame, {10, 4, 32, 20}, 16));
  const Image<float> flat = Image<float>::Constant(40, 50, 0.5f);
  for (int i = 0; i < 20; ++i) {
    const double x = rng.uniform(-4, 44), y = rng.uniform(-4, 34);
    const auto p = crop_resize(flat, {x, y, x + rng.uniform(6, 30), y + rng.uniform(6, 30)}, 16);
    CHECK((p.array() == 0.5f).all());
  }
  CHECK_THROWS_WITH(crop_resize(frame, {40, 40, 50, 50}, 16), "empty crop");
}

TEST_CASE("crop_resize downsamples by averaging neighbours") {
  // A 2x reduction with half-pixel centers samples halfway between pixel pairs.
  Image<float> frame(4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) frame(y, x) = static_cast<float>(x) / 4.0f;
  const auto p = crop_resize(frame, {0, 0, 4, 4}, 2);
  CHECK(p(0, 0) == doctest::Approx(0.125));
  CHECK(p(1, 1) == doctest::Approx(0.625));
}

TEST_CASE("triplets use frames t-T, t, t+T with the frame-t box") {
  const auto clip = numbered_clip(20, 32);
  DetectionSet dets{"numbered", {{5, {0, 0, 16, 16}, 1, 0}}};
  const auto b = build_triplets(clip, dets, {});
  REQUIRE(b.triplets.size() == 1);
  const auto& t = b.triplets[0];
  CHECK(t.past(0, 0) == 2.0f / 255.0f);
  CHECK(t.current(0, 0) == 5.0f / 255.0f);
  CHECK(t.next(0, 0) == 8.0f / 255.0f);
  CHECK(t.frame_index == 5);
  CHECK(t.past.rows() == 64);
}

TEST_CASE("boundary and size rules") {
  const auto clip = numbered_clip(300, 64);
  DetectionSet dets{"numbered",
                    {{2, {0, 0, 16, 16}, 1, 0},
                     {3, {0, 0, 16, 16}, 1, 0},
                     {296, {0, 0, 16, 16}, 1, 0},
                     {297, {0, 0, 16, 16}, 1, 0},
                     {50, {0, 0, 7, 16}, 1, 0},
                     {50, {60, 60, 70, 70}, 1, 0}}};
  const auto b = build_triplets(clip, dets, {});
  CHECK(b.triplets.size() == 2);
  CHECK(b.skipped_boundary == 2);
  CHECK(b.skipped_small == 2);  // the second small box is small only after clamping
}

TEST_CASE("triplet count equals a brute-force scan and order is stable") {
  Rng rng(10);
  const auto clip = numbered_clip(40, 48);
  DetectionSet dets{"numbered", {}};
  for (int i = 0; i < 200; ++i) {
    const double x = rng.uniform(-10, 45), y = rng.uniform(-10, 45);
    dets.detections.push_back({static_cast<int>(rng.below(40)),
                               {x, y, x + rng.uniform(1, 30), y + rng.uniform(1, 30)}, 1, i});
  }
  const TripletConfig cfg;
  std::vector<int> expected;  // class ids in (frame, input order)
  for (int t = 0; t < 40; ++t)
    for (const auto& d : dets.detections) {
      if (d.frame_index != t || t < 3 || t > 36) continue;
      const BBox c = clamp_to_frame(d.bbox, 48, 48);
      if (c.width() >= 8 && c.height() >= 8) expected.push_back(d.class_id);
    }
  const auto b = build_triplets(clip, dets, cfg);
  REQUIRE(b.triplets.size() == expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i)
    CHECK(dets.detections[b.triplets[i].detection_ref].class_id == expected[i]);
  const auto again = build_triplets(clip, dets, cfg);
  for (std::size_t i = 0; i < expected.size(); ++i) CHECK(again.triplets[i].next == b.triplets[i].next);
}

TEST_CASE("static scene gives identical patches") {
  Rng rng(2);
  const Image<float> still = test::random_matrix<float>(rng, 32, 32);
  VideoClip clip{"still", {}};
  for (int t = 0; t < 10; ++t) clip.frames.push_back({t, still});
  DetectionSet dets{"still", {{4, {3.5, 2.25, 20, 30}, 1, 0}}};
  const auto t = build_triplets(clip, dets, {}).triplets.at(0);
  CHECK(t.past == t.current);
  CHECK(t.current == t.next);
}

TEST_CASE("triplet config validation") {
  TripletConfig c;
  c.patch_size = 48;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.frame_gap = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("triplet cache round trip") {
  const auto triplets = test::scene_triplets(16);
  REQUIRE(!triplets.empty());
  const auto path = test::scratch_dir("cache") / "t.bin";
  save_triplet_cache(triplets, 16, path);
  CHECK(std::filesystem::file_size(path) > 16);
  const auto back = load_triplet_cache(path);
  REQUIRE(back.size() == triplets.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].video_id == triplets[i].video_id);
    CHECK(back[i].frame_index == triplets[i].frame_index);
    CHECK(back[i].detection_ref == triplets[i].detection_ref);
    CHECK(back[i].past == triplets[i].past);
    CHECK(back[i].next == triplets[i].next);
  }
}
