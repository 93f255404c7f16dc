#pragma once

#include "nlap/ingest.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace nlap {

enum class SpriteShape { square, disc };

struct SceneSpec {
  int height = 128;
  int width = 128;
  int sprite_count = 3;
  std::vector<SpriteShape> sprite_shapes{SpriteShape::square, SpriteShape::disc};
  int sprite_side = 16;
  double speed_min = 1.0;  // px/frame
  double speed_max = 2.0;
  std::uint64_t background_seed = 0;
  int frames_per_video = 300;
  double noise_sigma = 0.01;

  /// Throws ConfigError.
  void validate() const;
};

enum class AnomalyKind { speedup, shape_morph, direction_jitter };

struct AnomalySpec {
  AnomalyKind kind = AnomalyKind::speedup;
  /// speedup: velocity multiplier (>= 3); shape_morph: blend toward a cross
  /// in (0,1]; direction_jitter: per-frame heading noise, degrees.
  double magnitude = 4.0;
  int t_start = 0;
  int t_end = 0;   // inclusive
  int sprite = -1; // negative: the anomaly's list position modulo sprite_count
};

struct SynthVideo {
  VideoClip clip;
  DetectionSet detections;
  std::vector<std::uint8_t> labels;
  /// Continuous top-left position of each sprite in each frame: tracks[sprite][frame].
  std::vector<std::vector<std::array<double, 2>>> tracks;
};

SynthVideo generate_normal(const SceneSpec& spec, std::uint64_t seed, const std::string& video_id = "video");

/// As generate_normal, with one sprite deviating inside each anomaly interval.
/// Throws ConfigError for intervals outside the video, magnitudes out of
/// range or overlapping intervals on one sprite.
SynthVideo generate_test(const SceneSpec& spec, const std::vector<AnomalySpec>& anomalies, std::uint64_t seed,
                         const std::string& video_id = "video");

/// Writes `<split_dir>/<id>/frame_*.png`, `<split_dir>/<id>/detections.jsonl`
/// and `<split_dir>/<id>.labels`.
void write_video(const SynthVideo& video, const std::filesystem::path& split_dir);

/// Seeded train/test split of normal videos and videos with one anomaly each.
struct BenchmarkSpec {
  std::uint64_t seed = 42;
  int train_videos = 10;
  int test_videos = 5;
  SceneSpec scene;
  AnomalyKind anomaly_kind = AnomalyKind::speedup;
  double anomaly_magnitude = 4.0;
  int anomaly_length = 50;

  void validate() const;
};

struct Benchmark {
  std::vector<SynthVideo> train;
  std::vector<SynthVideo> test;
};

Benchmark make_benchmark(const BenchmarkSpec& spec);

/// "video_007" style ids.
std::string video_name(int index);

}  // namespace nlap
