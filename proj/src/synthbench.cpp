#include "nlap/synthbench.hpp"

#include "nlap/errors.hpp"
#include "nlap/evaluator.hpp"
#include "nlap/parallel.hpp"
#include "nlap/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace nlap {

namespace fs = std::filesystem;

void SceneSpec::validate() const {
  if (height < 16 || width < 16) throw ConfigError("canvas must be at least 16x16");
  if (sprite_side < 1 || sprite_side > std::min(height, width)) throw ConfigError("sprites must fit in the canvas");
  if (sprite_count < 1) throw ConfigError("sprite_count must be >= 1");
  if (sprite_shapes.empty()) throw ConfigError("sprite_shapes must not be empty");
  if (!(speed_min >= 0) || !(speed_min <= speed_max)) throw ConfigError("need 0 <= speed_min <= speed_max");
  if (frames_per_video < 1) throw ConfigError("frames_per_video must be >= 1");
  if (!(noise_sigma >= 0)) throw ConfigError("noise_sigma must be >= 0");
}

void BenchmarkSpec::validate() const {
  scene.validate();
  if (train_videos < 0 || test_videos < 0) throw ConfigError("video counts must be >= 0");
  if (anomaly_length < 1 || anomaly_length > scene.frames_per_video)
    throw ConfigError("anomaly_length must lie in [1, frames_per_video]");
}

std::string video_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "video_%03d", index);
  return buf;
}

namespace {

constexpr std::uint64_t kBackgroundStream = 0x6267;
constexpr std::uint64_t kSpriteStream = 0x737072;
constexpr std::uint64_t kNoiseStream = 0x6e6f6973;
constexpr std::uint64_t kJitterStream = 0x6a6974;
constexpr std::uint64_t kTrainVideoStream = 0x7472;
constexpr std::uint64_t kTestVideoStream = 0x7465;
constexpr std::uint64_t kIntervalStream = 0x6976;

/// Two octaves of bilinearly interpolated lattice noise in a narrow gray band.
Image<float> value_noise_background(int h, int w, std::uint64_t seed) {
  auto rng = Rng::stream(seed, kBackgroundStream);
  Image<double> acc = Image<double>::Zero(h, w);
  for (const auto& [cell, amplitude] : {std::pair{16, 0.10}, std::pair{4, 0.04}}) {
    const int gh = h / cell + 2, gw = w / cell + 2;
    Image<double> lattice(gh, gw);
    for (int i = 0; i < gh; ++i)
      for (int j = 0; j < gw; ++j) lattice(i, j) = rng.uniform();
    for (int y = 0; y < h; ++y) {
      const double fy = (y + 0.5) / cell;
      const int y0 = static_cast<int>(fy);
      double ty = fy - y0;
      ty = ty * ty * (3 - 2 * ty);
      for (int x = 0; x < w; ++x) {
        const double fx = (x + 0.5) / cell;
        const int x0 = static_cast<int>(fx);
        double tx = fx - x0;
        tx = tx * tx * (3 - 2 * tx);
        const double top = lattice(y0, x0) + tx * (lattice(y0, x0 + 1) - lattice(y0, x0));
        const double bottom = lattice(y0 + 1, x0) + tx * (lattice(y0 + 1, x0 + 1) - lattice(y0 + 1, x0));
        acc(y, x) += amplitude * (top + ty * (bottom - top));
      }
    }
  }
  return (0.25 + acc.array()).cast<float>();
}

/// Coverage of a sprite on its side x side grid.
Image<float> sprite_mask(SpriteShape shape, int side, double morph) {
  Image<float> own(side, side), cross(side, side);
  const double r = side / 2.0;
  const double arm = side / 6.0;
  for (int i = 0; i < side; ++i) {
    for (int j = 0; j < side; ++j) {
      const double dy = i + 0.5 - r, dx = j + 0.5 - r;
      own(i, j) = shape == SpriteShape::square || dx * dx + dy * dy <= r * r ? 1.0f : 0.0f;
      cross(i, j) = std::abs(dx) < arm || std::abs(dy) < arm ? 1.0f : 0.0f;
    }
  }
  if (morph <= 0) return own;
  return ((1.0 - morph) * own.cast<double>() + morph * cross.cast<double>()).cast<float>();
}

struct Sprite {
  SpriteShape shape;
  float intensity;
  double x, y;    // top-left, continuous
  double vx, vy;  // px/frame
};

/// Moves `pos` by `step` inside [0, limit], mirroring at the walls.
void advance(double& pos, double& vel, double step, double limit) {
  pos += step;
  for (int guard = 0; guard < 64 && (pos < 0 || pos > limit); ++guard) {
    if (pos < 0) pos = -pos;
    if (pos > limit) pos = 2 * limit - pos;
    vel = -vel;
  }
  pos = std::clamp(pos, 0.0, limit);
}

void check_anomalies(const SceneSpec& spec, const std::vector<AnomalySpec>& anomalies) {
  std::vector<std::vector<std::pair<int, int>>> per_sprite(static_cast<std::size_t>(spec.sprite_count));
  for (std::size_t k = 0; k < anomalies.size(); ++k) {
    const auto& a = anomalies[k];
    if (a.t_start < 0 || a.t_end < a.t_start || a.t_end >= spec.frames_per_video)
      throw ConfigError("anomaly interval [" + std::to_string(a.t_start) + "," + std::to_string(a.t_end) +
                        "] lies outside the video");
    switch (a.kind) {
      case AnomalyKind::speedup:
        if (!(a.magnitude >= 3)) throw ConfigError("speedup magnitude must be >= 3");
        break;
      case AnomalyKind::shape_morph:
        if (!(a.magnitude > 0 && a.magnitude <= 1)) throw ConfigError("shape_morph magnitude must lie in (0,1]");
        break;
      case AnomalyKind::direction_jitter:
        if (!(a.magnitude > 0 && a.magnitude <= 180)) throw ConfigError("direction_jitter magnitude must lie in (0,180]");
        break;
    }
    const int s = a.sprite >= 0 ? a.sprite : static_cast<int>(k) % spec.sprite_count;
    if (s >= spec.sprite_count) throw ConfigError("anomaly refers to sprite " + std::to_string(s));
    for (const auto& [lo, hi] : per_sprite[static_cast<std::size_t>(s)])
      if (a.t_start <= hi && lo <= a.t_end) throw ConfigError("overlapping anomaly intervals on one sprite");
    per_sprite[static_cast<std::size_t>(s)].emplace_back(a.t_start, a.t_end);
  }
}

}  // namespace

SynthVideo generate_test(const SceneSpec& spec, const std::vector<AnomalySpec>& anomalies, std::uint64_t seed,
                         const std::string& video_id) {
  spec.validate();
  check_anomalies(spec, anomalies);
  const int n = spec.frames_per_video;
  const int side = spec.sprite_side;
  const double xmax = spec.width - side, ymax = spec.height - side;

  auto sprite_rng = Rng::stream(seed, kSpriteStream);
  std::vector<Sprite> sprites;
  for (int i = 0; i < spec.sprite_count; ++i) {
    Sprite s;
    s.shape = spec.sprite_shapes[static_cast<std::size_t>(i) % spec.sprite_shapes.size()];
    s.intensity = static_cast<float>(sprite_rng.uniform(0.75, 0.95));
    s.x = sprite_rng.uniform(0, xmax);
    s.y = sprite_rng.uniform(0, ymax);
    const double heading = sprite_rng.uniform(0, 2 * std::numbers::pi);
    const double speed = sprite_rng.uniform(spec.speed_min, spec.speed_max);
    s.vx = speed * std::cos(heading);
    s.vy = speed * std::sin(heading);
    sprites.push_back(s);
  }

  // Active anomaly of each sprite at frame t, or -1.
  auto active = [&](int sprite, int t) {
    for (std::size_t k = 0; k < anomalies.size(); ++k) {
      const auto& a = anomalies[k];
      const int s = a.sprite >= 0 ? a.sprite : static_cast<int>(k) % spec.sprite_count;
      if (s == sprite && t >= a.t_start && t <= a.t_end) return static_cast<int>(k);
    }
    return -1;
  };

  SynthVideo video;
  video.clip.id = video_id;
  video.detections.video_id = video_id;
  video.labels.assign(static_cast<std::size_t>(n), 0);
  video.tracks.assign(sprites.size(), {});
  for (const auto& a : anomalies)
    for (int t = a.t_start; t <= a.t_end; ++t) video.labels[static_cast<std::size_t>(t)] = 1;

  const Image<float> background = value_noise_background(spec.height, spec.width, spec.background_seed);
  auto noise_rng = Rng::stream(seed, kNoiseStream);
  auto jitter_rng = Rng::stream(seed, kJitterStream);
  const Image<float> plain_masks[2] = {sprite_mask(SpriteShape::square, side, 0),
                                       sprite_mask(SpriteShape::disc, side, 0)};

  for (int t = 0; t < n; ++t) {
    Image<float> canvas = background;
    for (std::size_t i = 0; i < sprites.size(); ++i) {
      auto& s = sprites[i];
      const int k = active(static_cast<int>(i), t);
      if (t > 0) {
        double factor = 1.0;
        if (k >= 0 && anomalies[static_cast<std::size_t>(k)].kind == AnomalyKind::speedup)
          factor = anomalies[static_cast<std::size_t>(k)].magnitude;
        if (k >= 0 && anomalies[static_cast<std::size_t>(k)].kind == AnomalyKind::direction_jitter) {
          const double turn =
              jitter_rng.normal(0, anomalies[static_cast<std::size_t>(k)].magnitude) * std::numbers::pi / 180;
          const double c = std::cos(turn), sn = std::sin(turn);
          const double vx = c * s.vx - sn * s.vy, vy = sn * s.vx + c * s.vy;
          s.vx = vx;
          s.vy = vy;
        }
        advance(s.x, s.vx, factor * s.vx, xmax);
        advance(s.y, s.vy, factor * s.vy, ymax);
      }
      video.tracks[i].push_back({s.x, s.y});

      const bool morphing = k >= 0 && anomalies[static_cast<std::size_t>(k)].kind == AnomalyKind::shape_morph;
      const Image<float> mask = morphing ? sprite_mask(s.shape, side, anomalies[static_cast<std::size_t>(k)].magnitude)
                                         : plain_masks[s.shape == SpriteShape::disc];
      const int ox = static_cast<int>(std::lround(s.x)), oy = static_cast<int>(std::lround(s.y));
      int x1 = side, y1 = side, x2 = -1, y2 = -1;
      for (int r = 0; r < side; ++r) {
        for (int c = 0; c < side; ++c) {
          const float a = mask(r, c);
          if (a <= 0) continue;
          float& px = canvas(oy + r, ox + c);
          px = px + a * (s.intensity - px);
          x1 = std::min(x1, c);
          x2 = std::max(x2, c);
          y1 = std::min(y1, r);
          y2 = std::max(y2, r);
        }
      }
      Detection d;
      d.frame_index = t;
      d.bbox = {double(ox + x1), double(oy + y1), double(ox + x2 + 1), double(oy + y2 + 1)};
      d.confidence = 1.0;
      d.class_id = static_cast<int>(i);
      video.detections.detections.push_back(d);
    }
    if (spec.noise_sigma > 0) {
      for (Eigen::Index p = 0; p < canvas.size(); ++p)
        canvas.data()[p] += static_cast<float>(noise_rng.normal(0, spec.noise_sigma));
    }
    video.clip.frames.push_back({t, quantize_8bit(canvas.cwiseMax(0.0f).cwiseMin(1.0f))});
  }
  return video;
}

SynthVideo generate_normal(const SceneSpec& spec, std::uint64_t seed, const std::string& video_id) {
  return generate_test(spec, {}, seed, video_id);
}

void write_video(const SynthVideo& video, const fs::path& split_dir) {
  const fs::path dir = split_dir / video.clip.id;
  fs::create_directories(dir);
  parallel_for(video.clip.frames.size(), [&](std::size_t i) {
    const auto& f = video.clip.frames[i];
    write_png(dir / frame_file_name(f.index), f.pixels);
  });
  save_detections(video.detections, dir / kDetectionsFileName);
  save_labels({video.clip.id, video.labels}, split_dir);
}

Benchmark make_benchmark(const BenchmarkSpec& spec) {
  spec.validate();
  SceneSpec scene = spec.scene;
  Benchmark b;
  b.train.resize(static_cast<std::size_t>(spec.train_videos));
  b.test.resize(static_cast<std::size_t>(spec.test_videos));
  parallel_for(b.train.size() + b.test.size(), [&](std::size_t job) {
    if (job < b.train.size()) {
      const int i = static_cast<int>(job);
      const auto seed = Rng::stream(spec.seed, kTrainVideoStream + static_cast<std::uint64_t>(i)).bits();
      b.train[job] = generate_normal(scene, seed, video_name(i));
      return;
    }
    const int i = static_cast<int>(job - b.train.size());
    const auto seed = Rng::stream(spec.seed, kTestVideoStream + static_cast<std::uint64_t>(i)).bits();
    auto interval_rng = Rng::stream(spec.seed, kIntervalStream + static_cast<std::uint64_t>(i));
    const int n = scene.frames_per_video;
    const int margin = std::min(10, (n - spec.anomaly_length) / 2);
    const int span = n - spec.anomaly_length - 2 * margin;
    AnomalySpec a;
    a.kind = spec.anomaly_kind;
    a.magnitude = spec.anomaly_magnitude;
    a.t_start = margin + static_cast<int>(interval_rng.below(static_cast<std::uint64_t>(span) + 1));
    a.t_end = a.t_start + spec.anomaly_length - 1;
    a.sprite = i % scene.sprite_count;
    b.test[static_cast<std::size_t>(i)] = generate_test(scene, {a}, seed, video_name(i));
  });
  return b;
}

}  // namespace nlap
