#include "nlap/config.hpp"

#include "nlap/errors.hpp"

#include <fstream>
#include <set>

namespace nlap {

using nlohmann::json;

void RunConfig::resolve() {
  arch.seed = seed;
  arch.patch_size = triplet.patch_size;
  train.seed = seed;
  train.ssim = ssim;
  synth.seed = seed;
}

void RunConfig::validate() const {
  if (!(confidence_threshold >= 0 && confidence_threshold <= 1))
    throw ConfigError("confidence_threshold must lie in [0,1]");
  triplet.validate();
  arch.validate();
  if (arch.patch_size != triplet.patch_size) throw ConfigError("arch and triplet patch sizes differ");
  train.validate();
  try {
    ssim.validate(triplet.patch_size);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  smooth.validate();
  if (score.batch_size < 1) throw ConfigError("score.batch_size must be >= 1");
  synth.validate();
}

namespace {

/// Reads keys out of one JSON object and refuses any it did not consume.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError(name_ + " must be a JSON object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(name_ + "." + key + ": " + e.what());
    }
  }

  template <typename T, typename Fn>
  void get_enum(const char* key, T& out, Fn&& parse) {
    std::string s;
    get(key, s);
    if (j_.contains(key)) out = parse(s, name_ + "." + key);
  }

  bool has(const char* key) {
    seen_.insert(key);
    return j_.contains(key);
  }
  const json& at(const char* key) const { return j_.at(key); }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) throw ConfigError("unknown config key " + name_ + "." + key);
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

PatchReduction parse_reduction(const std::string& s, const std::string& where) {
  if (s == "sum") return PatchReduction::sum;
  if (s == "mean") return PatchReduction::mean;
  throw ConfigError(where + ": expected sum or mean, got " + s);
}

Normalization parse_normalization(const std::string& s, const std::string& where) {
  if (s == "per_video") return Normalization::per_video;
  if (s == "global") return Normalization::global;
  throw ConfigError(where + ": expected per_video or global, got " + s);
}

Pooling parse_pooling(const std::string& s, const std::string& where) {
  if (s == "pooled") return Pooling::pooled;
  if (s == "per_video_mean") return Pooling::per_video_mean;
  throw ConfigError(where + ": expected pooled or per_video_mean, got " + s);
}

AnomalyKind parse_kind(const std::string& s, const std::string& where) {
  if (s == "speedup") return AnomalyKind::speedup;
  if (s == "shape_morph") return AnomalyKind::shape_morph;
  if (s == "direction_jitter") return AnomalyKind::direction_jitter;
  throw ConfigError(where + ": unknown anomaly kind " + s);
}

SpriteShape parse_shape(const std::string& s, const std::string& where) {
  if (s == "square") return SpriteShape::square;
  if (s == "disc") return SpriteShape::disc;
  throw ConfigError(where + ": unknown sprite shape " + s);
}

const char* name(PatchReduction r) { return r == PatchReduction::sum ? "sum" : "mean"; }
const char* name(Normalization n) { return n == Normalization::per_video ? "per_video" : "global"; }
const char* name(Pooling p) { return p == Pooling::pooled ? "pooled" : "per_video_mean"; }
const char* name(SpriteShape s) { return s == SpriteShape::square ? "square" : "disc"; }
const char* name(AnomalyKind k) {
  switch (k) {
    case AnomalyKind::speedup: return "speedup";
    case AnomalyKind::shape_morph: return "shape_morph";
    case AnomalyKind::direction_jitter: return "direction_jitter";
  }
  return "?";
}

}  // namespace

RunConfig parse_run_config(const json& j) {
  RunConfig c;
  Section top(j, "config");
  top.get("seed", c.seed);
  if (top.has("ingest")) {
    Section s(top.at("ingest"), "ingest");
    s.get("confidence_threshold", c.confidence_threshold);
    s.finish();
  }
  if (top.has("triplet")) {
    Section s(top.at("triplet"), "triplet");
    s.get("frame_gap", c.triplet.frame_gap);
    s.get("patch_size", c.triplet.patch_size);
    s.get("min_box_side", c.triplet.min_box_side);
    s.finish();
  }
  if (top.has("arch")) {
    Section s(top.at("arch"), "arch");
    s.get("use_past_encoder", c.arch.use_past_encoder);
    s.get("use_current_encoder", c.arch.use_current_encoder);
    s.get("skip_connections", c.arch.skip_connections);
    s.get("adversarial", c.arch.adversarial);
    s.get("base_channels", c.arch.base_channels);
    s.get("levels", c.arch.levels);
    s.finish();
  }
  if (top.has("train")) {
    Section s(top.at("train"), "train");
    s.get("lr_g", c.train.lr_g);
    s.get("lr_d", c.train.lr_d);
    s.get("adam_beta1", c.train.adam_beta1);
    s.get("adam_beta2", c.train.adam_beta2);
    s.get("adam_epsilon", c.train.adam_epsilon);
    s.get("batch_size", c.train.batch_size);
    s.get("epochs", c.train.epochs);
    s.get("adv_weight", c.train.adv_weight);
    s.get_enum("adv_reduction", c.train.adv_reduction, parse_reduction);
    if (s.has("k_shot") && !s.at("k_shot").is_null()) {
      int k = 0;
      s.get("k_shot", k);
      c.train.k_shot = k;
    }
    s.finish();
  }
  if (top.has("ssim")) {
    Section s(top.at("ssim"), "ssim");
    s.get("window_size", c.ssim.window_size);
    s.get("window_sigma", c.ssim.window_sigma);
    s.get("k1", c.ssim.k1);
    s.get("k2", c.ssim.k2);
    s.get("dynamic_range", c.ssim.dynamic_range);
    s.finish();
  }
  if (top.has("smooth")) {
    Section s(top.at("smooth"), "smooth");
    s.get("sigma", c.smooth.sigma);
    s.get("truncation_radius", c.smooth.truncation_radius);
    s.finish();
  }
  if (top.has("score")) {
    Section s(top.at("score"), "score");
    s.get("default_score", c.score.default_score);
    s.get_enum("normalization", c.score.normalization, parse_normalization);
    s.get("batch_size", c.score.batch_size);
    s.finish();
  }
  if (top.has("eval")) {
    Section s(top.at("eval"), "eval");
    s.get_enum("pooling", c.pooling, parse_pooling);
    s.finish();
  }
  if (top.has("synth")) {
    Section s(top.at("synth"), "synth");
    auto& b = c.synth;
    s.get("train_videos", b.train_videos);
    s.get("test_videos", b.test_videos);
    s.get_enum("anomaly_kind", b.anomaly_kind, parse_kind);
    s.get("anomaly_magnitude", b.anomaly_magnitude);
    s.get("anomaly_length", b.anomaly_length);
    s.get("height", b.scene.height);
    s.get("width", b.scene.width);
    s.get("sprite_count", b.scene.sprite_count);
    if (s.has("sprite_shapes")) {
      std::vector<std::string> names;
      s.get("sprite_shapes", names);
      b.scene.sprite_shapes.clear();
      for (const auto& n : names) b.scene.sprite_shapes.push_back(parse_shape(n, "synth.sprite_shapes"));
    }
    s.get("sprite_side", b.scene.sprite_side);
    s.get("speed_min", b.scene.speed_min);
    s.get("speed_max", b.scene.speed_max);
    s.get("background_seed", b.scene.background_seed);
    s.get("frames_per_video", b.scene.frames_per_video);
    s.get("noise_sigma", b.scene.noise_sigma);
    s.finish();
  }
  top.finish();
  c.resolve();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_run_config(j);
}

json to_json(const RunConfig& c) {
  json shapes = json::array();
  for (auto s : c.synth.scene.sprite_shapes) shapes.push_back(name(s));
  json train = {{"lr_g", c.train.lr_g},
                {"lr_d", c.train.lr_d},
                {"adam_beta1", c.train.adam_beta1},
                {"adam_beta2", c.train.adam_beta2},
                {"adam_epsilon", c.train.adam_epsilon},
                {"batch_size", c.train.batch_size},
                {"epochs", c.train.epochs},
                {"adv_weight", c.train.adv_weight},
                {"adv_reduction", name(c.train.adv_reduction)},
                {"k_shot", c.train.k_shot ? json(*c.train.k_shot) : json(nullptr)}};
  return {
      {"seed", c.seed},
      {"ingest", {{"confidence_threshold", c.confidence_threshold}}},
      {"triplet",
       {{"frame_gap", c.triplet.frame_gap}, {"patch_size", c.triplet.patch_size}, {"min_box_side", c.triplet.min_box_side}}},
      {"arch",
       {{"use_past_encoder", c.arch.use_past_encoder},
        {"use_current_encoder", c.arch.use_current_encoder},
        {"skip_connections", c.arch.skip_connections},
        {"adversarial", c.arch.adversarial},
        {"base_channels", c.arch.base_channels},
        {"levels", c.arch.levels}}},
      {"train", train},
      {"ssim",
       {{"window_size", c.ssim.window_size},
        {"window_sigma", c.ssim.window_sigma},
        {"k1", c.ssim.k1},
        {"k2", c.ssim.k2},
        {"dynamic_range", c.ssim.dynamic_range}}},
      {"smooth", {{"sigma", c.smooth.sigma}, {"truncation_radius", c.smooth.truncation_radius}}},
      {"score",
       {{"default_score", c.score.default_score},
        {"normalization", name(c.score.normalization)},
        {"batch_size", c.score.batch_size}}},
      {"eval", {{"pooling", name(c.pooling)}}},
      {"synth",
       {{"train_videos", c.synth.train_videos},
        {"test_videos", c.synth.test_videos},
        {"anomaly_kind", name(c.synth.anomaly_kind)},
        {"anomaly_magnitude", c.synth.anomaly_magnitude},
        {"anomaly_length", c.synth.anomaly_length},
        {"height", c.synth.scene.height},
        {"width", c.synth.scene.width},
        {"sprite_count", c.synth.scene.sprite_count},
        {"sprite_shapes", shapes},
        {"sprite_side", c.synth.scene.sprite_side},
        {"speed_min", c.synth.scene.speed_min},
        {"speed_max", c.synth.scene.speed_max},
        {"background_seed", c.synth.scene.background_seed},
        {"frames_per_video", c.synth.scene.frames_per_video},
        {"noise_sigma", c.synth.scene.noise_sigma}}}};
}

void apply_ablation(ArchConfig& arch, const std::string& name) {
  if (name == "no-past")
    arch.use_past_encoder = false;
  else if (name == "no-current")
    arch.use_current_encoder = false;
  else if (name == "no-skip")
    arch.skip_connections = false;
  else if (name == "no-adv")
    arch.adversarial = false;
  else
    throw ConfigError("unknown ablation " + name + " (expected no-past, no-current, no-skip or no-adv)");
}

}  // namespace nlap
