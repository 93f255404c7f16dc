#pragma once

#include "nlap/evaluator.hpp"
#include "nlap/model.hpp"
#include "nlap/scorer.hpp"
#include "nlap/synthbench.hpp"
#include "nlap/trainer.hpp"
#include "nlap/triplet.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"

namespace nlap {

enum class Normalization { per_video, global };

struct ScoreConfig {
  double default_score = 0.0;
  Normalization normalization = Normalization::per_video;
  int batch_size = 32;
};

/// Everything a command needs. The top-level seed feeds the architecture
/// initialization, the training shuffle and the synthetic benchmark.
struct RunConfig {
  std::uint64_t seed = 42;
  double confidence_threshold = kDefaultConfidenceThreshold;
  TripletConfig triplet;
  ArchConfig arch;
  TrainConfig train;
  SsimConfig ssim;
  SmoothConfig smooth;
  ScoreConfig score;
  Pooling pooling = Pooling::pooled;
  BenchmarkSpec synth;

  /// Copies the shared values (seed, patch size, SSIM settings) into the sections.
  void resolve();
  /// Throws ConfigError.
  void validate() const;
};

/// Builds a config from JSON; absent keys keep their defaults, unknown keys
/// are rejected. Throws ConfigError.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& cfg);

/// Applies an `--ablate` value (no-past, no-current, no-skip, no-adv).
void apply_ablation(ArchConfig& arch, const std::string& name);

}  // namespace nlap
