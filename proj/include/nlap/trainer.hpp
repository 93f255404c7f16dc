#pragma once

#include "nlap/errors.hpp"
#include "nlap/metrics.hpp"
#include "nlap/model.hpp"
#include "nlap/triplet.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nlap {

struct StepLosses {
  double loss_d = 0;      // batch mean of the discriminator loss (0 when not adversarial)
  double loss_g = 0;      // batch mean reconstruction loss
  double loss_adv_g = 0;  // batch mean generator adversarial loss
  double objective_g = 0; // loss_g + adv_weight * loss_adv_g
};

struct LossRecord {
  std::int64_t step = 0;
  std::int64_t epoch = 0;
  StepLosses losses;
};

struct TrainConfig {
  double lr_g = 2e-4;
  double lr_d = 2e-4;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int batch_size = 32;
  int epochs = 20;
  std::uint64_t seed = 0;
  double adv_weight = 0.05;
  PatchReduction adv_reduction = PatchReduction::sum;
  std::optional<int> k_shot;
  SsimConfig ssim;
  /// Called after every step; not part of the configuration proper.
  std::function<void(const LossRecord&)> progress;

  void validate() const;
};

/// No usable training samples.
class EmptyDatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite loss or gradient during optimization.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Adam moments for one network, aligned with its ParamView order.
struct AdamState {
  std::vector<Vector<float>> m;
  std::vector<Vector<float>> v;
  std::int64_t step = 0;

  bool operator==(const AdamState&) const;
};

struct Checkpoint {
  ArchConfig arch;
  GeneratorParams<float> generator;
  DiscriminatorParams<float> discriminator;
  AdamState adam_g;
  AdamState adam_d;
  std::int64_t epoch = 0;
  std::vector<LossRecord> history;
};

/// Freshly initialized parameters and empty optimizer state.
Checkpoint initial_checkpoint(const ArchConfig& arch);

/// Observation points inside a train step, for tests and diagnostics.
struct StepHooks {
  /// After the discriminator update, before the generator update.
  std::function<void(const Checkpoint&)> after_discriminator;
  /// After the generator update.
  std::function<void(const Checkpoint&)> after_generator;
};

/// Content digest of the bytes of a parameter set.
std::uint64_t digest(const GeneratorParams<float>& p);
std::uint64_t digest(const DiscriminatorParams<float>& p);

/// Extra facts a train step records about its own ordering.
struct StepTrace {
  std::uint64_t generator_before = 0;       // digest of G entering the step
  std::uint64_t generator_for_fake = 0;     // digest of G that produced the fake batch
  std::uint64_t fake_batch = 0;             // digest of the fake batch shown to D and G
  std::uint64_t generator_after = 0;
  std::uint64_t discriminator_before = 0;
  std::uint64_t discriminator_after_d = 0;  // after the D sub-step
  std::uint64_t discriminator_after = 0;
};

/// One alternating update: the discriminator first (generator frozen), then
/// the generator (discriminator frozen). Without adversarial training only
/// the generator step runs.
StepLosses train_step(Checkpoint& state, std::span<const AppearanceTriplet* const> batch, const TrainConfig& cfg,
                      const StepHooks* hooks = nullptr, StepTrace* trace = nullptr);

/// Runs cfg.epochs seeded-shuffle epochs. Resumes from `init` when given
/// (parameters, optimizer state, epoch counter and history carry over).
Checkpoint train(std::span<const AppearanceTriplet> triplets, const ArchConfig& arch, const TrainConfig& cfg,
                 const Checkpoint* init = nullptr);

/// Frames whose triplets a k-shot selection keeps, per video id.
std::vector<std::pair<std::string, std::vector<int>>> select_k_shot_frames(
    std::span<const AppearanceTriplet> triplets, int k, std::uint64_t seed);

/// Keeps the triplets of K seeded-randomly selected frames per video and
/// resumes training from `ckpt`.
Checkpoint fine_tune(const Checkpoint& ckpt, std::span<const AppearanceTriplet> target, int k, const TrainConfig& cfg);

struct GradientCheckReport {
  double max_rel_error_generator = 0;
  double max_rel_error_discriminator = 0;
  int coordinates_generator = 0;
  int coordinates_discriminator = 0;
  int zero_agreements = 0;
  int kink_crossings = 0;  // sampled coordinates replaced because a step flipped an activation sign

  double max_rel_error() const { return std::max(max_rel_error_generator, max_rel_error_discriminator); }
};

struct GradientCheckOptions {
  double epsilon = 1e-3;
  int coordinates = 100;
  std::uint64_t seed = 0;
  double adv_weight = 0.05;
  /// Denominators below this are raised to it, so round-off on vanishing
  /// gradients is not reported as a relative error.
  double denominator_floor = 1e-8;
  SsimConfig ssim;
};

/// Relative disagreement |a - n| / max(|a|, |n|, floor); exact zeros agree.
double relative_error(double analytic, double numeric, double floor);

/// Compares analytic gradients of the generator objective and of the
/// discriminator loss with central differences on randomly sampled
/// parameter coordinates, in double precision. Coordinates whose steps
/// cross a leaky-ReLU kink are not differentiable there and are redrawn.
GradientCheckReport gradient_check(const ArchConfig& arch, const AppearanceTriplet& triplet,
                                   const GradientCheckOptions& opt = {});

/// Small architecture for gradient checks: 16x16 patches, 2 levels, 4 base channels.
ArchConfig gradient_check_arch();

// Checkpoint file -----------------------------------------------------------

enum class CheckpointErrc { io_failure, bad_magic, version_mismatch, corrupt };

class CheckpointError : public std::runtime_error {
 public:
  CheckpointError(CheckpointErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  CheckpointErrc code() const noexcept { return code_; }

 private:
  CheckpointErrc code_;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Loss history as CSV: step,epoch,loss_d,loss_g,loss_adv_g,objective_g.
void write_loss_history_csv(const std::vector<LossRecord>& history, const std::filesystem::path& path);

bool same_parameters(const Checkpoint& a, const Checkpoint& b);

}  // namespace nlap
