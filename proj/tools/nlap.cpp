// nlap: synthetic data, training, scoring and evaluation from the command line.
#include "nlap/config.hpp"
#include "nlap/io.hpp"
#include "nlap/pipeline.hpp"
#include "nlap/trainer.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"

namespace fs = std::filesystem;
using namespace nlap;

namespace {

enum Exit { ok = 0, io_error = 1, config_error = 2, data_error = 3, checkpoint_error = 4, mismatch_error = 5 };

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;

  RunConfig load() const {
    RunConfig cfg = config.empty() ? RunConfig{} : load_run_config(config);
    if (seed) cfg.seed = *seed;
    cfg.resolve();
    return cfg;
  }
};

void log(const std::string& msg) { std::cerr << "nlap: " << msg << '\n'; }

int cmd_synth(const Common& common, const fs::path& out) {
  const RunConfig cfg = common.load();
  cfg.synth.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const Benchmark b = make_benchmark(cfg.synth);
  for (const auto& v : b.train) write_video(v, out / "train");
  for (const auto& v : b.test) write_video(v, out / "test");
  log("wrote " + std::to_string(b.train.size()) + " train and " + std::to_string(b.test.size()) + " test videos to " +
      out.string() + " in " +
      std::to_string(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()) + " s");
  return ok;
}

struct TrainArgs {
  fs::path data, out, init_from;
  std::optional<int> k_shot;
  std::vector<std::string> ablate;
};

int cmd_train(const Common& common, const TrainArgs& a) {
  RunConfig cfg = common.load();
  if (a.k_shot) cfg.train.k_shot = a.k_shot;
  for (const auto& name : a.ablate) apply_ablation(cfg.arch, name);
  cfg.validate();
  if (cfg.train.k_shot && a.init_from.empty()) throw ConfigError("--k-shot needs --init-from <checkpoint>");

  std::optional<Checkpoint> init;
  if (!a.init_from.empty()) {
    init = load_checkpoint(a.init_from);
    if (!a.ablate.empty() && !(init->arch == cfg.arch))
      throw ConfigError("--ablate conflicts with the architecture stored in " + a.init_from.string());
    if (init->arch.patch_size != cfg.triplet.patch_size)
      throw ConfigError("checkpoint patch size differs from triplet.patch_size");
  }
  const ArchConfig arch = init ? init->arch : cfg.arch;

  const auto videos = load_dataset(a.data, cfg.confidence_threshold);
  if (videos.empty()) throw EmptyDatasetError("no videos in " + a.data.string());
  const auto data = collect_triplets(videos, cfg.triplet);
  log(std::to_string(data.triplets.size()) + " triplets from " + std::to_string(videos.size()) + " videos (" +
      std::to_string(data.skipped) + " detections skipped)");
  if (data.triplets.empty()) throw EmptyDatasetError("no usable triplets in " + a.data.string());

  TrainConfig tc = cfg.train;
  const auto t0 = std::chrono::steady_clock::now();
  tc.progress = [&, last = std::int64_t{-1}](const LossRecord& r) mutable {
    if (r.epoch == last) return;
    last = r.epoch;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "epoch %lld step %lld loss_g=%.5f loss_adv_g=%.5f loss_d=%.5f (%.0f s)",
                  static_cast<long long>(r.epoch), static_cast<long long>(r.step), r.losses.loss_g,
                  r.losses.loss_adv_g, r.losses.loss_d,
                  std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    log(buf);
  };
  Checkpoint result = tc.k_shot ? fine_tune(*init, data.triplets, *tc.k_shot, tc)
                                : train(data.triplets, arch, tc, init ? &*init : nullptr);
  save_checkpoint(result, a.out);
  write_loss_history_csv(result.history, fs::path(a.out.string() + ".loss.csv"));
  log("saved " + a.out.string());
  return ok;
}

int cmd_score(const Common& common, const fs::path& ckpt_path, const fs::path& data, const fs::path& out) {
  RunConfig cfg = common.load();
  cfg.validate();
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  if (ckpt.arch.patch_size != cfg.triplet.patch_size)
    throw ConfigError("checkpoint patch size " + std::to_string(ckpt.arch.patch_size) +
                      " differs from triplet.patch_size " + std::to_string(cfg.triplet.patch_size));
  const auto videos = load_dataset(data, cfg.confidence_threshold);
  const auto tables = score_videos(ckpt.generator, ckpt.arch, videos, scoring_options(cfg));
  fs::create_directories(out);
  for (const auto& t : tables) write_score_csv(t, out / (t.video_id + ".csv"));
  log("scored " + std::to_string(tables.size()) + " videos into " + out.string());
  return ok;
}

int cmd_eval(const Common& common, const fs::path& scores_dir, const fs::path& labels_dir, const fs::path& report) {
  const RunConfig cfg = common.load();
  std::vector<ScoreTable> tables;
  std::vector<GroundTruth> gts;
  for (const auto& dir : {scores_dir, labels_dir})
    if (!fs::is_directory(dir)) throw FormatError("not a directory: " + dir.string());
  for (const auto& e : fs::directory_iterator(scores_dir))
    if (e.path().extension() == ".csv") tables.push_back(read_score_csv(e.path()));
  for (const auto& e : fs::directory_iterator(labels_dir))
    if (e.path().extension() == ".labels") gts.push_back(load_labels(e.path()));
  std::sort(tables.begin(), tables.end(), [](const auto& x, const auto& y) { return x.video_id < y.video_id; });
  const EvalReport r = evaluate_tables(tables, gts, cfg.pooling);
  write_file_atomically(report, [&](std::ostream& o) { o << r.to_json().dump(2) << '\n'; });
  if (const auto auc = r.auc()) {
    std::printf("AUC=%.4f\n", *auc);
  } else {
    std::printf("AUC=undefined\n");
    for (const auto& n : r.notes) log(n);
  }
  return ok;
}

int cmd_gradcheck(const Common& common, int coordinates, bool no_adv) {
  const RunConfig cfg = common.load();
  ArchConfig arch = gradient_check_arch();
  arch.seed = cfg.seed;
  arch.adversarial = !no_adv;
  TripletConfig tc;
  tc.patch_size = arch.patch_size;
  SceneSpec scene;
  scene.frames_per_video = 8;
  const auto video = generate_normal(scene, cfg.seed);
  const auto build = build_triplets(video.clip, video.detections, tc);
  GradientCheckOptions opt;
  opt.coordinates = coordinates;
  opt.seed = cfg.seed;
  const auto rep = gradient_check(arch, build.triplets.front(), opt);
  std::printf("max_rel_error generator=%.3e discriminator=%.3e coordinates=%d+%d kinks=%d\n", rep.max_rel_error_generator,
              rep.max_rel_error_discriminator, rep.coordinates_generator, rep.coordinates_discriminator,
              rep.kink_crossings);
  return rep.max_rel_error() < 1e-3 ? ok : io_error;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Object-centric next-appearance prediction for video anomaly detection"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--seed", common.seed, "Overrides the configured seed");
  };

  fs::path out, data, ckpt, scores, labels, report;
  TrainArgs targs;
  int coordinates = 100;
  bool no_adv = false;

  auto* synth = app.add_subcommand("synth", "Write the synthetic train/test benchmark");
  add_common(synth);
  synth->add_option("--out", out, "Output directory")->required();

  auto* tr = app.add_subcommand("train", "Train or fine-tune a model");
  add_common(tr);
  tr->add_option("--data", targs.data, "Directory of video directories")->required();
  tr->add_option("--out", targs.out, "Checkpoint to write")->required();
  tr->add_option("--init-from", targs.init_from, "Resume from this checkpoint");
  tr->add_option("--k-shot", targs.k_shot, "Fine-tune on K frames per video (needs --init-from)");
  tr->add_option("--ablate", targs.ablate, "no-past, no-current, no-skip or no-adv")
      ->check(CLI::IsMember({"no-past", "no-current", "no-skip", "no-adv"}));

  auto* sc = app.add_subcommand("score", "Write per-frame anomaly scores");
  add_common(sc);
  sc->add_option("--ckpt", ckpt, "Trained checkpoint")->required();
  sc->add_option("--data", data, "Directory of video directories")->required();
  sc->add_option("--out", out, "Directory for <video_id>.csv")->required();

  auto* ev = app.add_subcommand("eval", "Frame-level ROC-AUC of score files");
  add_common(ev);
  ev->add_option("--scores", scores, "Directory of score CSVs")->required();
  ev->add_option("--labels", labels, "Directory of <video_id>.labels")->required();
  ev->add_option("--report", report, "JSON report to write")->required();

  auto* gc = app.add_subcommand("gradcheck", "");
  gc->group("");
  add_common(gc);
  gc->add_option("--coordinates", coordinates, "Sampled coordinates per network");
  gc->add_flag("--no-adv", no_adv, "Check the reconstruction objective only");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : config_error;
  }

  try {
    if (*synth) return cmd_synth(common, out);
    if (*tr) return cmd_train(common, targs);
    if (*sc) return cmd_score(common, ckpt, data, out);
    if (*ev) return cmd_eval(common, scores, labels, report);
    if (*gc) return cmd_gradcheck(common, coordinates, no_adv);
  } catch (const ConfigError& e) {
    log("config error: " + std::string(e.what()));
    return config_error;
  } catch (const MissingDetectionsError& e) {
    log(e.what());
    return data_error;
  } catch (const EmptyDatasetError& e) {
    log(std::string("empty dataset: ") + e.what());
    return data_error;
  } catch (const CheckpointError& e) {
    log(std::string("checkpoint: ") + e.what());
    return e.code() == CheckpointErrc::io_failure ? io_error : checkpoint_error;
  } catch (const EvaluationError& e) {
    log(std::string("evaluation: ") + e.what());
    return mismatch_error;
  } catch (const std::exception& e) {
    log(std::string("error: ") + e.what());
    return io_error;
  }
  return ok;
}
