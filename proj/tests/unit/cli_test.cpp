#include "doctest.h"
#include "support.hpp"

#include <cstdlib>
#include <fstream>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

const fs::path kDir = nlap::test::scratch_dir("cli");

/// Exit status of the CLI run with `args`, output discarded.
int run(const std::string& args) {
  const std::string cmd = std::string(NLAP_CLI_PATH) + " " + args + " >" + (kDir / "out.txt").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::string p(const fs::path& x) { return x.string(); }

const fs::path& tiny_config() {
  static const fs::path path = [] {
    const auto f = kDir / "tiny.json";
    std::ofstream(f) << R"({"seed": 3,
      "triplet": {"patch_size": 16},
      "arch": {"base_channels": 4, "levels": 2},
      "train": {"epochs": 1, "batch_size": 8},
      "synth": {"train_videos": 1, "test_videos": 2, "frames_per_video": 40, "anomaly_length": 10,
                "height": 64, "width": 64, "sprite_count": 2}})";
    return f;
  }();
  return path;
}

/// Synthesizes data, then trains and scores twice (runs a and b). Once per process.
bool prepare() {
  static const bool ok = [] {
    const auto cfg = "--config " + p(tiny_config());
    if (run("synth " + cfg + " --out " + p(kDir / "data")) != 0) return false;
    for (const std::string tag : {"a", "b"}) {
      const auto ck = kDir / (tag + ".ckpt");
      if (run("train " + cfg + " --data " + p(kDir / "data/train") + " --out " + p(ck)) != 0) return false;
      if (run("score " + cfg + " --ckpt " + p(ck) + " --data " + p(kDir / "data/test") + " --out " +
              p(kDir / ("scores_" + tag))) != 0)
        return false;
    }
    return true;
  }();
  return ok;
}

}  // namespace

TEST_CASE("cli end to end is deterministic") {
  REQUIRE(prepare());
  const auto cfg = "--config " + p(tiny_config());
  CHECK(slurp(kDir / "a.ckpt") == slurp(kDir / "b.ckpt"));
  CHECK(slurp(kDir / "a.ckpt.loss.csv") == slurp(kDir / "b.ckpt.loss.csv"));
  CHECK(slurp(kDir / "scores_a/video_000.csv") == slurp(kDir / "scores_b/video_000.csv"));
  CHECK(!slurp(kDir / "scores_a/video_001.csv").empty());

  REQUIRE(run("eval " + cfg + " --scores " + p(kDir / "scores_a") + " --labels " + p(kDir / "data/test") +
              " --report " + p(kDir / "report.json")) == 0);
  CHECK(slurp(kDir / "out.txt").rfind("AUC=", 0) == 0);
  CHECK(fs::exists(kDir / "report.json"));

  // Fine-tuning from the checkpoint, with and without K.
  CHECK(run("train " + cfg + " --data " + p(kDir / "data/test") + " --init-from " + p(kDir / "a.ckpt") +
            " --k-shot 1 --out " + p(kDir / "k1.ckpt")) == 0);
  CHECK(run("train " + cfg + " --data " + p(kDir / "data/test") + " --k-shot 1 --out " + p(kDir / "k2.ckpt")) == 2);
}

TEST_CASE("cli exit codes") {
  REQUIRE(prepare());
  const auto cfg = "--config " + p(tiny_config());
  CHECK(run("") == 2);
  CHECK(run("train --bogus") == 2);
  CHECK(run("train " + cfg + " --data x --out y --ablate no-thing") == 2);

  std::ofstream(kDir / "bad.json") << R"({"train": {"learning_rate": 1}})";
  CHECK(run("synth --config " + p(kDir / "bad.json") + " --out " + p(kDir / "z")) == 2);

  // A video directory without detections.
  fs::create_directories(kDir / "nodets/video_000");
  fs::copy(kDir / "data/train/video_000/frame_000000.png", kDir / "nodets/video_000/frame_000000.png",
           fs::copy_options::overwrite_existing);
  CHECK(run("train " + cfg + " --data " + p(kDir / "nodets") + " --out " + p(kDir / "n.ckpt")) == 3);
  fs::create_directories(kDir / "empty");
  CHECK(run("train " + cfg + " --data " + p(kDir / "empty") + " --out " + p(kDir / "n.ckpt")) == 3);

  std::ofstream(kDir / "junk.ckpt") << "not a checkpoint at all";
  CHECK(run("score " + cfg + " --ckpt " + p(kDir / "junk.ckpt") + " --data " + p(kDir / "data/test") + " --out " +
            p(kDir / "s")) == 4);
  CHECK(run("score " + cfg + " --ckpt " + p(kDir / "missing.ckpt") + " --data " + p(kDir / "data/test") +
            " --out " + p(kDir / "s")) == 1);

  // Labels that do not match the score series.
  fs::create_directories(kDir / "badlabels");
  std::ofstream(kDir / "badlabels/video_000.labels") << "0\n1\n";
  std::ofstream(kDir / "badlabels/video_001.labels") << "0\n1\n";
  CHECK(run("eval " + cfg + " --scores " + p(kDir / "scores_a") + " --labels " + p(kDir / "badlabels") +
            " --report " + p(kDir / "r2.json")) == 5);

  // All-normal labels: undefined AUC is reported, not an error.
  fs::create_directories(kDir / "normal_labels");
  for (const char* id : {"video_000", "video_001"}) {
    std::ofstream out(kDir / "normal_labels" / (std::string(id) + ".labels"));
    for (int i = 0; i < 40; ++i) out << "0\n";
  }
  CHECK(run("eval " + cfg + " --scores " + p(kDir / "scores_a") + " --labels " + p(kDir / "normal_labels") +
            " --report " + p(kDir / "r3.json")) == 0);
  CHECK(slurp(kDir / "out.txt").find("AUC=undefined") != std::string::npos);
}
