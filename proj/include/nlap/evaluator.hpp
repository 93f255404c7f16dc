#pragma once

#include "nlap/scorer.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace nlap {

struct GroundTruth {
  std::string video_id;
  std::vector<std::uint8_t> labels;  // 1 = abnormal frame
};

std::filesystem::path labels_path(const std::filesystem::path& dir, const std::string& video_id);
/// Reads `<video_id>.labels`: one `0` or `1` per line. Throws FormatError.
GroundTruth load_labels(const std::filesystem::path& path);
void save_labels(const GroundTruth& gt, const std::filesystem::path& dir);

/// AUC requested for labels of a single class.
class UndefinedAucError : public std::domain_error {
 public:
  UndefinedAucError() : std::domain_error("undefined AUC: labels contain a single class") {}
};

/// Score and label sets that cannot be paired (ids or lengths).
class EvaluationError : public std::runtime_error {
 public:
  EvaluationError(std::string video_id, const std::string& what)
      : std::runtime_error(what), video_id_(std::move(video_id)) {}
  const std::string& video_id() const noexcept { return video_id_; }

 private:
  std::string video_id_;
};

/// Mann-Whitney estimate of the ROC area, ties worth one half.
double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

struct RocPoint {
  double threshold;
  double fpr;
  double tpr;
};

/// Operating points for every distinct threshold, from (0,0) to (1,1).
std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const std::uint8_t> labels);

enum class Pooling { pooled, per_video_mean };

struct VideoAuc {
  std::string video_id;
  std::optional<double> auc;  // absent when the video has a single class
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

struct EvalReport {
  Pooling headline = Pooling::pooled;
  std::optional<double> pooled_auc;
  std::optional<double> per_video_mean_auc;
  std::vector<VideoAuc> videos;
  std::vector<RocPoint> roc;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::vector<std::string> notes;
  double elapsed_seconds = 0;

  std::optional<double> auc() const { return headline == Pooling::pooled ? pooled_auc : per_video_mean_auc; }
  nlohmann::json to_json() const;
};

/// Pairs series with labels by video id, concatenates them for the pooled
/// AUC and scores each two-class video on its own.
EvalReport evaluate(std::span<const FrameScoreSeries> series, std::span<const GroundTruth> gts,
                    Pooling headline = Pooling::pooled);

}  // namespace nlap
