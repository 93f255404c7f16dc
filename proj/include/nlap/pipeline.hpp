#pragma once

#include "nlap/config.hpp"

#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nlap {

struct VideoData {
  VideoClip clip;
  DetectionSet detections;
};

/// A video directory without its detections file.
class MissingDetectionsError : public std::runtime_error {
 public:
  explicit MissingDetectionsError(std::string video_id)
      : std::runtime_error("missing " + std::string(kDetectionsFileName) + " for video " + video_id),
        video_id_(std::move(video_id)) {}
  const std::string& video_id() const noexcept { return video_id_; }

 private:
  std::string video_id_;
};

/// Subdirectories of `data_dir` in name order.
std::vector<std::filesystem::path> list_video_dirs(const std::filesystem::path& data_dir);

VideoData load_video_data(const std::filesystem::path& dir, double conf_threshold = kDefaultConfidenceThreshold);
std::vector<VideoData> load_dataset(const std::filesystem::path& data_dir,
                                    double conf_threshold = kDefaultConfidenceThreshold);

struct DatasetTriplets {
  std::vector<AppearanceTriplet> triplets;  // video order, then frame order
  std::size_t skipped = 0;
};

DatasetTriplets collect_triplets(std::span<const VideoData> videos, const TripletConfig& cfg);

struct ScoringOptions {
  TripletConfig triplet;
  SsimConfig ssim;
  SmoothConfig smooth;
  ScoreConfig score;
};

ScoringOptions scoring_options(const RunConfig& cfg);

/// Raw, smoothed and normalized frame scores of each video.
std::vector<ScoreTable> score_videos(const GeneratorParams<float>& g, const ArchConfig& arch,
                                     std::span<const VideoData> videos, const ScoringOptions& opt);

/// Normalized series of scored videos next to their labels.
EvalReport evaluate_tables(std::span<const ScoreTable> tables, std::span<const GroundTruth> gts,
                           Pooling pooling = Pooling::pooled);

}  // namespace nlap
