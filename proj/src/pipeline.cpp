#include "nlap/pipeline.hpp"

#include "nlap/parallel.hpp"

#include <algorithm>

namespace nlap {

namespace fs = std::filesystem;

std::vector<fs::path> list_video_dirs(const fs::path& data_dir) {
  if (!fs::is_directory(data_dir))
    throw IngestError(IngestErrc::missing_directory, "data directory not found: " + data_dir.string());
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(data_dir))
    if (e.is_directory()) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

VideoData load_video_data(const fs::path& dir, double conf_threshold) {
  VideoData v;
  v.clip = load_video(dir);
  const fs::path det = dir / kDetectionsFileName;
  if (!fs::exists(det)) throw MissingDetectionsError(v.clip.id);
  v.detections = load_detections(det, v.clip.id, conf_threshold);
  check_detections(v.detections, v.clip);
  return v;
}

std::vector<VideoData> load_dataset(const fs::path& data_dir, double conf_threshold) {
  std::vector<VideoData> out;
  for (const auto& d : list_video_dirs(data_dir)) out.push_back(load_video_data(d, conf_threshold));
  return out;
}

DatasetTriplets collect_triplets(std::span<const VideoData> videos, const TripletConfig& cfg) {
  std::vector<TripletBuild> builds(videos.size());
  parallel_for(videos.size(), [&](std::size_t i) { builds[i] = build_triplets(videos[i].clip, videos[i].detections, cfg); });
  DatasetTriplets out;
  for (auto& b : builds) {
    out.skipped += b.skipped();
    std::move(b.triplets.begin(), b.triplets.end(), std::back_inserter(out.triplets));
  }
  return out;
}

ScoringOptions scoring_options(const RunConfig& cfg) { return {cfg.triplet, cfg.ssim, cfg.smooth, cfg.score}; }

std::vector<ScoreTable> score_videos(const GeneratorParams<float>& g, const ArchConfig& arch,
                                     std::span<const VideoData> videos, const ScoringOptions& opt) {
  std::vector<ScoreTable> tables;
  std::vector<FrameScoreSeries> smoothed;
  for (const auto& v : videos) {
    const auto build = build_triplets(v.clip, v.detections, opt.triplet);
    const auto regions = region_scores(g, build.triplets, arch, opt.ssim, opt.score.batch_size);
    const auto raw = frame_scores(v.clip.id, v.clip.frame_count(), regions, opt.score.default_score);
    smoothed.push_back(gaussian_smooth(raw, opt.smooth));
    ScoreTable t;
    t.video_id = v.clip.id;
    t.raw = raw.scores;
    t.smoothed = smoothed.back().scores;
    tables.push_back(std::move(t));
  }
  if (opt.score.normalization == Normalization::global) {
    const auto norm = normalize_global(smoothed);
    for (std::size_t i = 0; i < tables.size(); ++i) tables[i].normalized = norm[i].scores;
  } else {
    for (std::size_t i = 0; i < tables.size(); ++i) tables[i].normalized = normalize(smoothed[i]).scores;
  }
  return tables;
}

EvalReport evaluate_tables(std::span<const ScoreTable> tables, std::span<const GroundTruth> gts, Pooling pooling) {
  std::vector<FrameScoreSeries> series;
  for (const auto& t : tables) series.push_back(t.series(SeriesStage::normalized));
  return evaluate(series, gts, pooling);
}

}  // namespace nlap
