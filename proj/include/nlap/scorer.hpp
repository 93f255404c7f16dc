#pragma once

#include "nlap/metrics.hpp"
#include "nlap/model.hpp"
#include "nlap/triplet.hpp"

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace nlap {

struct RegionScore {
  std::string video_id;
  int frame_index = 0;
  std::size_t detection_ref = 0;
  double score = 0;  // loss_g of the predicted next appearance, in [0,1]
};

/// Reconstruction loss of one object's predicted next appearance.
RegionScore region_score(const GeneratorParams<float>& g, const AppearanceTriplet& triplet, const ArchConfig& arch,
                         const SsimConfig& ssim = {});

/// region_score over many triplets, batched and spread over worker threads.
/// Results come back in input order and do not depend on the thread count.
std::vector<RegionScore> region_scores(const GeneratorParams<float>& g, std::span<const AppearanceTriplet> triplets,
                                       const ArchConfig& arch, const SsimConfig& ssim = {}, int batch_size = 32);

/// Highest region score, or `default_score` when the frame has none.
double aggregate_frame(std::span<const double> scores, double default_score = 0.0);

enum class SeriesStage { raw, smoothed, normalized };

struct FrameScoreSeries {
  std::string video_id;
  Vector<double> scores;
  SeriesStage stage = SeriesStage::raw;
};

/// Per-frame max aggregation of the region scores that belong to `video_id`.
FrameScoreSeries frame_scores(const std::string& video_id, int frame_count, std::span<const RegionScore> regions,
                              double default_score = 0.0);

struct SmoothConfig {
  double sigma = 2.0;
  int truncation_radius = -1;  // negative: ceil(4 sigma)

  int radius() const;
  void validate() const;
};

/// Normalized Gaussian weights for offsets -r..r.
Vector<double> gaussian_kernel(double sigma, int radius);

/// Index into [0,n) under half-sample symmetric reflection (d c b a | a b c d | d c b a).
inline Eigen::Index reflect_index(Eigen::Index i, Eigen::Index n) {
  const Eigen::Index period = 2 * n;
  Eigen::Index j = ((i % period) + period) % period;
  return j < n ? j : period - 1 - j;
}

/// 1-D correlation with a unit-sum `kernel` (odd length) under reflect
/// padding. Accumulates deviations from the center sample so constant
/// stretches come back bit-exact.
template <typename Derived>
Vector<double> convolve_reflect(const Eigen::MatrixBase<Derived>& x, const Vector<double>& kernel) {
  const Eigen::Index n = x.size();
  const Eigen::Index r = kernel.size() / 2;
  Vector<double> out = Vector<double>::Zero(n);
  if (n == 0) return out;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double c = x[i];
    double acc = 0;
    for (Eigen::Index k = -r; k <= r; ++k) acc += kernel[k + r] * (x[reflect_index(i + k, n)] - c);
    out[i] = c + acc;
  }
  return out;
}

FrameScoreSeries gaussian_smooth(const FrameScoreSeries& series, const SmoothConfig& cfg = {});

/// Min-max scaling to [0,1]; a constant series maps to zeros.
FrameScoreSeries normalize(const FrameScoreSeries& series);

/// Min-max scaling with the extremes taken over all videos together.
std::vector<FrameScoreSeries> normalize_global(std::span<const FrameScoreSeries> series);

/// One video's scores at every stage, as written to `<video_id>.csv`.
struct ScoreTable {
  std::string video_id;
  Vector<double> raw;
  Vector<double> smoothed;
  Vector<double> normalized;

  FrameScoreSeries series(SeriesStage stage) const;
};

void write_score_csv(const ScoreTable& table, const std::filesystem::path& path);
/// The video id is taken from the file stem. Throws FormatError.
ScoreTable read_score_csv(const std::filesystem::path& path);

}  // namespace nlap
