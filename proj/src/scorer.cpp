#include "nlap/scorer.hpp"

#include "nlap/errors.hpp"
#include "nlap/io.hpp"
#include "nlap/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace nlap {

RegionScore region_score(const GeneratorParams<float>& g, const AppearanceTriplet& triplet, const ArchConfig& arch,
                         const SsimConfig& ssim) {
  const auto scores = region_scores(g, std::span(&triplet, 1), arch, ssim, 1);
  return scores.front();
}

std::vector<RegionScore> region_scores(const GeneratorParams<float>& g, std::span<const AppearanceTriplet> triplets,
                                       const ArchConfig& arch, const SsimConfig& ssim, int batch_size) {
  if (batch_size < 1) throw ConfigError("scoring batch size must be >= 1");
  std::vector<RegionScore> out(triplets.size());
  const std::size_t batch = static_cast<std::size_t>(batch_size);
  const std::size_t chunks = (triplets.size() + batch - 1) / batch;
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t begin = c * batch;
    const std::size_t end = std::min(triplets.size(), begin + batch);
    std::vector<Patch> past, current;
    for (std::size_t i = begin; i < end; ++i) {
      const auto& t = triplets[i];
      if (t.next.rows() != arch.patch_size || t.next.cols() != arch.patch_size)
        throw std::invalid_argument("region_score: patch size does not match the architecture");
      past.push_back(t.past);
      current.push_back(t.current);
    }
    const Tensor<float> pred =
        generator_forward(g, stack_images<float>(past), stack_images<float>(current), arch);
    for (std::size_t i = begin; i < end; ++i) {
      const auto& t = triplets[i];
      const Matrix<float> p = pred.image(static_cast<int>(i - begin));
      out[i] = {t.video_id, t.frame_index, t.detection_ref, static_cast<double>(loss_g<float>(t.next, p, ssim))};
    }
  });
  return out;
}

double aggregate_frame(std::span<const double> scores, double default_score) {
  if (scores.empty()) return default_score;
  return *std::max_element(scores.begin(), scores.end());
}

FrameScoreSeries frame_scores(const std::string& video_id, int frame_count, std::span<const RegionScore> regions,
                              double default_score) {
  std::vector<std::vector<double>> per_frame(static_cast<std::size_t>(std::max(frame_count, 0)));
  for (const auto& r : regions) {
    if (r.video_id != video_id) continue;
    if (r.frame_index < 0 || r.frame_index >= frame_count)
      throw std::out_of_range("region score for frame " + std::to_string(r.frame_index) + " outside video " + video_id);
    per_frame[static_cast<std::size_t>(r.frame_index)].push_back(r.score);
  }
  FrameScoreSeries s{video_id, Vector<double>(frame_count), SeriesStage::raw};
  for (int t = 0; t < frame_count; ++t) s.scores[t] = aggregate_frame(per_frame[static_cast<std::size_t>(t)], default_score);
  return s;
}

int SmoothConfig::radius() const {
  return truncation_radius >= 0 ? truncation_radius : static_cast<int>(std::ceil(4.0 * sigma));
}

void SmoothConfig::validate() const {
  if (!(sigma >= 0) || !std::isfinite(sigma)) throw ConfigError("smoothing sigma must be >= 0");
}

Vector<double> gaussian_kernel(double sigma, int radius) {
  if (sigma == 0.0 || radius <= 0) return Vector<double>::Ones(1);
  Vector<double> k(2 * radius + 1);
  for (int i = -radius; i <= radius; ++i) k[i + radius] = std::exp(-(i * i) / (2.0 * sigma * sigma));
  return k / k.sum();
}

FrameScoreSeries gaussian_smooth(const FrameScoreSeries& series, const SmoothConfig& cfg) {
  cfg.validate();
  FrameScoreSeries out{series.video_id, convolve_reflect(series.scores, gaussian_kernel(cfg.sigma, cfg.radius())),
                       SeriesStage::smoothed};
  return out;
}

FrameScoreSeries normalize(const FrameScoreSeries& series) {
  FrameScoreSeries out{series.video_id, Vector<double>::Zero(series.scores.size()), SeriesStage::normalized};
  if (series.scores.size() == 0) return out;
  const double lo = series.scores.minCoeff();
  const double hi = series.scores.maxCoeff();
  if (hi > lo) out.scores = (series.scores.array() - lo) / (hi - lo);
  return out;
}

std::vector<FrameScoreSeries> normalize_global(std::span<const FrameScoreSeries> series) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& s : series) {
    if (s.scores.size() == 0) continue;
    lo = std::min(lo, s.scores.minCoeff());
    hi = std::max(hi, s.scores.maxCoeff());
  }
  std::vector<FrameScoreSeries> out;
  for (const auto& s : series) {
    FrameScoreSeries n{s.video_id, Vector<double>::Zero(s.scores.size()), SeriesStage::normalized};
    if (hi > lo) n.scores = (s.scores.array() - lo) / (hi - lo);
    out.push_back(std::move(n));
  }
  return out;
}

FrameScoreSeries ScoreTable::series(SeriesStage stage) const {
  switch (stage) {
    case SeriesStage::raw: return {video_id, raw, stage};
    case SeriesStage::smoothed: return {video_id, smoothed, stage};
    case SeriesStage::normalized: break;
  }
  return {video_id, normalized, SeriesStage::normalized};
}

void write_score_csv(const ScoreTable& table, const std::filesystem::path& path) {
  const auto n = table.raw.size();
  if (table.smoothed.size() != n || table.normalized.size() != n)
    throw std::invalid_argument("score table columns differ in length");
  write_file_atomically(path, [&](std::ostream& out) {
    out << "frame_index,raw,smoothed,normalized\n";
    char line[128];
    for (Eigen::Index t = 0; t < n; ++t) {
      std::snprintf(line, sizeof(line), "%lld,%.17g,%.17g,%.17g\n", static_cast<long long>(t), table.raw[t],
                    table.smoothed[t], table.normalized[t]);
      out << line;
    }
  });
}

ScoreTable read_score_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open score file " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("frame_index,raw,smoothed,normalized", 0) != 0)
    throw FormatError(path.string() + ": missing score header");
  std::vector<double> cols[3];
  long long expected = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    long long index;
    double v[3];
    if (!(fields >> index >> v[0] >> v[1] >> v[2]))
      throw FormatError(path.string() + ": malformed row " + std::to_string(expected + 2));
    if (index != expected) throw FormatError(path.string() + ": frame indices must run 0,1,2,...");
    for (int c = 0; c < 3; ++c) cols[c].push_back(v[c]);
    ++expected;
  }
  ScoreTable t;
  t.video_id = path.stem().string();
  t.raw = Eigen::Map<Vector<double>>(cols[0].data(), static_cast<Eigen::Index>(cols[0].size()));
  t.smoothed = Eigen::Map<Vector<double>>(cols[1].data(), static_cast<Eigen::Index>(cols[1].size()));
  t.normalized = Eigen::Map<Vector<double>>(cols[2].data(), static_cast<Eigen::Index>(cols[2].size()));
  return t;
}

}  // namespace nlap
