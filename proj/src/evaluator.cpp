#include "nlap/evaluator.hpp"

#include "nlap/io.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <map>
#include <numeric>

namespace nlap {

std::filesystem::path labels_path(const std::filesystem::path& dir, const std::string& video_id) {
  return dir / (video_id + ".labels");
}

GroundTruth load_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open labels " + path.string());
  GroundTruth gt;
  gt.video_id = path.stem().string();
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line == "0" || line == "1")
      gt.labels.push_back(static_cast<std::uint8_t>(line[0] - '0'));
    else if (!line.empty())
      throw FormatError(path.string() + ", line " + std::to_string(n) + ": expected 0 or 1");
  }
  return gt;
}

void save_labels(const GroundTruth& gt, const std::filesystem::path& dir) {
  write_file_atomically(labels_path(dir, gt.video_id), [&](std::ostream& out) {
    for (auto l : gt.labels) out << (l ? "1\n" : "0\n");
  });
}

namespace {

void check_pair(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("roc: scores and labels differ in length");
}

/// Indices ordered by score, ascending.
std::vector<std::size_t> order_by_score(std::span<const double> scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  return idx;
}

}  // namespace

double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  check_pair(scores, labels);
  const auto idx = order_by_score(scores);
  // Twice the U statistic stays an integer, so ties cost no precision.
  std::uint64_t twice_u = 0, pos = 0, neg = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    std::uint64_t p = 0, q = 0;
    for (; j < idx.size() && scores[idx[j]] == scores[idx[i]]; ++j) (labels[idx[j]] ? p : q) += 1;
    twice_u += 2 * p * neg + p * q;
    pos += p;
    neg += q;
    i = j;
  }
  if (pos == 0 || neg == 0) throw UndefinedAucError();
  return static_cast<double>(twice_u) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  check_pair(scores, labels);
  auto idx = order_by_score(scores);
  std::reverse(idx.begin(), idx.end());
  const auto pos = static_cast<double>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
  const auto neg = static_cast<double>(labels.size()) - pos;
  if (pos == 0 || neg == 0) throw UndefinedAucError();
  std::vector<RocPoint> out{{std::numeric_limits<double>::infinity(), 0.0, 0.0}};
  double tp = 0, fp = 0;
  for (std::size_t i = 0; i < idx.size();) {
    const double thr = scores[idx[i]];
    for (; i < idx.size() && scores[idx[i]] == thr; ++i) (labels[idx[i]] ? tp : fp) += 1;
    out.push_back({thr, fp / neg, tp / pos});
  }
  return out;
}

EvalReport evaluate(std::span<const FrameScoreSeries> series, std::span<const GroundTruth> gts, Pooling headline) {
  const auto start = std::chrono::steady_clock::now();
  std::map<std::string, const GroundTruth*> by_id;
  for (const auto& g : gts)
    if (!by_id.emplace(g.video_id, &g).second)
      throw EvaluationError(g.video_id, "duplicate ground-truth video id " + g.video_id);
  std::map<std::string, const FrameScoreSeries*> scored;
  for (const auto& s : series)
    if (!scored.emplace(s.video_id, &s).second)
      throw EvaluationError(s.video_id, "duplicate score video id " + s.video_id);
  for (const auto& [id, s] : scored)
    if (!by_id.count(id)) throw EvaluationError(id, "no ground truth for video " + id);
  for (const auto& [id, g] : by_id)
    if (!scored.count(id)) throw EvaluationError(id, "no scores for video " + id);

  EvalReport report;
  report.headline = headline;
  std::vector<double> all_scores;
  std::vector<std::uint8_t> all_labels;
  double auc_sum = 0;
  std::size_t auc_count = 0;
  for (const auto& [id, s] : scored) {
    const auto& labels = by_id.at(id)->labels;
    if (static_cast<std::size_t>(s->scores.size()) != labels.size())
      throw EvaluationError(id, "video " + id + ": " + std::to_string(s->scores.size()) + " scores but " +
                                    std::to_string(labels.size()) + " labels");
    std::span<const double> sc(s->scores.data(), labels.size());
    VideoAuc v{id, std::nullopt, 0, 0};
    v.positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
    v.negatives = labels.size() - v.positives;
    if (v.positives > 0 && v.negatives > 0) {
      v.auc = roc_auc(sc, labels);
      auc_sum += *v.auc;
      ++auc_count;
    } else {
      report.notes.push_back("video " + id + " excluded from per-video AUC: single class");
    }
    report.positives += v.positives;
    report.negatives += v.negatives;
    report.videos.push_back(v);
    all_scores.insert(all_scores.end(), sc.begin(), sc.end());
    all_labels.insert(all_labels.end(), labels.begin(), labels.end());
  }
  if (auc_count > 0) report.per_video_mean_auc = auc_sum / static_cast<double>(auc_count);
  if (report.positives > 0 && report.negatives > 0) {
    report.pooled_auc = roc_auc(all_scores, all_labels);
    report.roc = roc_curve(all_scores, all_labels);
  } else {
    report.notes.push_back("pooled AUC undefined: all frames carry one label");
  }
  report.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

nlohmann::json EvalReport::to_json() const {
  using nlohmann::json;
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json j;
  j["headline"] = headline == Pooling::pooled ? "pooled" : "per_video_mean";
  j["auc"] = opt(auc());
  j["pooled_auc"] = opt(pooled_auc);
  j["per_video_mean_auc"] = opt(per_video_mean_auc);
  j["positives"] = positives;
  j["negatives"] = negatives;
  j["videos"] = json::array();
  for (const auto& v : videos)
    j["videos"].push_back({{"video_id", v.video_id}, {"auc", opt(v.auc)}, {"positives", v.positives},
                           {"negatives", v.negatives}});
  j["roc"] = json::array();
  for (const auto& p : roc)
    j["roc"].push_back({{"threshold", std::isfinite(p.threshold) ? json(p.threshold) : json("inf")},
                        {"fpr", p.fpr},
                        {"tpr", p.tpr}});
  j["notes"] = notes;
  j["timing"] = {{"evaluate_seconds", elapsed_seconds}};
  return j;
}

}  // namespace nlap
