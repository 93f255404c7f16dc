#include "nlap/evaluator.hpp"

#include "doctest.h"
#include "support.hpp"

#include <fstream>

using namespace nlap;

namespace {

/// Counts every (positive, negative) pair.
double pair_counting_auc(const std::vector<double>& s, const std::vector<std::uint8_t>& l) {
  double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (l[i] == 1 && l[j] == 0) {
        pairs += 1;
        wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
      }
  return wins / pairs;
}

FrameScoreSeries series(const std::string& id, std::vector<double> v) {
  return {id, Eigen::Map<Vector<double>>(v.data(), static_cast<Eigen::Index>(v.size())), SeriesStage::normalized};
}

}  // namespace

TEST_CASE("roc_auc examples") {
  const std::vector<double> s{0.1, 0.4, 0.35, 0.8};
  const std::vector<std::uint8_t> l{0, 0, 1, 1};
  CHECK(roc_auc(s, l) == 0.75);
  CHECK(pair_counting_auc(s, l) == 0.75);
  CHECK(roc_auc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, l) == 1.0);
  CHECK(roc_auc(std::vector<double>{0.3, 0.3, 0.3, 0.3}, l) == 0.5);
  CHECK_THROWS_WITH_AS(roc_auc(s, std::vector<std::uint8_t>{1, 1, 1, 1}), doctest::Contains("undefined AUC"),
                       UndefinedAucError);
  CHECK_THROWS_AS(roc_auc(s, std::vector<std::uint8_t>{1, 0}), std::invalid_argument);
}

TEST_CASE("roc_auc agrees with pair counting on random instances") {
  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(199));
    std::vector<double> s(n);
    std::vector<std::uint8_t> l(n);
    for (int i = 0; i < n; ++i) {
      s[i] = std::round(rng.uniform() * 20) / 20;  // coarse grid forces ties
      l[i] = rng.uniform() < 0.3;
    }
    l[0] = 1;
    l[1] = 0;
    const double auc = roc_auc(s, l);
    CHECK(std::abs(auc - pair_counting_auc(s, l)) <= 1e-12);
    std::vector<std::uint8_t> flipped(n);
    for (int i = 0; i < n; ++i) flipped[i] = 1 - l[i];
    CHECK(auc + roc_auc(s, flipped) == 1.0);
    std::vector<double> warped(n);
    for (int i = 0; i < n; ++i) warped[i] = std::exp(3 * s[i]) - 7;
    CHECK(roc_auc(warped, l) == auc);
  }
}

TEST_CASE("roc curve end points") {
  const std::vector<double> s{0.1, 0.4, 0.35, 0.8};
  const std::vector<std::uint8_t> l{0, 0, 1, 1};
  const auto c = roc_curve(s, l);
  CHECK(c.front().fpr == 0.0);
  CHECK(c.front().tpr == 0.0);
  CHECK(c.back().fpr == 1.0);
  CHECK(c.back().tpr == 1.0);
  CHECK(c.size() == 5);
  double area = 0;
  for (std::size_t i = 1; i < c.size(); ++i) area += (c[i].fpr - c[i - 1].fpr) * (c[i].tpr + c[i - 1].tpr) / 2;
  CHECK(area == doctest::Approx(0.75));
}

TEST_CASE("pooling across videos can lose separability") {
  // Each video separates perfectly, but video b's normal frames sit above
  // video a's abnormal ones.
  std::vector<FrameScoreSeries> s{series("a", {0.0, 0.1, 0.2, 0.3}), series("b", {0.5, 0.6, 0.9, 1.0})};
  std::vector<GroundTruth> g{{"a", {0, 0, 1, 1}}, {"b", {0, 0, 1, 1}}};
  const auto r = evaluate(s, g);
  REQUIRE(r.videos.size() == 2);
  CHECK(*r.videos[0].auc == 1.0);
  CHECK(*r.videos[1].auc == 1.0);
  CHECK(*r.per_video_mean_auc == 1.0);
  std::vector<double> all{0.0, 0.1, 0.2, 0.3, 0.5, 0.6, 0.9, 1.0};
  std::vector<std::uint8_t> lab{0, 0, 1, 1, 0, 0, 1, 1};
  CHECK(*r.pooled_auc == pair_counting_auc(all, lab));
  CHECK(*r.pooled_auc < 1.0);
  CHECK(r.positives == 4);
  CHECK(r.negatives == 4);
  CHECK(r.auc() == r.pooled_auc);
  CHECK(evaluate(s, g, Pooling::per_video_mean).auc() == 1.0);
}

TEST_CASE("evaluation contract errors and exclusions") {
  std::vector<FrameScoreSeries> one{series("a", {0.1, 0.2, 0.3})};
  const auto r = evaluate(one, std::vector<GroundTruth>{{"a", {0, 0, 0}}});
  CHECK(!r.pooled_auc);
  CHECK(!r.videos[0].auc);
  CHECK(r.notes.size() == 2);
  CHECK(r.to_json()["auc"].is_null());

  CHECK_THROWS_AS(evaluate(one, std::vector<GroundTruth>{{"a", {0, 1}}}), EvaluationError);
  CHECK_THROWS_AS(evaluate(one, std::vector<GroundTruth>{{"b", {0, 1, 0}}}), EvaluationError);
  std::vector<FrameScoreSeries> dup{series("a", {0.1}), series("a", {0.2})};
  CHECK_THROWS_AS(evaluate(dup, std::vector<GroundTruth>{{"a", {0}}}), EvaluationError);
  try {
    evaluate(one, std::vector<GroundTruth>{{"a", {0, 1}}});
  } catch (const EvaluationError& e) {
    CHECK(e.video_id() == "a");
  }
}

TEST_CASE("labels files") {
  const auto dir = test::scratch_dir("labels");
  save_labels({"video_001", {0, 1, 1, 0}}, dir);
  const auto back = load_labels(dir / "video_001.labels");
  CHECK(back.video_id == "video_001");
  CHECK(back.labels == std::vector<std::uint8_t>{0, 1, 1, 0});
  std::ofstream(dir / "bad.labels") << "0\n2\n";
  CHECK_THROWS(load_labels(dir / "bad.labels"));
}

TEST_CASE("report json fields") {
  std::vector<FrameScoreSeries> s{series("a", {0.1, 0.4, 0.35, 0.8})};
  const auto j = evaluate(s, std::vector<GroundTruth>{{"a", {0, 0, 1, 1}}}).to_json();
  CHECK(j["auc"].get<double>() == 0.75);
  CHECK(j["videos"][0]["video_id"] == "a");
  CHECK(j["positives"] == 2);
  CHECK(j.contains("roc"));
  CHECK(j["timing"].contains("evaluate_seconds"));
}
