#include <algorithm>

#include "catalog/evaluation.hpp"
#include "test_support.hpp"

using namespace catalog;

namespace {

AnnotationEntry gt(double x, double y, std::string unit = "T1", std::string page = "p0000") {
  AnnotationEntry e;
  e.catalog_figure_name = "图一";
  e.excavation_unit = std::move(unit);
  e.morphological_class = "罐";
  e.bbox = {x, y, 100, 100};
  e.page_id = std::move(page);
  e.crop_path = "crops/" + e.page_id + "_" + std::to_string(int(x)) + "_" + std::to_string(int(y)) + ".png";
  return e;
}

AnnotationEntry pred(AnnotationEntry e, double confidence) {
  e.confidence = confidence;
  return e;
}

// Recomputes AP from first principles: for every recall level reached,
// take the best precision over all cut-offs whose recall is at least that
// level, and weight it by the recall increment.
double envelope_oracle(const std::vector<Verdict>& v, std::size_t n_gt) {
  if (n_gt == 0) return v.empty() ? 1.0 : 0.0;
  std::vector<std::size_t> tp(v.size());
  std::size_t t = 0;
  for (std::size_t k = 0; k < v.size(); ++k) tp[k] = t += (v[k] == Verdict::true_positive);
  double sum = 0.0;
  for (std::size_t level = 1; level <= t; ++level) {
    double best = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k)
      if (tp[k] >= level) best = std::max(best, double(tp[k]) / double(k + 1));
    sum += best;
  }
  return sum / double(n_gt);
}

}  // namespace

TEST_CASE("exact prediction is a true positive") {
  const std::vector<AnnotationEntry> g{gt(100, 100)};
  const std::vector<AnnotationEntry> p{pred(gt(100, 100), 0.9)};
  const auto m = match_predictions(p, g, {});
  REQUIRE(m.verdicts.size() == 1);
  CHECK(m.verdicts[0].verdict == Verdict::true_positive);
  CHECK(m.verdicts[0].claimed_gt == 0);
  CHECK(m.unclaimed_gt == 0);
  CHECK(evaluate(p, g, {}).ap == 1.0);
}

TEST_CASE("attribute disagreement is a false positive unless checks are off") {
  const std::vector<AnnotationEntry> g{gt(100, 100, "T1")};
  const std::vector<AnnotationEntry> p{pred(gt(100, 100, "T9"), 0.9)};
  CHECK(match_predictions(p, g, {}).verdicts[0].verdict == Verdict::false_positive);
  EvalConfig boxes_only;
  boxes_only.require_attribute_match = false;
  CHECK(match_predictions(p, g, boxes_only).verdicts[0].verdict == Verdict::true_positive);
}

TEST_CASE("a ground-truth entry is claimed once") {
  const std::vector<AnnotationEntry> g{gt(100, 100)};
  auto a = pred(gt(101, 100), 0.6);
  a.crop_path = "a";
  auto b = pred(gt(100, 100), 0.8);
  b.crop_path = "b";
  const std::vector<AnnotationEntry> p{a, b};
  const auto m = match_predictions(p, g, {});
  REQUIRE(m.verdicts.size() == 2);
  CHECK(m.verdicts[0].prediction == 1);
  CHECK(m.verdicts[0].verdict == Verdict::true_positive);
  CHECK(m.verdicts[1].verdict == Verdict::false_positive);
}

TEST_CASE("greedy claim takes the highest-iou eligible entry") {
  // Two GT boxes both clear 0.9 against the prediction; the closer one wins.
  const std::vector<AnnotationEntry> g{gt(103, 100), gt(101, 100)};
  const std::vector<AnnotationEntry> p{pred(gt(100, 100), 0.9)};
  CHECK(match_predictions(p, g, {}).verdicts[0].claimed_gt == 1);
}

TEST_CASE("other pages and low overlap never match") {
  const std::vector<AnnotationEntry> g{gt(100, 100, "T1", "p0001"), gt(150, 100)};
  const std::vector<AnnotationEntry> p{pred(gt(100, 100), 0.9)};
  const auto m = match_predictions(p, g, {});
  CHECK(m.verdicts[0].verdict == Verdict::false_positive);
  CHECK(m.unclaimed_gt == 2);
}

TEST_CASE("iou exactly at the threshold counts") {
  // [50,150] vs [60,160] in x: intersection 90, union 110 -> 9/11; threshold 9/11.
  EvalConfig cfg;
  const std::vector<AnnotationEntry> g{gt(100, 100)};
  const std::vector<AnnotationEntry> p{pred(gt(110, 100), 0.9)};
  cfg.iou_threshold = iou(g[0].bbox, p[0].bbox);
  cfg.require_attribute_match = false;
  CHECK(match_predictions(p, g, cfg).verdicts[0].verdict == Verdict::true_positive);
}

TEST_CASE("ap hand cases") {
  using V = Verdict;
  const std::vector<V> one{V::true_positive};
  CHECK(average_precision(one, 1).ap == 1.0);

  const std::vector<V> tp_fp{V::true_positive, V::false_positive};
  const auto c = average_precision(tp_fp, 2);
  CHECK(c.ap == 0.5);
  CHECK(c.points == std::vector<std::pair<double, double>>{{0.5, 1.0}, {0.5, 0.5}});

  const std::vector<V> fp_tp{V::false_positive, V::true_positive};
  const auto d = average_precision(fp_tp, 1);
  CHECK(d.ap == 0.5);
  CHECK(d.points == std::vector<std::pair<double, double>>{{0.0, 0.0}, {1.0, 0.5}});

  CHECK(average_precision({}, 0).ap == 1.0);
  CHECK(average_precision(one, 0).ap == 0.0);
  CHECK(average_precision({}, 3).ap == 0.0);
}

TEST_CASE("ap agrees with the envelope oracle") {
  std::mt19937_64 rng(53);
  std::uniform_int_distribution<int> len(0, 30), coin(0, 1), extra(0, 5);
  for (int trial = 0; trial < 3000; ++trial) {
    std::vector<Verdict> v;
    for (int i = len(rng); i > 0; --i) v.push_back(coin(rng) ? Verdict::true_positive : Verdict::false_positive);
    const std::size_t tps = std::size_t(std::count(v.begin(), v.end(), Verdict::true_positive));
    const std::size_t n_gt = tps + std::size_t(extra(rng));
    const auto curve = average_precision(v, n_gt);
    REQUIRE(curve.ap == envelope_oracle(v, n_gt));
    REQUIRE(curve.ap >= 0.0);
    REQUIRE(curve.ap <= 1.0);
    for (std::size_t k = 1; k < curve.points.size(); ++k) REQUIRE(curve.points[k].first >= curve.points[k - 1].first);
  }
}

TEST_CASE("perfect rankings score exactly one") {
  for (std::size_t n = 1; n <= 500; ++n) {
    std::vector<Verdict> v(n, Verdict::true_positive);
    REQUIRE(average_precision(v, n).ap == 1.0);
  }
}

TEST_CASE("permuting equal-confidence predictions leaves the score unchanged") {
  std::mt19937_64 rng(59);
  std::uniform_int_distribution<int> pos(0, 4), conf(0, 2), unit(0, 1);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<AnnotationEntry> g, p;
    for (int i = 0; i < 6; ++i) g.push_back(gt(100 + 200 * pos(rng), 100, unit(rng) ? "T1" : "T2"));
    for (int i = 0; i < 8; ++i) {
      auto e = pred(gt(100 + 200 * pos(rng) + pos(rng), 100, unit(rng) ? "T1" : "T2"), 0.5 + 0.1 * conf(rng));
      e.crop_path = "crops/p_" + std::to_string(i) + ".png";
      p.push_back(e);
    }
    const json base = json(evaluate(p, g, {}));
    for (int k = 0; k < 5; ++k) {
      std::shuffle(p.begin(), p.end(), rng);
      REQUIRE(json(evaluate(p, g, {})) == base);
    }
  }
}

TEST_CASE("report json shape") {
  const std::vector<AnnotationEntry> g{gt(100, 100), gt(400, 100)};
  const std::vector<AnnotationEntry> p{pred(gt(100, 100), 0.9), pred(gt(700, 100), 0.8)};
  const json r = evaluate(p, g, {});
  CHECK(r.dump() == R"({"ap":0.5,"n_tp":1,"n_fp":1,"n_gt":2,"pr_points":[[0.5,1.0],[0.5,0.5]]})");
}

TEST_CASE("config validation") {
  EvalConfig cfg;
  cfg.iou_threshold = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.iou_threshold = 1.0;
  CHECK_NOTHROW(cfg.validate());
  cfg.attribute_keys_checked = {"bbox"};
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}
