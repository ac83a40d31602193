#include "catalog/evaluation.hpp"

#include <algorithm>
#include <numeric>
#include <tuple>

namespace catalog {

void EvalConfig::validate() const {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) throw ValidationError("iou_threshold must lie in (0,1]");
  const AnnotationEntry probe;
  for (const auto& k : attribute_keys_checked) (void)entry_field(probe, k);
}

const std::string& entry_field(const AnnotationEntry& e, const std::string& name) {
  if (name == "catalog_figure_name") return e.catalog_figure_name;
  if (name == "excavation_unit") return e.excavation_unit;
  if (name == "morphological_class") return e.morphological_class;
  if (name == "crop_path") return e.crop_path;
  if (name == "page_id") return e.page_id;
  throw ValidationError("'" + name + "' is not a checkable annotation field");
}

MatchedPredictions match_predictions(std::span<const AnnotationEntry> predictions,
                                     std::span<const AnnotationEntry> ground_truth, const EvalConfig& cfg) {
  cfg.validate();
  std::vector<std::size_t> order(predictions.size());
  std::iota(order.begin(), order.end(), 0);
  // Equal confidences fall back to the entry's identity so that the outcome
  // does not depend on input order.
  auto key = [&](std::size_t i) {
    const auto& e = predictions[i];
    return std::tie(e.page_id, e.crop_path, e.bbox.y_c, e.bbox.x_c, e.bbox.h, e.bbox.w);
  };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double ca = predictions[a].confidence.value_or(0.0), cb = predictions[b].confidence.value_or(0.0);
    if (ca != cb) return ca > cb;
    return key(a) < key(b);
  });

  std::vector<char> claimed(ground_truth.size(), 0);
  MatchedPredictions out;
  for (const std::size_t p : order) {
    const auto& pred = predictions[p];
    std::ptrdiff_t best = -1;
    double best_iou = -1.0;
    for (std::size_t g = 0; g < ground_truth.size(); ++g) {
      const auto& gt = ground_truth[g];
      if (claimed[g] || gt.page_id != pred.page_id) continue;
      const double overlap = iou(pred.bbox, gt.bbox);
      if (!(overlap >= cfg.iou_threshold)) continue;
      if (cfg.require_attribute_match) {
        const bool same = std::all_of(cfg.attribute_keys_checked.begin(), cfg.attribute_keys_checked.end(),
                                      [&](const std::string& k) { return entry_field(pred, k) == entry_field(gt, k); });
        if (!same) continue;
      }
      if (overlap > best_iou) {
        best_iou = overlap;
        best = std::ptrdiff_t(g);
      }
    }
    if (best >= 0) {
      claimed[std::size_t(best)] = 1;
      out.verdicts.push_back({p, Verdict::true_positive, best});
    } else {
      out.verdicts.push_back({p, Verdict::false_positive, -1});
    }
  }
  out.unclaimed_gt = std::size_t(std::count(claimed.begin(), claimed.end(), 0));
  return out;
}

PrCurve average_precision(std::span<const Verdict> verdicts, std::size_t n_gt) {
  PrCurve curve;
  if (n_gt == 0) {
    // Nothing to find: only an empty prediction list is perfect.
    curve.ap = verdicts.empty() ? 1.0 : 0.0;
    curve.points.assign(verdicts.size(), {0.0, 0.0});
    return curve;
  }

  std::vector<std::size_t> tp_at(verdicts.size());
  std::size_t tp = 0;
  for (std::size_t k = 0; k < verdicts.size(); ++k) {
    if (verdicts[k] == Verdict::true_positive) ++tp;
    tp_at[k] = tp;
    curve.points.emplace_back(double(tp) / double(n_gt), double(tp) / double(k + 1));
  }

  // Precision envelope from the right: best precision at this recall or beyond.
  std::vector<double> envelope(curve.points.size());
  double running = 0.0;
  for (std::size_t k = curve.points.size(); k-- > 0;) {
    running = std::max(running, curve.points[k].second);
    envelope[k] = running;
  }

  // Recall steps are multiples of 1/n_gt; summing envelope values per step
  // and dividing once keeps a perfect ranking at exactly 1.
  double weighted = 0.0;
  std::size_t prev_tp = 0;
  for (std::size_t k = 0; k < tp_at.size(); ++k) {
    if (tp_at[k] > prev_tp) {
      weighted += double(tp_at[k] - prev_tp) * envelope[k];
      prev_tp = tp_at[k];
    }
  }
  curve.ap = std::clamp(weighted / double(n_gt), 0.0, 1.0);
  return curve;
}

EvalReport evaluate(std::span<const AnnotationEntry> predictions, std::span<const AnnotationEntry> ground_truth,
                    const EvalConfig& cfg) {
  const auto matched = match_predictions(predictions, ground_truth, cfg);
  std::vector<Verdict> verdicts;
  verdicts.reserve(matched.verdicts.size());
  for (const auto& v : matched.verdicts) verdicts.push_back(v.verdict);
  const PrCurve curve = average_precision(verdicts, ground_truth.size());

  EvalReport r;
  r.ap = curve.ap;
  r.n_tp = std::size_t(std::count(verdicts.begin(), verdicts.end(), Verdict::true_positive));
  r.n_fp = verdicts.size() - r.n_tp;
  r.n_gt = ground_truth.size();
  r.pr_points = curve.points;
  return r;
}

void to_json(json& j, const EvalReport& r) {
  json points = json::array();
  for (const auto& [recall, precision] : r.pr_points) points.push_back(json::array({recall, precision}));
  j = json{{"ap", r.ap}, {"n_tp", r.n_tp}, {"n_fp", r.n_fp}, {"n_gt", r.n_gt}, {"pr_points", points}};
}

}  // namespace catalog
