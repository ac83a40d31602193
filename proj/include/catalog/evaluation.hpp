#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "catalog/annotation.hpp"

namespace catalog {

struct EvalConfig {
  double iou_threshold = 0.9;
  bool require_attribute_match = true;
  std::vector<std::string> attribute_keys_checked{"catalog_figure_name", "excavation_unit", "morphological_class"};

  void validate() const;
};

// Entry field by name; throws ValidationError for names that are not
// string-valued entry fields.
const std::string& entry_field(const AnnotationEntry& e, const std::string& name);

enum class Verdict { true_positive, false_positive };

struct PredictionVerdict {
  std::size_t prediction = 0;  // index into the prediction list
  Verdict verdict = Verdict::false_positive;
  std::ptrdiff_t claimed_gt = -1;
};

struct MatchedPredictions {
  std::vector<PredictionVerdict> verdicts;  // in processing order
  std::size_t unclaimed_gt = 0;
};

// Predictions are processed by descending confidence; ties go by
// (page_id, crop_path, box), then list index.
// A prediction claims the unclaimed same-page GT entry with the highest IoU
// among those clearing the threshold and, when enabled, agreeing on every
// checked attribute.
MatchedPredictions match_predictions(std::span<const AnnotationEntry> predictions,
                                     std::span<const AnnotationEntry> ground_truth, const EvalConfig& cfg);

struct PrCurve {
  std::vector<std::pair<double, double>> points;  // (recall, precision)
  double ap = 0.0;
};

// All-points interpolated AP: each recall increase is weighted by the highest
// precision reached at that recall or beyond.
PrCurve average_precision(std::span<const Verdict> verdicts, std::size_t n_gt);

struct EvalReport {
  double ap = 0.0;
  std::size_t n_tp = 0;
  std::size_t n_fp = 0;
  std::size_t n_gt = 0;
  std::vector<std::pair<double, double>> pr_points;
};

EvalReport evaluate(std::span<const AnnotationEntry> predictions, std::span<const AnnotationEntry> ground_truth,
                    const EvalConfig& cfg);

void to_json(json& j, const EvalReport& r);

}  // namespace catalog
