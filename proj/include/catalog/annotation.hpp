#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "catalog/matching.hpp"
#include "catalog/types.hpp"

namespace catalog {

// One dataset row: an artifact crop with its caption-derived attributes.
struct AnnotationEntry {
  std::string catalog_figure_name;
  std::string crop_path;
  std::string excavation_unit;
  std::string morphological_class;
  BoundingBox bbox;
  std::string page_id;
  MatchStage match_stage = MatchStage::foreign_key;
  // Detector score of the image block; absent in ground-truth files.
  std::optional<double> confidence;

  friend bool operator==(const AnnotationEntry&, const AnnotationEntry&) = default;
};

void to_json(json& j, const AnnotationEntry& e);
void from_json(const json& j, AnnotationEntry& e);

// Text-record keys that feed the entry fields.
struct AnnotationFields {
  std::string figure_key = "catalog_figure_no";
  std::string unit_key = "excavation_unit";
  std::string class_key = "morphological_class";
};

struct EmitResult {
  std::vector<AnnotationEntry> entries;
  std::vector<std::string> warnings;
};

// Builds one entry per pair, copies the image crops from crops_src into
// out_dir/crops when they differ, and writes out_dir/annotations.jsonl.
// Entries are sorted by (page_id, image block id).
EmitResult emit_annotations(std::span<const MatchPair> matches, std::span<const AttributeRecord> text_records,
                            const BlockLayout& layout, const std::filesystem::path& crops_src,
                            const std::filesystem::path& out_dir, const AnnotationFields& fields = {});

std::string to_jsonl(std::span<const AnnotationEntry> entries);
std::vector<AnnotationEntry> read_jsonl(const std::filesystem::path& path);

using Histogram = std::vector<std::pair<std::string, std::size_t>>;

struct DatasetStats {
  Histogram class_histogram;  // count descending, then key ascending
  Histogram unit_histogram;
  std::size_t total_pairs = 0;
  std::size_t n_classes = 0;
  std::size_t n_units = 0;
};

DatasetStats compute_stats(std::span<const AnnotationEntry> entries);
void to_json(json& j, const DatasetStats& s);

std::string render_bar_chart_svg(const std::string& title, const Histogram& histogram);

// Writes class_dist.svg and unit_dist.svg; returns their paths.
std::vector<std::filesystem::path> render_stats_plots(const DatasetStats& stats, const std::filesystem::path& out_dir);

}  // namespace catalog
