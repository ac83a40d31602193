#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "catalog/annotation.hpp"
#include "catalog/comprehension.hpp"
#include "catalog/config.hpp"
#include "catalog/evaluation.hpp"
#include "catalog/localization.hpp"
#include "catalog/matching.hpp"

namespace catalog {

// manifest.json: {"catalog_name", "pages": [{"page_index", "image", "width", "height"}]}.
// page_index values must be unique and contiguous from 0; image paths are
// resolved against the manifest's directory.
struct Manifest {
  std::string catalog_name;
  std::vector<Page> pages;  // ordered by page_index
};

std::string page_id_for(int page_index);
Manifest load_manifest(const std::filesystem::path& path);
json manifest_json(const Manifest& m);

// Artifact files inside a run directory.
struct RunFiles {
  std::filesystem::path dir;

  std::filesystem::path manifest() const { return dir / "manifest.json"; }
  std::filesystem::path blocks() const { return dir / "blocks.json"; }
  std::filesystem::path records() const { return dir / "records.json"; }
  std::filesystem::path matches() const { return dir / "matches.json"; }
  std::filesystem::path unmatched() const { return dir / "unmatched.json"; }
  std::filesystem::path decisions() const { return dir / "decisions.json"; }
  std::filesystem::path summary() const { return dir / "run_summary.json"; }
  std::filesystem::path crops() const { return dir / "crops"; }
};

struct RecordSet {
  std::vector<AttributeRecord> image;
  std::vector<AttributeRecord> text;
};

// A candidate pair as stored in matches.json.
struct CandidatePair {
  std::string id;
  MatchPair pair;
};

std::vector<Block> load_blocks(const std::filesystem::path& path);
RecordSet load_records(const std::filesystem::path& path);
std::vector<CandidatePair> load_matches(const std::filesystem::path& path);
json matches_json(const std::vector<MatchPair>& pairs);
json unmatched_json(const std::vector<std::string>& images, const std::vector<std::string>& texts);

struct StageError {
  std::string stage;  // localization | crop | comprehension | matching
  std::string page_id;
  std::string block_id;
  std::string message;
};

struct HarvestReport {
  std::vector<StageError> errors;
  std::vector<std::string> warnings;
  std::size_t n_blocks = 0;
  std::size_t n_pairs = 0;

  bool ok() const { return errors.empty(); }
  json to_json() const;
};

// localization -> crops -> comprehension -> matching. Per-page failures are
// recorded and the run continues with the remaining pages.
HarvestReport harvest(const Manifest& manifest, const RunConfig& cfg, const DetectorBackend& detector,
                      const VlmBackend& vlm, const std::filesystem::path& out_dir);

struct FinalizeReport {
  std::vector<AnnotationEntry> entries;
  DatasetStats stats;
  std::vector<std::string> warnings;
};

// Overlays review decisions (decisions_file, or <run_dir>/decisions.json when
// present) on matches.json and emits annotations, stats and charts into out_dir.
FinalizeReport finalize(const std::filesystem::path& run_dir, const std::optional<std::filesystem::path>& decisions_file,
                        const std::filesystem::path& out_dir, const RunConfig& cfg);

// Predictions must carry a confidence; writes eval_report.json when report_path is set.
EvalReport evaluate_files(const std::filesystem::path& predictions, const std::filesystem::path& ground_truth,
                          const EvalConfig& cfg, const std::optional<std::filesystem::path>& report_path);

DatasetStats stats_for_file(const std::filesystem::path& annotations, const std::filesystem::path& out_dir);

}  // namespace catalog
