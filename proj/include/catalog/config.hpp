#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>

#include "catalog/annotation.hpp"
#include "catalog/comprehension.hpp"
#include "catalog/evaluation.hpp"
#include "catalog/io.hpp"
#include "catalog/localization.hpp"
#include "catalog/matching.hpp"

namespace catalog {

// Parses the TOML subset used for run configs into a JSON object tree:
// [table] and [dotted.table] headers, bare or quoted keys, basic and literal
// strings, integers, floats, booleans and (multi-line) arrays of those.
json parse_toml(std::string_view text);

struct BackendConfig {
  std::string kind = "http";  // "http" or "fixture"
  std::string url;
  int timeout_seconds = 60;
};

struct RunConfig {
  DetectionPromptConfig detection{"archaeological artifact drawing or photograph",
                                  "caption or annotation text block"};
  BackendConfig detector;
  ComprehensionPromptConfig comprehension;
  BackendConfig vlm;
  std::size_t parallelism = 4;
  ForeignKeyConfig foreign_keys;
  AnnotationFields fields;
  EvalConfig eval;
  RetryPolicy retry;

  void validate() const;
};

RunConfig config_from_toml(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace catalog
