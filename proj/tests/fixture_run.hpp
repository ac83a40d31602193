#pragma once

#include <filesystem>

#include "catalog/pipeline.hpp"

namespace catalog::testing {

inline std::filesystem::path fixture_root() { return CATALOG_FIXTURE_DIR; }

inline RunConfig fixture_config() { return load_config(fixture_root() / "config.toml"); }

// Harvests the three recorded fixture pages into run_dir.
inline HarvestReport harvest_fixture(const std::filesystem::path& run_dir) {
  const auto root = fixture_root();
  const FixtureDetector detector(root / "detections");
  const FixtureVlm vlm(root / "replies.json");
  return harvest(load_manifest(root / "manifest.json"), fixture_config(), detector, vlm, run_dir);
}

}  // namespace catalog::testing
