#include "catalog/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <mutex>
#include <set>

#include "catalog/review.hpp"

namespace catalog {

namespace fs = std::filesystem;

std::string page_id_for(int page_index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "p%04d", page_index);
  return buf;
}

Manifest load_manifest(const fs::path& path) {
  const json doc = read_json(path);
  Manifest m;
  try {
    m.catalog_name = doc.value("catalog_name", std::string{});
    const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
    for (const auto& p : doc.at("pages")) {
      Page page;
      page.page_index = p.at("page_index").get<int>();
      page.width = p.at("width").get<int>();
      page.height = p.at("height").get<int>();
      const fs::path image = p.at("image").get<std::string>();
      page.image_ref = (image.is_absolute() ? image : fs::absolute(base / image)).lexically_normal().string();
      page.source_file = p.value("source_file", image.string());
      page.page_id = page_id_for(page.page_index);
      if (page.width <= 0 || page.height <= 0)
        throw ValidationError("manifest page " + std::to_string(page.page_index) + " has no area");
      m.pages.push_back(std::move(page));
    }
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  std::sort(m.pages.begin(), m.pages.end(), [](const Page& a, const Page& b) { return a.page_index < b.page_index; });
  for (std::size_t i = 0; i < m.pages.size(); ++i) {
    if (m.pages[i].page_index != int(i)) {
      throw ValidationError(path.string() + ": page_index values must be unique and contiguous from 0");
    }
  }
  return m;
}

json manifest_json(const Manifest& m) {
  json pages = json::array();
  for (const auto& p : m.pages) {
    pages.push_back(json{{"page_index", p.page_index},
                         {"image", p.image_ref},
                         {"width", p.width},
                         {"height", p.height},
                         {"source_file", p.source_file}});
  }
  return json{{"catalog_name", m.catalog_name}, {"pages", pages}};
}

std::vector<Block> load_blocks(const fs::path& path) {
  try {
    return read_json(path).at("blocks").get<std::vector<Block>>();
  } catch (const json::exception& e) {
    throw DecodeError(path.string() + ": " + e.what());
  }
}

RecordSet load_records(const fs::path& path) {
  try {
    const json doc = read_json(path);
    return {doc.at("image").get<std::vector<AttributeRecord>>(), doc.at("text").get<std::vector<AttributeRecord>>()};
  } catch (const json::exception& e) {
    throw DecodeError(path.string() + ": " + e.what());
  }
}

std::vector<CandidatePair> load_matches(const fs::path& path) {
  std::vector<CandidatePair> out;
  try {
    const json doc = read_json(path);
    for (const auto& p : doc.at("pairs")) out.push_back({p.at("id").get<std::string>(), p.get<MatchPair>()});
  } catch (const json::exception& e) {
    throw DecodeError(path.string() + ": " + e.what());
  }
  return out;
}

json matches_json(const std::vector<MatchPair>& pairs) {
  json arr = json::array();
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    char id[24];
    std::snprintf(id, sizeof(id), "pair-%03zu", i);
    json entry{{"id", std::string(id)}};
    const json body = pairs[i];
    for (const auto& [k, v] : body.items()) entry[k] = v;
    arr.push_back(std::move(entry));
  }
  return json{{"pairs", arr}};
}

json unmatched_json(const std::vector<std::string>& images, const std::vector<std::string>& texts) {
  return json{{"images", images}, {"texts", texts}};
}

json HarvestReport::to_json() const {
  json errs = json::array();
  for (const auto& e : errors) {
    errs.push_back(json{{"stage", e.stage}, {"page_id", e.page_id}, {"block_id", e.block_id}, {"message", e.message}});
  }
  return json{{"ok", ok()}, {"n_blocks", n_blocks}, {"n_pairs", n_pairs}, {"errors", errs}, {"warnings", warnings}};
}

HarvestReport harvest(const Manifest& manifest, const RunConfig& cfg, const DetectorBackend& detector,
                      const VlmBackend& vlm, const fs::path& out_dir) {
  cfg.validate();
  const RunFiles files{out_dir};
  std::error_code ec;
  fs::create_directories(files.crops(), ec);
  if (ec) throw IoError("cannot create " + files.crops().string() + ": " + ec.message());

  struct PageResult {
    std::vector<Block> blocks;
    std::map<std::string, fs::path> crops;
    std::vector<StageError> errors;
    std::vector<std::string> warnings;
  };
  std::vector<PageResult> per_page(manifest.pages.size());

  parallel_for(manifest.pages.size(), cfg.parallelism, [&](std::size_t i) {
    const Page& page = manifest.pages[i];
    PageResult& out = per_page[i];
    try {
      auto detected = detect_blocks(page, cfg.detection, detector, cfg.retry);
      out.blocks = std::move(detected.blocks);
      out.warnings = std::move(detected.warnings);
    } catch (const std::exception& e) {
      out.errors.push_back({"localization", page.page_id, "", e.what()});
      return;
    }
    if (out.blocks.empty()) return;
    Image raster;
    try {
      raster = read_png(page.image_ref);
    } catch (const std::exception& e) {
      out.errors.push_back({"crop", page.page_id, "", e.what()});
      return;
    }
    for (const auto& b : out.blocks) {
      try {
        out.crops.emplace(b.id, crop_block(raster, b, files.crops()));
      } catch (const std::exception& e) {
        out.errors.push_back({"crop", page.page_id, b.id, e.what()});
      }
    }
  });

  HarvestReport report;
  std::vector<Block> blocks;
  std::map<std::string, fs::path> crops;
  for (auto& r : per_page) {
    blocks.insert(blocks.end(), r.blocks.begin(), r.blocks.end());
    crops.insert(r.crops.begin(), r.crops.end());
    report.errors.insert(report.errors.end(), r.errors.begin(), r.errors.end());
    report.warnings.insert(report.warnings.end(), r.warnings.begin(), r.warnings.end());
  }

  auto batch = comprehend_all(blocks, crops, cfg.comprehension, vlm, cfg.parallelism, cfg.retry);
  std::map<std::string, std::string> page_of;
  for (const auto& b : blocks) page_of[b.id] = b.page_id;
  for (const auto& f : batch.failures) {
    // A missing crop was already reported by the crop stage.
    if (crops.count(f.block_id)) report.errors.push_back({"comprehension", page_of[f.block_id], f.block_id, f.message});
  }
  report.warnings.insert(report.warnings.end(), batch.warnings.begin(), batch.warnings.end());

  MatchOutcome matched;
  try {
    const BlockLayout layout(blocks, manifest.pages);
    matched = match_records(batch.image_records, batch.text_records, layout, cfg.foreign_keys);
  } catch (const std::exception& e) {
    report.errors.push_back({"matching", "", "", e.what()});
  }

  json records{{"image", batch.image_records}, {"text", batch.text_records}};
  write_json(files.manifest(), manifest_json(manifest));
  write_json(files.blocks(), json{{"blocks", blocks}});
  write_json(files.records(), records);
  write_json(files.matches(), matches_json(matched.pairs));
  write_json(files.unmatched(), unmatched_json(matched.unmatched_images, matched.unmatched_texts));

  report.n_blocks = blocks.size();
  report.n_pairs = matched.pairs.size();
  write_json(files.summary(), report.to_json());
  return report;
}

FinalizeReport finalize(const fs::path& run_dir, const std::optional<fs::path>& decisions_file, const fs::path& out_dir,
                        const RunConfig& cfg) {
  const RunFiles files{run_dir};
  const Manifest manifest = load_manifest(files.manifest());
  const std::vector<Block> blocks = load_blocks(files.blocks());
  const RecordSet records = load_records(files.records());

  ReviewSession session(run_dir.filename().string(), load_matches(files.matches()), blocks, manifest.pages);
  const fs::path decisions_path = decisions_file.value_or(files.decisions());
  if (decisions_file || fs::exists(decisions_path)) {
    std::vector<Decision> decisions;
    try {
      const json doc = read_json(decisions_path);
      for (const auto& d : doc.at("decisions")) decisions.push_back(decision_from_json(d));
    } catch (const json::exception& e) {
      throw DecodeError(decisions_path.string() + ": " + e.what());
    }
    session.replay(decisions);
  }

  const BlockLayout layout(blocks, manifest.pages);
  const std::vector<MatchPair> pairs = session.final_pairs();
  auto emitted = emit_annotations(pairs, records.text, layout, files.crops(), out_dir, cfg.fields);

  FinalizeReport report;
  report.entries = std::move(emitted.entries);
  report.warnings = std::move(emitted.warnings);
  report.stats = compute_stats(report.entries);

  std::size_t class_sum = 0, unit_sum = 0;
  for (const auto& [k, v] : report.stats.class_histogram) class_sum += v;
  for (const auto& [k, v] : report.stats.unit_histogram) unit_sum += v;
  if (class_sum != report.entries.size() || unit_sum != report.entries.size()) {
    throw Error("stats inconsistent with annotations");
  }

  write_json(out_dir / "stats.json", json(report.stats));
  render_stats_plots(report.stats, out_dir);
  write_json(out_dir / "final_unmatched.json", unmatched_json(session.unmatched_images(), session.unmatched_texts()));
  return report;
}

EvalReport evaluate_files(const fs::path& predictions, const fs::path& ground_truth, const EvalConfig& cfg,
                          const std::optional<fs::path>& report_path) {
  const auto preds = read_jsonl(predictions);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (!preds[i].confidence) {
      throw DecodeError(predictions.string() + ": entry " + std::to_string(i + 1) + " has no confidence");
    }
  }
  const auto gt = read_jsonl(ground_truth);
  const EvalReport report = evaluate(preds, gt, cfg);
  if (report_path) write_json(*report_path, json(report));
  return report;
}

DatasetStats stats_for_file(const fs::path& annotations, const fs::path& out_dir) {
  const auto entries = read_jsonl(annotations);
  DatasetStats stats = compute_stats(entries);
  write_json(out_dir / "stats.json", json(stats));
  render_stats_plots(stats, out_dir);
  return stats;
}

}  // namespace catalog
