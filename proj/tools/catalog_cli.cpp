// Command-line entry point: harvest, finalize, eval, stats, serve-review.
// Exit codes: 0 ok, 1 run errors, 2 usage errors.

#include <CLI11.hpp>

#include <csignal>
#include <iostream>
#include <memory>
#include <optional>

#include "catalog/config.hpp"
#include "catalog/pipeline.hpp"
#include "catalog/review.hpp"

namespace fs = std::filesystem;
using namespace catalog;

namespace {

constexpr int kOk = 0;
constexpr int kRunError = 1;
constexpr int kUsageError = 2;

ReviewServer* g_server = nullptr;

void handle_signal(int) {
  if (g_server) g_server->stop();
}

RunConfig config_or_default(const std::string& path) { return path.empty() ? RunConfig{} : load_config(path); }

void print_error(const std::string& stage, const std::string& message) {
  std::cerr << json{{"ok", false}, {"errors", json::array({json{{"stage", stage}, {"message", message}}})}}.dump()
            << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Collect matched image/caption datasets from catalog page images"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "Run config (TOML)")->check(CLI::ExistingFile);

  auto* harvest_cmd = app.add_subcommand("harvest", "Detect, comprehend and match blocks on every page");
  std::string manifest_path, out_dir, fixtures_dir;
  harvest_cmd->add_option("manifest,--manifest", manifest_path, "Page manifest (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  harvest_cmd->add_option("--out", out_dir, "Run directory to write")->required();
  harvest_cmd->add_option("--fixtures", fixtures_dir, "Replay recorded backend replies from this directory")
      ->check(CLI::ExistingDirectory);

  auto* finalize_cmd = app.add_subcommand("finalize", "Apply review decisions and emit annotations");
  std::string run_dir, decisions_path, finalize_out;
  finalize_cmd->add_option("run,--run", run_dir, "Run directory from harvest")->required()->check(CLI::ExistingDirectory);
  finalize_cmd->add_option("--decisions", decisions_path, "Decision overlay (default: <run>/decisions.json)")
      ->check(CLI::ExistingFile);
  finalize_cmd->add_option("--out", finalize_out, "Output directory (default: the run directory)");

  auto* eval_cmd = app.add_subcommand("eval", "Score predicted annotations against ground truth");
  std::string pred_path, gt_path, report_path;
  std::optional<double> iou_override;
  bool no_attr = false;
  eval_cmd->add_option("--pred", pred_path, "Predicted annotations (JSONL, with confidence)")
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--gt", gt_path, "Ground-truth annotations (JSONL)")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--out", report_path, "Report path (default: eval_report.json next to --pred)");
  eval_cmd->add_option("--iou", iou_override, "IoU threshold override");
  eval_cmd->add_flag("--no-attribute-match", no_attr, "Score boxes only");

  auto* stats_cmd = app.add_subcommand("stats", "Histograms and charts for an annotation file");
  std::string stats_input, stats_out;
  stats_cmd->add_option("annotations,--annotations", stats_input, "annotations.jsonl")
      ->required()
      ->check(CLI::ExistingFile);
  stats_cmd->add_option("--out", stats_out, "Output directory")->required();

  auto* serve_cmd = app.add_subcommand("serve-review", "Serve the review API for a run directory");
  std::string serve_run, bind_address = "127.0.0.1:8080", ui_dir;
  serve_cmd->add_option("run,--run", serve_run, "Run directory")->required()->check(CLI::ExistingDirectory);
  serve_cmd->add_option("--bind", bind_address, "host:port")->capture_default_str();
  serve_cmd->add_option("--ui", ui_dir, "Static review UI bundle to serve at /");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsageError;
  }

  try {
    if (*harvest_cmd) {
      const RunConfig cfg = config_or_default(config_path);
      const Manifest manifest = load_manifest(manifest_path);

      std::unique_ptr<DetectorBackend> detector;
      std::unique_ptr<VlmBackend> vlm;
      if (!fixtures_dir.empty() || cfg.detector.kind == "fixture") {
        detector = std::make_unique<FixtureDetector>(fs::path(fixtures_dir) / "detections");
      } else {
        detector = std::make_unique<HttpDetector>(cfg.detector.url, std::chrono::seconds(cfg.detector.timeout_seconds));
      }
      if (!fixtures_dir.empty() || cfg.vlm.kind == "fixture") {
        vlm = std::make_unique<FixtureVlm>(fs::path(fixtures_dir) / "replies.json");
      } else {
        vlm = std::make_unique<HttpVlm>(cfg.vlm.url, std::chrono::seconds(cfg.vlm.timeout_seconds));
      }

      const HarvestReport report = harvest(manifest, cfg, *detector, *vlm, out_dir);
      if (!report.ok()) {
        std::cerr << report.to_json().dump() << "\n";
        return kRunError;
      }
      std::cout << "harvested " << report.n_blocks << " blocks, " << report.n_pairs << " candidate pairs into "
                << out_dir << "\n";
      return kOk;
    }

    if (*finalize_cmd) {
      const RunConfig cfg = config_or_default(config_path);
      const fs::path out = finalize_out.empty() ? fs::path(run_dir) : fs::path(finalize_out);
      std::optional<fs::path> decisions;
      if (!decisions_path.empty()) decisions = decisions_path;
      const FinalizeReport report = finalize(run_dir, decisions, out, cfg);
      for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
      std::cout << "wrote " << report.entries.size() << " annotations (" << report.stats.n_classes << " classes, "
                << report.stats.n_units << " units) to " << out << "\n";
      return kOk;
    }

    if (*eval_cmd) {
      RunConfig cfg = config_or_default(config_path);
      if (iou_override) cfg.eval.iou_threshold = *iou_override;
      if (no_attr) cfg.eval.require_attribute_match = false;
      const fs::path report = report_path.empty() ? fs::path(pred_path).parent_path() / "eval_report.json"
                                                  : fs::path(report_path);
      const EvalReport r = evaluate_files(pred_path, gt_path, cfg.eval, report);
      std::cout << json(r).dump() << "\n";
      return kOk;
    }

    if (*stats_cmd) {
      const DatasetStats s = stats_for_file(stats_input, stats_out);
      std::cout << json(s).dump() << "\n";
      return kOk;
    }

    if (*serve_cmd) {
      const auto colon = bind_address.rfind(':');
      if (colon == std::string::npos) {
        std::cerr << "--bind expects host:port\n";
        return kUsageError;
      }
      const std::string host = bind_address.substr(0, colon);
      const int port = std::stoi(bind_address.substr(colon + 1));
      std::optional<fs::path> ui;
      if (!ui_dir.empty()) ui = ui_dir;
      ReviewServer server(serve_run, ui);
      const int bound = server.bind(host, port);
      g_server = &server;
      std::signal(SIGINT, handle_signal);
      std::signal(SIGTERM, handle_signal);
      std::cout << "review API on http://" << host << ":" << bound << "/api/session\n" << std::flush;
      server.run();
      g_server = nullptr;
      return kOk;
    }
  } catch (const ValidationError& e) {
    print_error("validation", e.what());
    return kRunError;
  } catch (const std::exception& e) {
    print_error("run", e.what());
    return kRunError;
  }
  return kUsageError;
}
