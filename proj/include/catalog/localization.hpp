#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

#include "catalog/io.hpp"
#include "catalog/types.hpp"

namespace catalog {

struct DetectionPromptConfig {
  std::string image_prompt;
  std::string text_prompt;
  double score_threshold = 0.35;
  double nms_iou_threshold = 0.5;

  void validate() const;
  const std::string& prompt_for(Modality m) const { return m == Modality::image ? image_prompt : text_prompt; }
};

struct Detection {
  BoundingBox box;
  double score = 0.0;
};

struct DetectionRequest {
  std::string page_id;
  std::filesystem::path image_path;
  std::string prompt;
  Modality modality = Modality::image;
};

// Open-set detector: one prompt per call. Implementations are stateless so a
// request can be replayed on retry, and must be safe to call concurrently.
class DetectorBackend {
 public:
  virtual ~DetectorBackend() = default;
  virtual std::vector<Detection> detect(const DetectionRequest& request) const = 0;
};

// Replays recorded detections from <dir>/<page_id>.json:
//   {"page_id": ..., "image": [{cx,cy,w,h,score}], "text": [...]}
class FixtureDetector final : public DetectorBackend {
 public:
  explicit FixtureDetector(std::filesystem::path dir) : dir_(std::move(dir)) {}
  std::vector<Detection> detect(const DetectionRequest& request) const override;

 private:
  std::filesystem::path dir_;
};

// POST {base_url}/detect with {"image_b64", "prompt"}; expects HTTP 200 and
// {"detections": [{cx,cy,w,h,score}]} in page pixels.
class HttpDetector final : public DetectorBackend {
 public:
  explicit HttpDetector(std::string base_url, std::chrono::seconds timeout = std::chrono::seconds(60));
  std::vector<Detection> detect(const DetectionRequest& request) const override;

 private:
  std::string base_url_;
  std::chrono::seconds timeout_;
};

std::vector<Detection> parse_detections(const json& items);

// Clips to [0,width] x [0,height]. Throws DegenerateBoxError when nothing is left.
BoundingBox clamp_to_page(const BoundingBox& box, const Page& page);

// Greedy NMS: highest score first, drops any later box with iou > threshold
// against a kept one. Equal scores keep input order.
std::vector<Detection> non_max_suppression(std::vector<Detection> detections, double iou_threshold);

struct DetectionOutcome {
  std::vector<Block> blocks;
  std::vector<std::string> warnings;
};

// One backend call per prompt. Blocks come back image-first, each modality in
// reading order (center y, then x), with ids "<page_id>-img-NNN" / "-txt-NNN".
DetectionOutcome detect_blocks(const Page& page, const DetectionPromptConfig& cfg, const DetectorBackend& backend,
                               const RetryPolicy& retry = {});

std::string block_id(const std::string& page_id, Modality m, std::size_t ordinal);

}  // namespace catalog
