#include "catalog/localization.hpp"

#include <httplib.h>

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <tuple>

namespace catalog {

namespace fs = std::filesystem;

void DetectionPromptConfig::validate() const {
  if (image_prompt.empty()) throw ValidationError("detector image_prompt must not be empty");
  if (text_prompt.empty()) throw ValidationError("detector text_prompt must not be empty");
  if (!(score_threshold >= 0.0 && score_threshold <= 1.0))
    throw ValidationError("score_threshold must lie in [0,1]");
  if (!(nms_iou_threshold >= 0.0 && nms_iou_threshold <= 1.0))
    throw ValidationError("nms_iou_threshold must lie in [0,1]");
}

std::vector<Detection> parse_detections(const json& items) {
  if (!items.is_array()) throw DecodeError("detections must be an array");
  std::vector<Detection> out;
  out.reserve(items.size());
  for (const auto& d : items) {
    try {
      Detection det;
      det.box = {d.at("cx").get<double>(), d.at("cy").get<double>(), d.at("w").get<double>(),
                 d.at("h").get<double>()};
      det.score = d.at("score").get<double>();
      out.push_back(det);
    } catch (const json::exception& e) {
      throw DecodeError(std::string("malformed detection entry: ") + e.what());
    }
  }
  return out;
}

std::vector<Detection> FixtureDetector::detect(const DetectionRequest& request) const {
  const fs::path file = dir_ / (request.page_id + ".json");
  if (!fs::exists(file)) throw IoError("no detector fixture for page " + request.page_id + " at " + file.string());
  const json doc = read_json(file);
  const char* key = request.modality == Modality::image ? "image" : "text";
  if (!doc.is_object()) throw DecodeError(file.string() + ": fixture must be an object");
  if (!doc.contains(key)) return {};
  return parse_detections(doc.at(key));
}

HttpDetector::HttpDetector(std::string base_url, std::chrono::seconds timeout)
    : base_url_(std::move(base_url)), timeout_(timeout) {}

std::vector<Detection> HttpDetector::detect(const DetectionRequest& request) const {
  const json body{{"image_b64", base64_encode(read_file(request.image_path))}, {"prompt", request.prompt}};
  httplib::Client client(base_url_);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  const auto res = client.Post("/detect", body.dump(), "application/json");
  if (!res) {
    throw TransportError("detector " + base_url_ + " unreachable for page " + request.page_id + ": " +
                         httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw TransportError("detector returned HTTP " + std::to_string(res->status) + " for page " + request.page_id);
  }
  json reply;
  try {
    reply = json::parse(res->body);
  } catch (const json::parse_error& e) {
    throw DecodeError("detector reply for page " + request.page_id + " is not JSON: " + e.what());
  }
  if (!reply.is_object() || !reply.contains("detections"))
    throw DecodeError("detector reply for page " + request.page_id + " lacks 'detections'");
  return parse_detections(reply.at("detections"));
}

BoundingBox clamp_to_page(const BoundingBox& box, const Page& page) {
  if (page.width <= 0 || page.height <= 0) throw ValidationError("page " + page.page_id + " has no area");
  validate_box(box);
  const Corners page_rect{0.0, 0.0, double(page.width), double(page.height)};
  const Corners clipped = intersect(box.corners(), page_rect);
  if (clipped.empty()) {
    throw DegenerateBoxError("box (" + std::to_string(box.x_c) + ", " + std::to_string(box.y_c) + ", " +
                             std::to_string(box.w) + ", " + std::to_string(box.h) + ") lies outside page " +
                             page.page_id);
  }
  if (clipped.x0 == box.corners().x0 && clipped.x1 == box.corners().x1 && clipped.y0 == box.corners().y0 &&
      clipped.y1 == box.corners().y1) {
    return box;
  }
  return BoundingBox::from_corners(clipped);
}

std::vector<Detection> non_max_suppression(std::vector<Detection> detections, double iou_threshold) {
  std::stable_sort(detections.begin(), detections.end(),
                   [](const Detection& a, const Detection& b) { return a.score > b.score; });
  std::vector<Detection> kept;
  for (const auto& d : detections) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(),
                                        [&](const Detection& k) { return iou(k.box, d.box) > iou_threshold; });
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

std::string block_id(const std::string& page_id, Modality m, std::size_t ordinal) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%03zu", ordinal);
  return page_id + (m == Modality::image ? "-img-" : "-txt-") + buf;
}

DetectionOutcome detect_blocks(const Page& page, const DetectionPromptConfig& cfg, const DetectorBackend& backend,
                               const RetryPolicy& retry) {
  cfg.validate();
  DetectionOutcome out;
  for (const Modality modality : {Modality::image, Modality::text}) {
    const DetectionRequest request{page.page_id, page.image_ref, cfg.prompt_for(modality), modality};
    const auto raw = with_retries(retry, [&] { return backend.detect(request); });

    std::vector<Detection> candidates;
    for (const auto& d : raw) {
      if (!(d.score >= cfg.score_threshold)) continue;
      if (!d.box.valid()) {
        out.warnings.push_back("page " + page.page_id + ": dropped invalid " + std::string(to_string(modality)) +
                               " box");
        continue;
      }
      try {
        candidates.push_back({clamp_to_page(d.box, page), std::min(std::max(d.score, 0.0), 1.0)});
      } catch (const DegenerateBoxError& e) {
        out.warnings.push_back(e.what());
      }
    }

    auto kept = non_max_suppression(std::move(candidates), cfg.nms_iou_threshold);
    std::stable_sort(kept.begin(), kept.end(), [](const Detection& a, const Detection& b) {
      return std::tie(a.box.y_c, a.box.x_c, a.box.h, a.box.w) < std::tie(b.box.y_c, b.box.x_c, b.box.h, b.box.w);
    });
    for (std::size_t k = 0; k < kept.size(); ++k) {
      out.blocks.push_back({block_id(page.page_id, modality, k), page.page_id, modality, kept[k].box, kept[k].score});
    }
  }
  return out;
}

}  // namespace catalog
