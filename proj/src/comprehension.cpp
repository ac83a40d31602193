#include "catalog/comprehension.hpp"

#include <httplib.h>

#include <algorithm>
#include <set>

#include "catalog/text.hpp"

namespace catalog {

namespace fs = std::filesystem;

namespace {

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

}  // namespace

void ComprehensionPromptConfig::validate() const {
  if (schema_keys.empty()) throw ValidationError("comprehension schema_keys must not be empty");
  std::set<std::string> seen;
  for (const auto& k : schema_keys) {
    if (k.empty()) throw ValidationError("comprehension schema key must not be empty");
    if (!seen.insert(k).second) throw ValidationError("duplicate schema key '" + k + "'");
  }
  if (max_retries < 0) throw ValidationError("max_retries must be >= 0");
}

std::string ComprehensionPromptConfig::render(Modality modality) const {
  std::string keys;
  for (const auto& k : schema_keys) {
    if (!keys.empty()) keys += ", ";
    keys += k;
  }
  std::string out = template_text;
  replace_all(out, "{modality}", to_string(modality));
  replace_all(out, "{schema_keys}", keys);
  return out;
}

FixtureVlm::FixtureVlm(const fs::path& replies_file) {
  const json doc = read_json(replies_file);
  if (!doc.is_object()) throw DecodeError(replies_file.string() + ": expected an object of block id -> reply");
  for (const auto& [id, reply] : doc.items()) {
    replies_[id] = reply.is_string() ? reply.get<std::string>() : reply.dump();
  }
}

std::string FixtureVlm::complete(const VlmRequest& request) const {
  auto it = replies_.find(request.block_id);
  if (it == replies_.end()) throw IoError("no recorded reply for block " + request.block_id);
  return it->second;
}

HttpVlm::HttpVlm(std::string base_url, std::chrono::seconds timeout)
    : base_url_(std::move(base_url)), timeout_(timeout) {}

std::string HttpVlm::complete(const VlmRequest& request) const {
  const json body{{"image_b64", base64_encode(read_file(request.crop_path))}, {"prompt", request.prompt}};
  httplib::Client client(base_url_);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  const auto res = client.Post("/comprehend", body.dump(), "application/json");
  if (!res) {
    throw TransportError("VLM " + base_url_ + " unreachable for block " + request.block_id + ": " +
                         httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw TransportError("VLM returned HTTP " + std::to_string(res->status) + " for block " + request.block_id);
  }
  try {
    const json reply = json::parse(res->body);
    return reply.at("text").get<std::string>();
  } catch (const json::exception& e) {
    throw DecodeError("VLM reply for block " + request.block_id + " lacks a 'text' string: " + e.what());
  }
}

std::string crop_file_name(const Block& block) { return block.page_id + "_" + block.id + ".png"; }

fs::path crop_block(const Image& page_image, const Block& block, const fs::path& crops_dir) {
  const PixelRect rect = outward_pixel_rect(block.box, page_image.width, page_image.height);
  if (rect.width() <= 0 || rect.height() <= 0) {
    throw ValidationError("block " + block.id + " has no pixels inside its page raster");
  }
  std::error_code ec;
  fs::create_directories(crops_dir, ec);
  if (ec) throw IoError("cannot create " + crops_dir.string() + ": " + ec.message());
  const fs::path out = crops_dir / crop_file_name(block);
  write_png(crop(page_image, rect), out);
  return out;
}

fs::path crop_block(const Page& page, const Block& block, const fs::path& crops_dir) {
  return crop_block(read_png(page.image_ref), block, crops_dir);
}

std::optional<Attributes> parse_reply(std::string_view reply) {
  const auto open = reply.find('{');
  const auto close = reply.rfind('}');
  if (open == std::string_view::npos || close == std::string_view::npos || close < open) return std::nullopt;

  json doc;
  try {
    doc = json::parse(reply.substr(open, close - open + 1));
  } catch (const json::parse_error&) {
    return std::nullopt;
  }
  if (!doc.is_object()) return std::nullopt;

  Attributes attrs;
  for (const auto& [key, value] : doc.items()) {
    std::string text;
    if (value.is_string()) {
      text = value.get<std::string>();
    } else if (value.is_null()) {
      text.clear();
    } else if (value.is_primitive()) {
      text = value.dump();
    } else {
      return std::nullopt;
    }
    attrs.set(normalize_value(key), normalize_value(text));
  }
  return attrs;
}

ComprehensionResult comprehend_block(const Block& block, const fs::path& crop, const ComprehensionPromptConfig& cfg,
                                     const VlmBackend& backend, const RetryPolicy& retry) {
  cfg.validate();
  ComprehensionResult result;
  result.record.block_id = block.id;

  VlmRequest request{block.id, crop, cfg.render(block.modality)};
  std::optional<Attributes> parsed;
  for (int attempt = 0; attempt <= cfg.max_retries && !parsed; ++attempt) {
    if (attempt == 1) request.prompt += kJsonOnlySuffix;
    const std::string reply = with_retries(retry, [&] { return backend.complete(request); });
    parsed = parse_reply(reply);
  }

  if (!parsed) {
    result.record.parse_status = ParseStatus::unparsed;
    result.warnings.push_back("block " + block.id + ": reply is not a flat JSON object after " +
                              std::to_string(cfg.max_retries + 1) + " attempt(s)");
    return result;
  }

  // Schema keys first in configured order, then any extras in reply order.
  Attributes ordered;
  for (const auto& key : cfg.schema_keys) {
    if (const auto* v = parsed->find(key)) {
      ordered.set(key, *v);
    } else {
      ordered.set(key, "");
      result.warnings.push_back("block " + block.id + ": missing key '" + key + "'");
    }
  }
  for (const auto& [key, value] : *parsed) {
    if (ordered.contains(key)) continue;
    ordered.set(key, value);
    result.warnings.push_back("block " + block.id + ": extra key '" + key + "' retained");
  }
  result.record.attributes = std::move(ordered);
  result.record.parse_status = ParseStatus::ok;
  return result;
}

ComprehensionBatch comprehend_all(const std::vector<Block>& blocks, const std::map<std::string, fs::path>& crops,
                                  const ComprehensionPromptConfig& cfg, const VlmBackend& backend,
                                  std::size_t parallelism, const RetryPolicy& retry) {
  cfg.validate();
  std::vector<const Block*> ordered;
  ordered.reserve(blocks.size());
  for (const auto& b : blocks) ordered.push_back(&b);
  std::stable_sort(ordered.begin(), ordered.end(), [](const Block* a, const Block* b) { return a->id < b->id; });

  struct Slot {
    ComprehensionResult result;
    std::optional<std::string> failure;
  };
  std::vector<Slot> slots(ordered.size());

  parallel_for(ordered.size(), parallelism, [&](std::size_t i) {
    const Block& block = *ordered[i];
    Slot& slot = slots[i];
    slot.result.record = {block.id, {}, ParseStatus::unparsed};
    try {
      auto it = crops.find(block.id);
      if (it == crops.end()) throw IoError("no crop available for block " + block.id);
      slot.result = comprehend_block(block, it->second, cfg, backend, retry);
    } catch (const std::exception& e) {
      slot.failure = e.what();
    }
  });

  ComprehensionBatch batch;
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    auto& slot = slots[i];
    if (slot.failure) batch.failures.push_back({ordered[i]->id, *slot.failure});
    batch.warnings.insert(batch.warnings.end(), slot.result.warnings.begin(), slot.result.warnings.end());
    auto& dest = ordered[i]->modality == Modality::image ? batch.image_records : batch.text_records;
    dest.push_back(std::move(slot.result.record));
  }
  return batch;
}

}  // namespace catalog
