#include "catalog/types.hpp"

#include <algorithm>
#include <cmath>

namespace catalog {

std::string_view to_string(Modality m) { return m == Modality::image ? "image" : "text"; }

Modality parse_modality(std::string_view s) {
  if (s == "image") return Modality::image;
  if (s == "text") return Modality::text;
  throw ValidationError("unknown modality '" + std::string(s) + "'");
}

double Page::diagonal() const { return std::hypot(double(width), double(height)); }

std::string_view to_string(ParseStatus s) { return s == ParseStatus::ok ? "ok" : "unparsed"; }

ParseStatus parse_parse_status(std::string_view s) {
  if (s == "ok") return ParseStatus::ok;
  if (s == "unparsed") return ParseStatus::unparsed;
  throw ValidationError("unknown parse status '" + std::string(s) + "'");
}

std::string_view to_string(MatchStage s) {
  switch (s) {
    case MatchStage::foreign_key:
      return "foreign_key";
    case MatchStage::bipartite:
      return "bipartite";
    case MatchStage::human:
      return "human";
  }
  return "foreign_key";
}

MatchStage parse_match_stage(std::string_view s) {
  if (s == "foreign_key") return MatchStage::foreign_key;
  if (s == "bipartite") return MatchStage::bipartite;
  if (s == "human") return MatchStage::human;
  throw ValidationError("unknown match stage '" + std::string(s) + "'");
}

Attributes::Attributes(std::initializer_list<value_type> init) {
  for (const auto& [k, v] : init) set(k, v);
}

void Attributes::set(std::string key, std::string value) {
  auto it = std::find_if(items_.begin(), items_.end(), [&](const auto& kv) { return kv.first == key; });
  if (it != items_.end()) {
    it->second = std::move(value);
  } else {
    items_.emplace_back(std::move(key), std::move(value));
  }
}

const std::string* Attributes::find(std::string_view key) const {
  auto it = std::find_if(items_.begin(), items_.end(), [&](const auto& kv) { return kv.first == key; });
  return it == items_.end() ? nullptr : &it->second;
}

std::string Attributes::value_or_empty(std::string_view key) const {
  const auto* v = find(key);
  return v ? *v : std::string{};
}

void to_json(json& j, const BoundingBox& b) { j = json{{"x_c", b.x_c}, {"y_c", b.y_c}, {"w", b.w}, {"h", b.h}}; }

void from_json(const json& j, BoundingBox& b) {
  b.x_c = j.at("x_c").get<double>();
  b.y_c = j.at("y_c").get<double>();
  b.w = j.at("w").get<double>();
  b.h = j.at("h").get<double>();
}

void to_json(json& j, const Page& p) {
  j = json{{"page_id", p.page_id},     {"source_file", p.source_file}, {"page_index", p.page_index},
           {"width", p.width},         {"height", p.height},           {"image_ref", p.image_ref}};
}

void from_json(const json& j, Page& p) {
  p.page_id = j.at("page_id").get<std::string>();
  p.source_file = j.value("source_file", std::string{});
  p.page_index = j.at("page_index").get<int>();
  p.width = j.at("width").get<int>();
  p.height = j.at("height").get<int>();
  p.image_ref = j.value("image_ref", std::string{});
}

void to_json(json& j, const Block& b) {
  j = json{{"id", b.id},
           {"page_id", b.page_id},
           {"modality", to_string(b.modality)},
           {"box", b.box},
           {"confidence", b.confidence}};
}

void from_json(const json& j, Block& b) {
  b.id = j.at("id").get<std::string>();
  b.page_id = j.at("page_id").get<std::string>();
  b.modality = parse_modality(j.at("modality").get<std::string>());
  b.box = j.at("box").get<BoundingBox>();
  b.confidence = j.at("confidence").get<double>();
}

void to_json(json& j, const Attributes& a) {
  j = json::object();
  for (const auto& [k, v] : a) j[k] = v;
}

void from_json(const json& j, Attributes& a) {
  a = Attributes{};
  for (const auto& [k, v] : j.items()) a.set(k, v.get<std::string>());
}

void to_json(json& j, const AttributeRecord& r) {
  j = json{{"block_id", r.block_id}, {"parse_status", to_string(r.parse_status)}, {"attributes", r.attributes}};
}

void from_json(const json& j, AttributeRecord& r) {
  r.block_id = j.at("block_id").get<std::string>();
  r.parse_status = parse_parse_status(j.at("parse_status").get<std::string>());
  r.attributes = j.at("attributes").get<Attributes>();
  if (r.parse_status == ParseStatus::unparsed && !r.attributes.empty()) {
    throw ValidationError("record " + r.block_id + " is unparsed but carries attributes");
  }
}

void to_json(json& j, const MatchPair& p) {
  j = json{{"image_block_id", p.image_block_id},
           {"text_block_id", p.text_block_id},
           {"stage", to_string(p.stage)},
           {"cost", p.cost}};
}

void from_json(const json& j, MatchPair& p) {
  p.image_block_id = j.at("image_block_id").get<std::string>();
  p.text_block_id = j.at("text_block_id").get<std::string>();
  p.stage = parse_match_stage(j.at("stage").get<std::string>());
  p.cost = j.at("cost").get<double>();
}

}  // namespace catalog
