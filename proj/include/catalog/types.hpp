#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "catalog/geometry.hpp"

namespace catalog {

using json = nlohmann::ordered_json;

enum class Modality { image, text };

std::string_view to_string(Modality m);
Modality parse_modality(std::string_view s);

struct Page {
  std::string page_id;
  std::string source_file;
  int page_index = 0;
  int width = 0;
  int height = 0;
  std::string image_ref;

  double diagonal() const;
};

struct Block {
  std::string id;
  std::string page_id;
  Modality modality = Modality::image;
  BoundingBox box;
  double confidence = 0.0;
};

enum class ParseStatus { ok, unparsed };

std::string_view to_string(ParseStatus s);
ParseStatus parse_parse_status(std::string_view s);

// Insertion-ordered string map with unique keys.
class Attributes {
 public:
  using value_type = std::pair<std::string, std::string>;

  Attributes() = default;
  Attributes(std::initializer_list<value_type> init);

  // Inserts or overwrites; an overwrite keeps the original position.
  void set(std::string key, std::string value);
  const std::string* find(std::string_view key) const;
  bool contains(std::string_view key) const { return find(key) != nullptr; }
  std::string value_or_empty(std::string_view key) const;

  bool empty() const { return items_.empty(); }
  std::size_t size() const { return items_.size(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

  friend bool operator==(const Attributes&, const Attributes&) = default;

 private:
  std::vector<value_type> items_;
};

struct AttributeRecord {
  std::string block_id;
  Attributes attributes;
  ParseStatus parse_status = ParseStatus::ok;
};

enum class MatchStage { foreign_key, bipartite, human };

std::string_view to_string(MatchStage s);
MatchStage parse_match_stage(std::string_view s);

struct MatchPair {
  std::string image_block_id;
  std::string text_block_id;
  MatchStage stage = MatchStage::foreign_key;
  double cost = 0.0;

  friend bool operator==(const MatchPair&, const MatchPair&) = default;
};

void to_json(json& j, const BoundingBox& b);
void from_json(const json& j, BoundingBox& b);
void to_json(json& j, const Page& p);
void from_json(const json& j, Page& p);
void to_json(json& j, const Block& b);
void from_json(const json& j, Block& b);
void to_json(json& j, const Attributes& a);
void from_json(const json& j, Attributes& a);
void to_json(json& j, const AttributeRecord& r);
void from_json(const json& j, AttributeRecord& r);
void to_json(json& j, const MatchPair& p);
void from_json(const json& j, MatchPair& p);

}  // namespace catalog
