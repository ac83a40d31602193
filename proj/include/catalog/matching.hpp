#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "catalog/types.hpp"

namespace catalog {

struct ForeignKeyConfig {
  std::vector<std::string> keys{"catalog_figure_no", "item_index"};

  // Non-empty, and when a schema is given every key must belong to it.
  void validate(std::span<const std::string> schema_keys = {}) const;
};

using KeySet = std::set<std::string>;

// Normalized non-empty values of the configured keys. Unparsed records have none.
KeySet foreign_keys(const AttributeRecord& record, const ForeignKeyConfig& cfg);

// Jaccard overlap |a ∩ b| / |a ∪ b|; 0 when both sets are empty.
double matching_degree(const KeySet& a, const KeySet& b);
double matching_degree(const AttributeRecord& a, const AttributeRecord& b, const ForeignKeyConfig& cfg);

// Indices into the image-record and text-record lists.
struct IndexPair {
  std::size_t image = 0;
  std::size_t text = 0;

  friend auto operator<=>(const IndexPair&, const IndexPair&) = default;
};

// All (image, text) record pairs with matching degree exactly 1, sorted.
std::vector<IndexPair> foreign_key_match(std::span<const AttributeRecord> images,
                                         std::span<const AttributeRecord> texts, const ForeignKeyConfig& cfg);

// One connected component of the complete-match relation with more than one
// record on at least one side.
struct MatchGroup {
  std::vector<std::size_t> images;
  std::vector<std::size_t> texts;
  std::vector<IndexPair> edges;
};

struct Grouping {
  std::vector<IndexPair> one_to_one;
  std::vector<MatchGroup> groups;
};

// Components ordered by their smallest image index.
Grouping group_components(std::span<const IndexPair> fk_matches, std::size_t n_images, std::size_t n_texts);

// Block and page lookup by block id.
class BlockLayout {
 public:
  BlockLayout(std::span<const Block> blocks, std::span<const Page> pages);

  const Block& block(const std::string& id) const;
  const Page& page_of(const std::string& block_id) const;
  bool contains(const std::string& block_id) const { return blocks_.count(block_id) != 0; }

 private:
  std::map<std::string, Block> blocks_;
  std::map<std::string, Page> pages_;
};

// Cost between an image block and a text block: center distance when both sit
// on the same page; otherwise (page gap + 1) x the larger page diagonal, which
// exceeds every same-page distance.
double pair_cost(const Block& image, const Block& text, const BlockLayout& layout);

Eigen::MatrixXd cost_matrix(const MatchGroup& group, std::span<const AttributeRecord> images,
                            std::span<const AttributeRecord> texts, const BlockLayout& layout);

struct ResolvedGroup {
  MatchGroup group;
  std::vector<IndexPair> assignment;
  std::vector<double> costs;
};

ResolvedGroup resolve_group(const MatchGroup& group, std::span<const AttributeRecord> images,
                            std::span<const AttributeRecord> texts, const BlockLayout& layout);

struct MatchOutcome {
  std::vector<MatchPair> pairs;  // sorted by image block id
  std::vector<std::string> unmatched_images;
  std::vector<std::string> unmatched_texts;
};

// Final correspondences: the one-to-one foreign-key pairs plus every group's
// optimal assignment. Records left out of both are reported unmatched.
MatchOutcome combine_matches(const Grouping& grouping, std::span<const ResolvedGroup> resolved,
                             std::span<const AttributeRecord> images, std::span<const AttributeRecord> texts);

struct MatchOptions {
  // With the distance stage off, many-to-many groups stay unresolved.
  bool bipartite_stage = true;
};

MatchOutcome match_records(std::span<const AttributeRecord> images, std::span<const AttributeRecord> texts,
                           const BlockLayout& layout, const ForeignKeyConfig& cfg, const MatchOptions& options = {});

void to_json(json& j, const MatchOutcome& m);

}  // namespace catalog
