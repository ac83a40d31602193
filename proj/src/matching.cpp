#include "catalog/matching.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "catalog/assignment.hpp"
#include "catalog/text.hpp"

namespace catalog {

namespace {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  // Smaller root wins so the representative is the lowest member.
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent_[b] = a;
  }

 private:
  std::vector<std::size_t> parent_;
};

}  // namespace

void ForeignKeyConfig::validate(std::span<const std::string> schema_keys) const {
  if (keys.empty()) throw ValidationError("foreign key set must not be empty");
  if (schema_keys.empty()) return;
  for (const auto& k : keys) {
    if (std::find(schema_keys.begin(), schema_keys.end(), k) == schema_keys.end()) {
      throw ValidationError("foreign key '" + k + "' is not part of the comprehension schema");
    }
  }
}

KeySet foreign_keys(const AttributeRecord& record, const ForeignKeyConfig& cfg) {
  KeySet out;
  if (record.parse_status != ParseStatus::ok) return out;
  for (const auto& key : cfg.keys) {
    const auto* value = record.attributes.find(key);
    if (!value) continue;
    std::string v = normalize_value(*value);
    if (!v.empty()) out.insert(std::move(v));
  }
  return out;
}

double matching_degree(const KeySet& a, const KeySet& b) {
  std::size_t common = 0;
  for (const auto& v : a) common += b.count(v);
  const std::size_t united = a.size() + b.size() - common;
  if (united == 0) return 0.0;
  return double(common) / double(united);
}

double matching_degree(const AttributeRecord& a, const AttributeRecord& b, const ForeignKeyConfig& cfg) {
  return matching_degree(foreign_keys(a, cfg), foreign_keys(b, cfg));
}

std::vector<IndexPair> foreign_key_match(std::span<const AttributeRecord> images,
                                         std::span<const AttributeRecord> texts, const ForeignKeyConfig& cfg) {
  std::vector<KeySet> text_keys;
  text_keys.reserve(texts.size());
  for (const auto& t : texts) text_keys.push_back(foreign_keys(t, cfg));

  std::vector<IndexPair> out;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const KeySet fk = foreign_keys(images[i], cfg);
    if (fk.empty()) continue;
    for (std::size_t j = 0; j < texts.size(); ++j) {
      if (matching_degree(fk, text_keys[j]) == 1.0) out.push_back({i, j});
    }
  }
  return out;
}

Grouping group_components(std::span<const IndexPair> fk_matches, std::size_t n_images, std::size_t n_texts) {
  // Images occupy [0, n_images), texts follow.
  DisjointSets sets(n_images + n_texts);
  for (const auto& e : fk_matches) sets.unite(e.image, n_images + e.text);

  std::map<std::size_t, MatchGroup> components;
  for (const auto& e : fk_matches) {
    auto& g = components[sets.find(e.image)];
    g.edges.push_back(e);
    g.images.push_back(e.image);
    g.texts.push_back(e.text);
  }

  Grouping out;
  for (auto& [root, g] : components) {
    std::sort(g.images.begin(), g.images.end());
    g.images.erase(std::unique(g.images.begin(), g.images.end()), g.images.end());
    std::sort(g.texts.begin(), g.texts.end());
    g.texts.erase(std::unique(g.texts.begin(), g.texts.end()), g.texts.end());
    std::sort(g.edges.begin(), g.edges.end());
    if (g.images.size() == 1 && g.texts.size() == 1) {
      out.one_to_one.push_back(g.edges.front());
    } else {
      out.groups.push_back(std::move(g));
    }
  }
  std::sort(out.one_to_one.begin(), out.one_to_one.end());
  return out;
}

BlockLayout::BlockLayout(std::span<const Block> blocks, std::span<const Page> pages) {
  for (const auto& p : pages) pages_.emplace(p.page_id, p);
  for (const auto& b : blocks) {
    if (!pages_.count(b.page_id)) throw ValidationError("block " + b.id + " references unknown page " + b.page_id);
    if (!blocks_.emplace(b.id, b).second) throw ValidationError("duplicate block id " + b.id);
  }
}

const Block& BlockLayout::block(const std::string& id) const {
  auto it = blocks_.find(id);
  if (it == blocks_.end()) throw ValidationError("unknown block id " + id);
  return it->second;
}

const Page& BlockLayout::page_of(const std::string& block_id) const { return pages_.at(block(block_id).page_id); }

double pair_cost(const Block& image, const Block& text, const BlockLayout& layout) {
  if (image.page_id == text.page_id) return center_distance(image.box, text.box);
  const Page& a = layout.page_of(image.id);
  const Page& b = layout.page_of(text.id);
  const double gap = std::abs(double(a.page_index) - double(b.page_index));
  return (gap + 1.0) * std::max(a.diagonal(), b.diagonal());
}

Eigen::MatrixXd cost_matrix(const MatchGroup& group, std::span<const AttributeRecord> images,
                            std::span<const AttributeRecord> texts, const BlockLayout& layout) {
  Eigen::MatrixXd d(Eigen::Index(group.images.size()), Eigen::Index(group.texts.size()));
  for (std::size_t i = 0; i < group.images.size(); ++i) {
    const Block& img = layout.block(images[group.images[i]].block_id);
    for (std::size_t j = 0; j < group.texts.size(); ++j) {
      d(Eigen::Index(i), Eigen::Index(j)) = pair_cost(img, layout.block(texts[group.texts[j]].block_id), layout);
    }
  }
  return d;
}

ResolvedGroup resolve_group(const MatchGroup& group, std::span<const AttributeRecord> images,
                            std::span<const AttributeRecord> texts, const BlockLayout& layout) {
  ResolvedGroup out{group, {}, {}};
  const Eigen::MatrixXd d = cost_matrix(group, images, texts, layout);
  const auto assignment = solve_assignment(d);
  for (const auto& [r, c] : assignment.pairs) {
    out.assignment.push_back({group.images[std::size_t(r)], group.texts[std::size_t(c)]});
    out.costs.push_back(d(r, c));
  }
  return out;
}

MatchOutcome combine_matches(const Grouping& grouping, std::span<const ResolvedGroup> resolved,
                             std::span<const AttributeRecord> images, std::span<const AttributeRecord> texts) {
  MatchOutcome out;
  std::vector<char> image_used(images.size(), 0), text_used(texts.size(), 0);
  auto add = [&](const IndexPair& p, MatchStage stage, double cost) {
    if (image_used[p.image] || text_used[p.text]) {
      throw ValidationError("block matched twice: " + images[p.image].block_id + " / " + texts[p.text].block_id);
    }
    image_used[p.image] = text_used[p.text] = 1;
    out.pairs.push_back({images[p.image].block_id, texts[p.text].block_id, stage, cost});
  };

  for (const auto& p : grouping.one_to_one) add(p, MatchStage::foreign_key, 0.0);
  for (const auto& g : resolved) {
    for (std::size_t k = 0; k < g.assignment.size(); ++k) add(g.assignment[k], MatchStage::bipartite, g.costs[k]);
  }

  std::sort(out.pairs.begin(), out.pairs.end(),
            [](const MatchPair& a, const MatchPair& b) { return a.image_block_id < b.image_block_id; });
  for (std::size_t i = 0; i < images.size(); ++i)
    if (!image_used[i]) out.unmatched_images.push_back(images[i].block_id);
  for (std::size_t j = 0; j < texts.size(); ++j)
    if (!text_used[j]) out.unmatched_texts.push_back(texts[j].block_id);
  std::sort(out.unmatched_images.begin(), out.unmatched_images.end());
  std::sort(out.unmatched_texts.begin(), out.unmatched_texts.end());
  return out;
}

MatchOutcome match_records(std::span<const AttributeRecord> images, std::span<const AttributeRecord> texts,
                           const BlockLayout& layout, const ForeignKeyConfig& cfg, const MatchOptions& options) {
  cfg.validate();
  const auto fk = foreign_key_match(images, texts, cfg);
  const Grouping grouping = group_components(fk, images.size(), texts.size());
  std::vector<ResolvedGroup> resolved;
  if (options.bipartite_stage) {
    for (const auto& g : grouping.groups) resolved.push_back(resolve_group(g, images, texts, layout));
  }
  return combine_matches(grouping, resolved, images, texts);
}

void to_json(json& j, const MatchOutcome& m) {
  j = json{{"pairs", m.pairs},
           {"unmatched", json{{"images", m.unmatched_images}, {"texts", m.unmatched_texts}}}};
}

}  // namespace catalog
