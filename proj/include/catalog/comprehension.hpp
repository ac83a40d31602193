#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "catalog/image.hpp"
#include "catalog/io.hpp"
#include "catalog/types.hpp"

namespace catalog {

struct ComprehensionPromptConfig {
  std::string template_text =
      "You are reading one {modality} block cropped from an archaeological catalog page. "
      "Answer with a single flat JSON object whose keys are exactly: {schema_keys}. "
      "Use an empty string for any value you cannot read.";
  std::vector<std::string> schema_keys{"catalog_figure_no", "item_index", "excavation_unit", "morphological_class"};
  int max_retries = 3;

  void validate() const;
  std::string render(Modality modality) const;
};

inline constexpr std::string_view kJsonOnlySuffix = "\nReply with JSON only.";

struct VlmRequest {
  std::string block_id;
  std::filesystem::path crop_path;
  std::string prompt;
};

// Vision-language model returning its raw text answer. Stateless and safe to
// call concurrently.
class VlmBackend {
 public:
  virtual ~VlmBackend() = default;
  virtual std::string complete(const VlmRequest& request) const = 0;
};

// Replays recorded replies from a JSON object mapping block id -> raw reply.
class FixtureVlm final : public VlmBackend {
 public:
  explicit FixtureVlm(const std::filesystem::path& replies_file);
  explicit FixtureVlm(std::map<std::string, std::string> replies) : replies_(std::move(replies)) {}
  std::string complete(const VlmRequest& request) const override;

 private:
  std::map<std::string, std::string> replies_;
};

// POST {base_url}/comprehend with {"image_b64", "prompt"}; expects {"text"}.
class HttpVlm final : public VlmBackend {
 public:
  explicit HttpVlm(std::string base_url, std::chrono::seconds timeout = std::chrono::seconds(120));
  std::string complete(const VlmRequest& request) const override;

 private:
  std::string base_url_;
  std::chrono::seconds timeout_;
};

std::string crop_file_name(const Block& block);

// Writes the outward-rounded crop to crops_dir/<page_id>_<block_id>.png.
std::filesystem::path crop_block(const Image& page_image, const Block& block, const std::filesystem::path& crops_dir);
std::filesystem::path crop_block(const Page& page, const Block& block, const std::filesystem::path& crops_dir);

// Extracts a flat string map from a model reply. Tolerates code fences and
// prose around one JSON object; nested values are rejected.
std::optional<Attributes> parse_reply(std::string_view reply);

struct ComprehensionResult {
  AttributeRecord record;
  std::vector<std::string> warnings;
};

ComprehensionResult comprehend_block(const Block& block, const std::filesystem::path& crop,
                                     const ComprehensionPromptConfig& cfg, const VlmBackend& backend,
                                     const RetryPolicy& retry = {});

struct BlockFailure {
  std::string block_id;
  std::string message;
};

struct ComprehensionBatch {
  std::vector<AttributeRecord> image_records;
  std::vector<AttributeRecord> text_records;
  std::vector<BlockFailure> failures;
  std::vector<std::string> warnings;
};

// Every block yields exactly one record; a block whose backend call fails
// gets an unparsed record plus a failure entry. Output follows block id order
// within each modality. crops maps block id -> crop path.
ComprehensionBatch comprehend_all(const std::vector<Block>& blocks,
                                  const std::map<std::string, std::filesystem::path>& crops,
                                  const ComprehensionPromptConfig& cfg, const VlmBackend& backend,
                                  std::size_t parallelism = 4, const RetryPolicy& retry = {});

}  // namespace catalog
