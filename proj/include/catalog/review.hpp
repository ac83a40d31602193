#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "catalog/matching.hpp"
#include "catalog/pipeline.hpp"

namespace catalog {

enum class PairStatus { pending, accepted, rejected, reassigned };
enum class DecisionAction { accept, reject, reassign };

std::string_view to_string(PairStatus s);
std::string_view to_string(DecisionAction a);

struct Decision {
  std::string pair_id;
  DecisionAction action = DecisionAction::accept;
  std::string new_text_block_id;  // reassign only
  std::string timestamp;
};

struct FieldError {
  std::string field;
  std::string message;
};

// A decision that cannot be applied; maps to HTTP 422.
class DecisionError : public ValidationError {
 public:
  explicit DecisionError(std::vector<FieldError> fields);
  const std::vector<FieldError>& fields() const { return fields_; }

 private:
  std::vector<FieldError> fields_;
};

// Decision referencing pair ids that do not exist.
class UnknownPairError : public ValidationError {
 public:
  explicit UnknownPairError(std::vector<std::string> ids);
  const std::vector<std::string>& ids() const { return ids_; }

 private:
  std::vector<std::string> ids_;
};

// Parses a decision body ({action, new_text_block_id?}); collects field errors.
Decision parse_decision_body(const std::string& pair_id, const json& body);

json decision_json(const Decision& d);
Decision decision_from_json(const json& j);

// Candidate pairs with per-pair review status. Decisions are an overlay: the
// candidates never change, and the state is the replay of the decision log.
// Invariant: pairs that are not rejected hold distinct text blocks.
class ReviewSession {
 public:
  struct Entry {
    CandidatePair candidate;
    PairStatus status = PairStatus::pending;
    std::string reassigned_text_block_id;

    const std::string& text_block_id() const {
      return status == PairStatus::reassigned ? reassigned_text_block_id : candidate.pair.text_block_id;
    }
  };

  ReviewSession(std::string session_id, std::vector<CandidatePair> candidates, std::vector<Block> blocks,
                std::vector<Page> pages);

  // Loads candidates from a run directory and replays decisions.json if present.
  static ReviewSession load(const std::filesystem::path& run_dir);

  const std::string& session_id() const { return session_id_; }
  const std::vector<Entry>& entries() const { return entries_; }
  const std::vector<Decision>& log() const { return log_; }
  const std::vector<Page>& pages() const { return pages_; }

  // Validates and applies; on error the session is unchanged.
  void apply(Decision d);
  // Applies a whole log; unknown pair ids are reported together first.
  void replay(const std::vector<Decision>& decisions);

  // Pairs that survive review, with reassignments applied (stage human).
  std::vector<MatchPair> final_pairs() const;
  std::vector<std::string> unmatched_images() const;
  std::vector<std::string> unmatched_texts() const;

  json pair_json(const Entry& e) const;
  json pairs_json() const;
  json unmatched_json() const;
  json session_json() const;
  json decisions_document() const;

 private:
  std::string session_id_;
  std::vector<Entry> entries_;
  std::vector<Block> blocks_;
  std::vector<Page> pages_;
  BlockLayout layout_;
  std::vector<Decision> log_;

  Entry* find(const std::string& pair_id);
  const Entry* holder_of_text(const std::string& text_block_id, const Entry* except) const;
};

std::string utc_timestamp();

// HTTP review API over a run directory. Every accepted decision is persisted
// to decisions.json (write-temp-rename) before the response is sent.
class ReviewServer {
 public:
  explicit ReviewServer(std::filesystem::path run_dir, std::optional<std::filesystem::path> ui_dir = std::nullopt);
  ~ReviewServer();

  ReviewServer(const ReviewServer&) = delete;
  ReviewServer& operator=(const ReviewServer&) = delete;

  // Binds the listening socket; port 0 picks a free port. Returns the port.
  // Throws IoError when the address cannot be bound.
  int bind(const std::string& host, int port);
  // Blocks serving requests until stop().
  void run();
  void stop();
  void wait_until_ready() const;

  ReviewSession snapshot() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace catalog
