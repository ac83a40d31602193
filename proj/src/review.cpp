#include "catalog/review.hpp"

#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <set>

namespace catalog {

namespace fs = std::filesystem;

std::string_view to_string(PairStatus s) {
  switch (s) {
    case PairStatus::pending:
      return "pending";
    case PairStatus::accepted:
      return "accepted";
    case PairStatus::rejected:
      return "rejected";
    case PairStatus::reassigned:
      return "reassigned";
  }
  return "pending";
}

std::string_view to_string(DecisionAction a) {
  switch (a) {
    case DecisionAction::accept:
      return "accept";
    case DecisionAction::reject:
      return "reject";
    case DecisionAction::reassign:
      return "reassign";
  }
  return "accept";
}

namespace {

std::string join_errors(const std::vector<FieldError>& fields) {
  std::string out = "invalid decision:";
  for (const auto& f : fields) out += " " + f.field + ": " + f.message + ";";
  return out;
}

std::string join_ids(const std::vector<std::string>& ids) {
  std::string out = "decisions reference unknown pairs:";
  for (const auto& id : ids) out += " " + id;
  return out;
}

}  // namespace

DecisionError::DecisionError(std::vector<FieldError> fields)
    : ValidationError(join_errors(fields)), fields_(std::move(fields)) {}

UnknownPairError::UnknownPairError(std::vector<std::string> ids) : ValidationError(join_ids(ids)), ids_(std::move(ids)) {}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Decision parse_decision_body(const std::string& pair_id, const json& body) {
  std::vector<FieldError> errors;
  Decision d;
  d.pair_id = pair_id;
  if (!body.is_object()) throw DecisionError(std::vector<FieldError>{{"body", "must be a JSON object"}});
  if (!body.contains("action") || !body.at("action").is_string()) {
    errors.push_back({"action", "required; one of accept, reject, reassign"});
  } else {
    const std::string action = body.at("action").get<std::string>();
    if (action == "accept") {
      d.action = DecisionAction::accept;
    } else if (action == "reject") {
      d.action = DecisionAction::reject;
    } else if (action == "reassign") {
      d.action = DecisionAction::reassign;
    } else {
      errors.push_back({"action", "unknown action '" + action + "'"});
    }
  }
  if (body.contains("new_text_block_id") && !body.at("new_text_block_id").is_null()) {
    if (!body.at("new_text_block_id").is_string()) {
      errors.push_back({"new_text_block_id", "must be a string"});
    } else {
      d.new_text_block_id = body.at("new_text_block_id").get<std::string>();
    }
  }
  if (errors.empty() && d.action == DecisionAction::reassign && d.new_text_block_id.empty()) {
    errors.push_back({"new_text_block_id", "required for reassign"});
  }
  if (errors.empty() && d.action != DecisionAction::reassign && !d.new_text_block_id.empty()) {
    errors.push_back({"new_text_block_id", "only allowed with reassign"});
  }
  if (!errors.empty()) throw DecisionError(std::move(errors));
  return d;
}

json decision_json(const Decision& d) {
  json j{{"timestamp", d.timestamp}, {"pair_id", d.pair_id}, {"action", to_string(d.action)}};
  if (d.action == DecisionAction::reassign) j["new_text_block_id"] = d.new_text_block_id;
  return j;
}

Decision decision_from_json(const json& j) {
  Decision d = parse_decision_body(j.at("pair_id").get<std::string>(), j);
  d.timestamp = j.value("timestamp", std::string{});
  return d;
}

ReviewSession::ReviewSession(std::string session_id, std::vector<CandidatePair> candidates, std::vector<Block> blocks,
                             std::vector<Page> pages)
    : session_id_(std::move(session_id)),
      blocks_(std::move(blocks)),
      pages_(std::move(pages)),
      layout_(blocks_, pages_) {
  std::set<std::string> ids;
  for (auto& c : candidates) {
    if (!ids.insert(c.id).second) throw ValidationError("duplicate pair id " + c.id);
    entries_.push_back({std::move(c), PairStatus::pending, {}});
  }
}

ReviewSession ReviewSession::load(const fs::path& run_dir) {
  const RunFiles files{run_dir};
  const Manifest manifest = load_manifest(files.manifest());
  ReviewSession session(run_dir.filename().string(), load_matches(files.matches()), load_blocks(files.blocks()),
                        manifest.pages);
  if (fs::exists(files.decisions())) {
    std::vector<Decision> decisions;
    const json doc = read_json(files.decisions());
    for (const auto& d : doc.at("decisions")) decisions.push_back(decision_from_json(d));
    session.replay(decisions);
  }
  return session;
}

ReviewSession::Entry* ReviewSession::find(const std::string& pair_id) {
  auto it = std::find_if(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.candidate.id == pair_id; });
  return it == entries_.end() ? nullptr : &*it;
}

const ReviewSession::Entry* ReviewSession::holder_of_text(const std::string& text_block_id, const Entry* except) const {
  for (const auto& e : entries_) {
    if (&e == except || e.status == PairStatus::rejected) continue;
    if (e.text_block_id() == text_block_id) return &e;
  }
  return nullptr;
}

void ReviewSession::apply(Decision d) {
  Entry* entry = find(d.pair_id);
  if (!entry) throw UnknownPairError({d.pair_id});

  switch (d.action) {
    case DecisionAction::reject:
      entry->status = PairStatus::rejected;
      entry->reassigned_text_block_id.clear();
      break;
    case DecisionAction::accept: {
      if (const Entry* other = holder_of_text(entry->candidate.pair.text_block_id, entry)) {
        throw DecisionError({{"action", "text block " + entry->candidate.pair.text_block_id +
                                            " is now held by " + other->candidate.id}});
      }
      entry->status = PairStatus::accepted;
      entry->reassigned_text_block_id.clear();
      break;
    }
    case DecisionAction::reassign: {
      if (!layout_.contains(d.new_text_block_id) ||
          layout_.block(d.new_text_block_id).modality != Modality::text) {
        throw DecisionError({{"new_text_block_id", "no text block '" + d.new_text_block_id + "' in this session"}});
      }
      if (const Entry* other = holder_of_text(d.new_text_block_id, entry)) {
        throw DecisionError(
            {{"new_text_block_id", "text block " + d.new_text_block_id + " is held by " + other->candidate.id}});
      }
      entry->status = PairStatus::reassigned;
      entry->reassigned_text_block_id = d.new_text_block_id;
      break;
    }
  }
  if (d.timestamp.empty()) d.timestamp = utc_timestamp();
  log_.push_back(std::move(d));
}

void ReviewSession::replay(const std::vector<Decision>& decisions) {
  std::vector<std::string> unknown;
  for (const auto& d : decisions) {
    if (!find(d.pair_id) && std::find(unknown.begin(), unknown.end(), d.pair_id) == unknown.end()) {
      unknown.push_back(d.pair_id);
    }
  }
  if (!unknown.empty()) throw UnknownPairError(std::move(unknown));
  for (const auto& d : decisions) apply(d);
}

std::vector<MatchPair> ReviewSession::final_pairs() const {
  std::vector<MatchPair> out;
  for (const auto& e : entries_) {
    if (e.status == PairStatus::rejected) continue;
    MatchPair p = e.candidate.pair;
    if (e.status == PairStatus::reassigned) {
      p.text_block_id = e.reassigned_text_block_id;
      p.stage = MatchStage::human;
      p.cost = pair_cost(layout_.block(p.image_block_id), layout_.block(p.text_block_id), layout_);
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<std::string> ReviewSession::unmatched_images() const {
  std::set<std::string> active;
  for (const auto& e : entries_)
    if (e.status != PairStatus::rejected) active.insert(e.candidate.pair.image_block_id);
  std::vector<std::string> out;
  for (const auto& b : blocks_)
    if (b.modality == Modality::image && !active.count(b.id)) out.push_back(b.id);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> ReviewSession::unmatched_texts() const {
  std::set<std::string> active;
  for (const auto& e : entries_)
    if (e.status != PairStatus::rejected) active.insert(e.text_block_id());
  std::vector<std::string> out;
  for (const auto& b : blocks_)
    if (b.modality == Modality::text && !active.count(b.id)) out.push_back(b.id);
  std::sort(out.begin(), out.end());
  return out;
}

json ReviewSession::pair_json(const Entry& e) const {
  const bool moved = e.status == PairStatus::reassigned;
  json j{{"id", e.candidate.id},
         {"image_block_id", e.candidate.pair.image_block_id},
         {"text_block_id", e.text_block_id()},
         {"original_text_block_id", e.candidate.pair.text_block_id},
         {"stage", to_string(moved ? MatchStage::human : e.candidate.pair.stage)},
         {"cost", e.candidate.pair.cost},
         {"status", to_string(e.status)},
         {"page_id", layout_.block(e.candidate.pair.image_block_id).page_id}};
  if (moved) {
    j["cost"] = pair_cost(layout_.block(e.candidate.pair.image_block_id), layout_.block(e.text_block_id()), layout_);
  }
  return j;
}

json ReviewSession::pairs_json() const {
  json arr = json::array();
  for (const auto& e : entries_) arr.push_back(pair_json(e));
  return arr;
}

json ReviewSession::unmatched_json() const { return catalog::unmatched_json(unmatched_images(), unmatched_texts()); }

json ReviewSession::session_json() const {
  json counts{{"pending", 0}, {"accepted", 0}, {"rejected", 0}, {"reassigned", 0}};
  for (const auto& e : entries_) counts[std::string(to_string(e.status))] = counts[std::string(to_string(e.status))].get<int>() + 1;
  json audit = json::array();
  for (const auto& d : log_) audit.push_back(decision_json(d));
  json pages = json::array();
  for (const auto& p : pages_) {
    pages.push_back(json{{"page_id", p.page_id}, {"page_index", p.page_index}, {"width", p.width}, {"height", p.height}});
  }
  return json{{"session_id", session_id_}, {"counts", counts},       {"pairs", pairs_json()}, {"unmatched", unmatched_json()},
              {"pages", pages},            {"blocks", blocks_},      {"audit_log", audit}};
}

json ReviewSession::decisions_document() const {
  json arr = json::array();
  for (const auto& d : log_) arr.push_back(decision_json(d));
  return json{{"session_id", session_id_}, {"decisions", arr}};
}

struct ReviewServer::Impl {
  fs::path run_dir;
  std::optional<fs::path> ui_dir;
  mutable std::mutex mutex;
  ReviewSession session;
  httplib::Server server;

  Impl(fs::path dir, std::optional<fs::path> ui)
      : run_dir(std::move(dir)), ui_dir(std::move(ui)), session(ReviewSession::load(run_dir)) {}

  static void send_json(httplib::Response& res, const json& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  void routes() {
    server.Get("/api/session", [this](const httplib::Request&, httplib::Response& res) {
      std::lock_guard lock(mutex);
      send_json(res, session.session_json());
    });
    server.Get("/api/pairs", [this](const httplib::Request&, httplib::Response& res) {
      std::lock_guard lock(mutex);
      send_json(res, session.pairs_json());
    });
    server.Get("/api/unmatched", [this](const httplib::Request&, httplib::Response& res) {
      std::lock_guard lock(mutex);
      send_json(res, session.unmatched_json());
    });
    server.Get(R"(/api/page/([^/]+)/image)", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      std::string path;
      {
        std::lock_guard lock(mutex);
        for (const auto& p : session.pages())
          if (p.page_id == id) path = p.image_ref;
      }
      if (path.empty()) return send_json(res, json{{"error", "unknown page " + id}}, 404);
      try {
        res.set_content(read_file(path), "image/png");
      } catch (const std::exception& e) {
        send_json(res, json{{"error", e.what()}}, 500);
      }
    });
    server.Post(R"(/api/pairs/([^/]+)/decision)", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      json body;
      try {
        body = json::parse(req.body);
      } catch (const json::parse_error&) {
        return send_json(res, json{{"errors", json::array({json{{"field", "body"}, {"message", "not valid JSON"}}})}},
                         422);
      }
      std::lock_guard lock(mutex);
      try {
        Decision d = parse_decision_body(id, body);
        ReviewSession next = session;
        next.apply(std::move(d));
        write_json(RunFiles{run_dir}.decisions(), next.decisions_document());
        session = std::move(next);
        for (const auto& e : session.entries())
          if (e.candidate.id == id) return send_json(res, session.pair_json(e));
      } catch (const UnknownPairError& e) {
        send_json(res, json{{"error", e.what()}}, 404);
      } catch (const DecisionError& e) {
        json errs = json::array();
        for (const auto& f : e.fields()) errs.push_back(json{{"field", f.field}, {"message", f.message}});
        send_json(res, json{{"errors", errs}}, 422);
      } catch (const std::exception& e) {
        send_json(res, json{{"error", e.what()}}, 500);
      }
    });
    if (ui_dir && fs::is_directory(*ui_dir)) server.set_mount_point("/", ui_dir->string());
  }
};

ReviewServer::ReviewServer(fs::path run_dir, std::optional<fs::path> ui_dir)
    : impl_(std::make_unique<Impl>(std::move(run_dir), std::move(ui_dir))) {
  // httplib's default adds SO_REUSEPORT, which would let a second server
  // share a busy port silently.
  impl_->server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  impl_->routes();
}

ReviewServer::~ReviewServer() { stop(); }

int ReviewServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw IoError("cannot bind review server on " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw IoError("cannot bind review server on " + host + ":" + std::to_string(port) + " (port busy?)");
  }
  return port;
}

void ReviewServer::run() { impl_->server.listen_after_bind(); }

void ReviewServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

void ReviewServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

ReviewSession ReviewServer::snapshot() const {
  std::lock_guard lock(impl_->mutex);
  return impl_->session;
}

}  // namespace catalog
