#include "catalog/config.hpp"

#include <cctype>
#include <charconv>
#include <set>

namespace catalog {

namespace {

class TomlReader {
 public:
  explicit TomlReader(std::string_view text) : text_(text) {}

  json parse() {
    json root = json::object();
    json* table = &root;
    while (true) {
      skip_blank_lines();
      if (at_end()) break;
      if (peek() == '[') {
        ++pos_;
        table = &open_table(root);
        skip_inline_space();
        expect(']');
      } else {
        std::vector<std::string> path = parse_key_path();
        skip_inline_space();
        expect('=');
        skip_inline_space();
        json value = parse_value();
        json* target = table;
        for (std::size_t i = 0; i + 1 < path.size(); ++i) target = &descend(*target, path[i]);
        if (target->contains(path.back())) fail("duplicate key '" + path.back() + "'");
        (*target)[path.back()] = std::move(value);
      }
      finish_line();
    }
    return root;
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;

  [[noreturn]] void fail(const std::string& what) const {
    throw ValidationError("config line " + std::to_string(line_) + ": " + what);
  }

  bool at_end() const { return pos_ >= text_.size(); }
  char peek() const { return at_end() ? '\0' : text_[pos_]; }

  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  void skip_inline_space() {
    while (!at_end() && (peek() == ' ' || peek() == '\t')) ++pos_;
  }

  void skip_comment() {
    if (peek() == '#')
      while (!at_end() && peek() != '\n') ++pos_;
  }

  void skip_blank_lines() {
    while (!at_end()) {
      skip_inline_space();
      skip_comment();
      if (peek() == '\r') ++pos_;
      if (peek() != '\n') return;
      ++pos_;
      ++line_;
    }
  }

  void finish_line() {
    skip_inline_space();
    skip_comment();
    if (peek() == '\r') ++pos_;
    if (at_end()) return;
    if (peek() != '\n') fail("unexpected trailing characters");
    ++pos_;
    ++line_;
  }

  json& descend(json& node, const std::string& key) {
    if (!node.contains(key)) node[key] = json::object();
    json& child = node[key];
    if (!child.is_object()) fail("'" + key + "' is not a table");
    return child;
  }

  json& open_table(json& root) {
    skip_inline_space();
    json* node = &root;
    for (const auto& part : parse_key_path()) node = &descend(*node, part);
    return *node;
  }

  std::vector<std::string> parse_key_path() {
    std::vector<std::string> parts;
    while (true) {
      skip_inline_space();
      if (peek() == '"') {
        ++pos_;
        parts.push_back(parse_basic_string());
      } else if (peek() == '\'') {
        ++pos_;
        parts.push_back(parse_literal_string());
      } else {
        const std::size_t start = pos_;
        while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-'))
          ++pos_;
        if (pos_ == start) fail("expected a key");
        parts.emplace_back(text_.substr(start, pos_ - start));
      }
      skip_inline_space();
      if (peek() != '.') return parts;
      ++pos_;
    }
  }

  static void append_utf8(std::string& out, std::uint32_t cp) {
    if (cp < 0x80) {
      out += char(cp);
    } else if (cp < 0x800) {
      out += char(0xC0 | (cp >> 6));
      out += char(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
      out += char(0xE0 | (cp >> 12));
      out += char(0x80 | ((cp >> 6) & 0x3F));
      out += char(0x80 | (cp & 0x3F));
    } else {
      out += char(0xF0 | (cp >> 18));
      out += char(0x80 | ((cp >> 12) & 0x3F));
      out += char(0x80 | ((cp >> 6) & 0x3F));
      out += char(0x80 | (cp & 0x3F));
    }
  }

  std::string parse_basic_string() {
    std::string out;
    while (true) {
      if (at_end() || peek() == '\n') fail("unterminated string");
      const char c = text_[pos_++];
      if (c == '"') return out;
      if (c != '\\') {
        out += c;
        continue;
      }
      if (at_end()) fail("unterminated escape");
      const char e = text_[pos_++];
      switch (e) {
        case '"':
          out += '"';
          break;
        case '\\':
          out += '\\';
          break;
        case 'n':
          out += '\n';
          break;
        case 't':
          out += '\t';
          break;
        case 'r':
          out += '\r';
          break;
        case 'u':
        case 'U': {
          const std::size_t len = e == 'u' ? 4 : 8;
          if (pos_ + len > text_.size()) fail("short unicode escape");
          std::uint32_t cp = 0;
          const auto hex = text_.substr(pos_, len);
          auto [ptr, ec] = std::from_chars(hex.data(), hex.data() + len, cp, 16);
          if (ec != std::errc() || ptr != hex.data() + len) fail("bad unicode escape");
          pos_ += len;
          append_utf8(out, cp);
          break;
        }
        default:
          fail(std::string("unknown escape \\") + e);
      }
    }
  }

  std::string parse_literal_string() {
    const std::size_t start = pos_;
    while (!at_end() && peek() != '\'' && peek() != '\n') ++pos_;
    if (peek() != '\'') fail("unterminated literal string");
    std::string out(text_.substr(start, pos_ - start));
    ++pos_;
    return out;
  }

  void skip_array_space() {
    while (!at_end()) {
      skip_inline_space();
      skip_comment();
      if (peek() == '\r') {
        ++pos_;
      } else if (peek() == '\n') {
        ++pos_;
        ++line_;
      } else {
        return;
      }
    }
  }

  json parse_value() {
    const char c = peek();
    if (c == '"') {
      ++pos_;
      return parse_basic_string();
    }
    if (c == '\'') {
      ++pos_;
      return parse_literal_string();
    }
    if (c == '[') {
      ++pos_;
      json arr = json::array();
      while (true) {
        skip_array_space();
        if (peek() == ']') {
          ++pos_;
          return arr;
        }
        arr.push_back(parse_value());
        skip_array_space();
        if (peek() == ',') {
          ++pos_;
        } else if (peek() != ']') {
          fail("expected ',' or ']' in array");
        }
      }
    }
    const std::size_t start = pos_;
    while (!at_end() && !std::isspace(static_cast<unsigned char>(peek())) && peek() != ',' && peek() != ']' &&
           peek() != '#')
      ++pos_;
    const std::string token(text_.substr(start, pos_ - start));
    if (token == "true") return true;
    if (token == "false") return false;
    std::string digits;
    for (const char ch : token)
      if (ch != '_') digits += ch;
    if (digits.empty()) fail("expected a value");
    const bool is_float = digits.find_first_of(".eE") != std::string::npos;
    if (!is_float) {
      long long v = 0;
      auto [ptr, ec] = std::from_chars(digits.data() + (digits[0] == '+'), digits.data() + digits.size(), v);
      if (ec == std::errc() && ptr == digits.data() + digits.size()) return v;
    } else {
      double v = 0;
      auto [ptr, ec] = std::from_chars(digits.data() + (digits[0] == '+'), digits.data() + digits.size(), v);
      if (ec == std::errc() && ptr == digits.data() + digits.size()) return v;
    }
    fail("cannot parse value '" + token + "'");
  }
};

void check_keys(const json& table, const std::string& name, std::initializer_list<std::string_view> allowed) {
  for (const auto& [key, value] : table.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ValidationError("config: unknown key '" + key + "' in [" + name + "]");
    }
  }
}

template <typename T>
void read(const json& table, const char* key, T& dest) {
  if (!table.contains(key)) return;
  try {
    dest = table.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: bad value for '") + key + "': " + e.what());
  }
}

BackendConfig read_backend(const json& t, const std::string& name, BackendConfig b) {
  read(t, "backend", b.kind);
  read(t, "url", b.url);
  read(t, "timeout_seconds", b.timeout_seconds);
  if (b.kind != "http" && b.kind != "fixture")
    throw ValidationError("config: [" + name + "] backend must be 'http' or 'fixture'");
  return b;
}

const json& table_or_empty(const json& root, const char* name) {
  static const json empty = json::object();
  if (!root.contains(name)) return empty;
  const json& t = root.at(name);
  if (!t.is_object()) throw ValidationError(std::string("config: '") + name + "' must be a table");
  return t;
}

}  // namespace

json parse_toml(std::string_view text) { return TomlReader(text).parse(); }

void RunConfig::validate() const {
  detection.validate();
  comprehension.validate();
  foreign_keys.validate(comprehension.schema_keys);
  eval.validate();
  if (parallelism == 0) throw ValidationError("config: parallelism must be >= 1");
  if (retry.max_attempts < 1) throw ValidationError("config: retry max_attempts must be >= 1");
}

RunConfig config_from_toml(std::string_view text) {
  const json root = parse_toml(text);
  check_keys(root, "root", {"detector", "comprehension", "matching", "annotation", "evaluation", "retry"});
  RunConfig cfg;

  const json& det = table_or_empty(root, "detector");
  check_keys(det, "detector",
             {"backend", "url", "timeout_seconds", "image_prompt", "text_prompt", "score_threshold",
              "nms_iou_threshold"});
  cfg.detector = read_backend(det, "detector", cfg.detector);
  read(det, "image_prompt", cfg.detection.image_prompt);
  read(det, "text_prompt", cfg.detection.text_prompt);
  read(det, "score_threshold", cfg.detection.score_threshold);
  read(det, "nms_iou_threshold", cfg.detection.nms_iou_threshold);

  const json& comp = table_or_empty(root, "comprehension");
  check_keys(comp, "comprehension",
             {"backend", "url", "timeout_seconds", "template", "schema_keys", "max_retries", "parallelism"});
  cfg.vlm = read_backend(comp, "comprehension", {"http", "", 120});
  read(comp, "template", cfg.comprehension.template_text);
  read(comp, "schema_keys", cfg.comprehension.schema_keys);
  read(comp, "max_retries", cfg.comprehension.max_retries);
  read(comp, "parallelism", cfg.parallelism);

  const json& match = table_or_empty(root, "matching");
  check_keys(match, "matching", {"foreign_keys"});
  read(match, "foreign_keys", cfg.foreign_keys.keys);

  const json& ann = table_or_empty(root, "annotation");
  check_keys(ann, "annotation", {"figure_key", "unit_key", "class_key"});
  read(ann, "figure_key", cfg.fields.figure_key);
  read(ann, "unit_key", cfg.fields.unit_key);
  read(ann, "class_key", cfg.fields.class_key);

  const json& ev = table_or_empty(root, "evaluation");
  check_keys(ev, "evaluation", {"iou_threshold", "require_attribute_match", "attribute_keys_checked"});
  read(ev, "iou_threshold", cfg.eval.iou_threshold);
  read(ev, "require_attribute_match", cfg.eval.require_attribute_match);
  read(ev, "attribute_keys_checked", cfg.eval.attribute_keys_checked);

  const json& retry = table_or_empty(root, "retry");
  check_keys(retry, "retry", {"max_attempts", "base_delay_ms"});
  read(retry, "max_attempts", cfg.retry.max_attempts);
  if (retry.contains("base_delay_ms")) {
    long long ms = 0;
    read(retry, "base_delay_ms", ms);
    cfg.retry.base_delay = std::chrono::milliseconds(ms);
  }

  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) { return config_from_toml(read_file(path)); }

}  // namespace catalog
