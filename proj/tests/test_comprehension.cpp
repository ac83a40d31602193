#include "catalog/comprehension.hpp"
#include "catalog/text.hpp"

#include <httplib.h>

#include <atomic>
#include <mutex>
#include <thread>

#include "test_support.hpp"

using namespace catalog;
using catalog::testing::TempDir;
namespace fs = std::filesystem;

namespace {

const RetryPolicy kNoWait{3, std::chrono::milliseconds(0)};

Block block(std::string id, Modality m, BoundingBox box = {5, 5, 4, 4}) {
  const std::string page = id.substr(0, 5);
  return Block{std::move(id), page, m, box, 0.9};
}

// Records every prompt it sees; replies come from a queue per block, the
// last reply repeating once the queue runs dry.
class ScriptedVlm final : public VlmBackend {
 public:
  std::map<std::string, std::vector<std::string>> script;
  mutable std::mutex mu;
  mutable std::vector<std::string> prompts;
  mutable std::map<std::string, std::size_t> cursor;

  std::string complete(const VlmRequest& r) const override {
    std::lock_guard lock(mu);
    prompts.push_back(r.prompt);
    const auto& replies = script.at(r.block_id);
    std::size_t& i = cursor[r.block_id];
    const std::string out = replies[std::min(i, replies.size() - 1)];
    ++i;
    return out;
  }
};

std::string append_utf8(std::string s, char32_t cp) {
  if (cp < 0x80) {
    s += char(cp);
  } else if (cp < 0x800) {
    s += char(0xC0 | (cp >> 6));
    s += char(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    s += char(0xE0 | (cp >> 12));
    s += char(0x80 | ((cp >> 6) & 0x3F));
    s += char(0x80 | (cp & 0x3F));
  } else {
    s += char(0xF0 | (cp >> 18));
    s += char(0x80 | ((cp >> 12) & 0x3F));
    s += char(0x80 | ((cp >> 6) & 0x3F));
    s += char(0x80 | (cp & 0x3F));
  }
  return s;
}

}  // namespace

TEST_CASE("normalization examples") {
  CHECK(normalize_value("  图一 ") == "图一");
  CHECK(normalize_value("\xEF\xBC\x92") == "2");                  // FULLWIDTH DIGIT TWO
  CHECK(normalize_value("T1\xEF\xBC\x88" "a\xEF\xBC\x89") == "T1(a)");  // full-width parentheses
  CHECK(normalize_value("a\xE3\x80\x80\xE3\x80\x80" "b") == "a b");  // ideographic spaces
  CHECK(normalize_value("a \t\n b") == "a b");
  CHECK(normalize_value("e\xCC\x81") == "\xC3\xA9");  // e + combining acute -> U+00E9
  CHECK(normalize_value("T1\xE2\x91\xA1") == "T1\xE2\x91\xA1");  // circled two survives
  CHECK(normalize_value("") == "");
  CHECK(normalize_value("   ") == "");
}

TEST_CASE("normalization is idempotent on random strings") {
  // Alphabet mixes ASCII, whitespace, full-width forms, combining marks,
  // circled digits and CJK so that every normalization step is exercised.
  const std::vector<char32_t> alphabet{U'a',    U'Z',    U'1',    U' ',    U'\t',   U'\n',   0x3000, 0xFF01,
                                       0xFF10, 0xFF21, 0xFF5E, 0xFF5F, 0x0301, 0x0308, 0x0327, U'e',
                                       0x00E9, 0x2460, 0x2461, 0x56FE, 0x4E00, 0x1100, 0x1161, 0xAC00,
                                       0x212B, 0x2126, 0x1E9B, 0x0323, 0xFB01, 0x00A0, 0x2003, 0x1F600};
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1), len(0, 12);
  for (int trial = 0; trial < 20000; ++trial) {
    std::string s;
    for (std::size_t i = 0, n = len(rng); i < n; ++i) s = append_utf8(s, alphabet[pick(rng)]);
    const std::string once = normalize_value(s);
    REQUIRE(normalize_value(once) == once);
  }
}

TEST_CASE("prompt template renders modality and schema keys") {
  ComprehensionPromptConfig cfg;
  cfg.template_text = "{modality}: {schema_keys} / {modality}";
  cfg.schema_keys = {"a", "b"};
  CHECK(cfg.render(Modality::text) == "text: a, b / text");
}

TEST_CASE("prompt config validation") {
  ComprehensionPromptConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.schema_keys = {};
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.schema_keys = {"a", "a"};
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.schema_keys = {"a"};
  cfg.max_retries = -1;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("reply parsing tolerates fences and prose") {
  const auto a = parse_reply("Sure!\n```json\n{\"x\": \"1\", \"y\": 2, \"z\": null}\n```");
  REQUIRE(a);
  CHECK(a->value_or_empty("x") == "1");
  CHECK(a->value_or_empty("y") == "2");
  CHECK(a->value_or_empty("z") == "");
  CHECK_FALSE(parse_reply("not json at all"));
  CHECK_FALSE(parse_reply("{\"x\": {\"nested\": 1}}"));
  CHECK_FALSE(parse_reply("} backwards {"));
  CHECK_FALSE(parse_reply("{\"x\": 1"));
}

TEST_CASE("crop of a whole-page block has the page dimensions") {
  TempDir tmp;
  Image page(40, 30);
  const auto b = block("p0000-img-000", Modality::image, {20, 15, 40, 30});
  const auto path = crop_block(page, b, tmp / "crops");
  CHECK(path.filename() == "p0000_p0000-img-000.png");
  const Image out = read_png(path);
  CHECK(out.width == 40);
  CHECK(out.height == 30);
}

TEST_CASE("crop rounds fractional corners outward") {
  // (5.4, 5.4, 4, 4) -> [3.4, 7.4]^2 -> pixels [3, 8)^2
  CHECK(outward_pixel_rect({5.4, 5.4, 4.0, 4.0}, 100, 100) == PixelRect{3, 3, 8, 8});

  TempDir tmp;
  Image page(10, 10, 0);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 10; ++x) page.row(y)[x * 3] = std::uint8_t(10 * y + x);
  const Image out = read_png(crop_block(page, block("p0000-txt-000", Modality::text, {5.4, 5.4, 4.0, 4.0}), tmp.path()));
  REQUIRE(out.width == 5);
  REQUIRE(out.height == 5);
  CHECK(out.row(0)[0] == 33);  // lossless: pixel (3,3)
  CHECK(out.row(4)[4 * 3] == 77);
}

TEST_CASE("crop from an unreadable page raster is an io error") {
  TempDir tmp;
  const Page page{"p0000", "", 0, 10, 10, (tmp / "missing.png").string()};
  CHECK_THROWS_AS(crop_block(page, block("p0000-img-000", Modality::image), tmp.path()), IoError);
}

TEST_CASE("comprehend_block with a complete reply") {
  const FixtureVlm vlm(std::map<std::string, std::string>{
      {"p0000-txt-000",
       R"({"catalog_figure_no":"图一","item_index":"3","excavation_unit":"T1②","morphological_class":"罐"})"}});
  const auto r = comprehend_block(block("p0000-txt-000", Modality::text), "crop.png", {}, vlm, kNoWait);
  CHECK(r.record.parse_status == ParseStatus::ok);
  CHECK(r.warnings.empty());
  const json expected = json::parse(
      R"({"catalog_figure_no":"图一","item_index":"3","excavation_unit":"T1②","morphological_class":"罐"})");
  CHECK(json(r.record.attributes) == expected);
}

TEST_CASE("comprehend_block with an unparseable reply and no retries") {
  const FixtureVlm vlm(std::map<std::string, std::string>{{"p0000-txt-000", "not json at all"}});
  ComprehensionPromptConfig cfg;
  cfg.max_retries = 0;
  const auto r = comprehend_block(block("p0000-txt-000", Modality::text), "crop.png", cfg, vlm, kNoWait);
  CHECK(r.record.parse_status == ParseStatus::unparsed);
  CHECK(r.record.attributes.empty());
  CHECK(r.warnings.size() == 1);
}

TEST_CASE("extra keys follow the schema keys with a warning") {
  const FixtureVlm vlm(std::map<std::string, std::string>{
      {"p0000-txt-000", R"({"color":"red","item_index":"1","catalog_figure_no":"图一"})"}});
  const auto r = comprehend_block(block("p0000-txt-000", Modality::text), "crop.png", {}, vlm, kNoWait);
  std::vector<std::string> keys;
  for (const auto& [k, v] : r.record.attributes) keys.push_back(k);
  CHECK(keys ==
        std::vector<std::string>{"catalog_figure_no", "item_index", "excavation_unit", "morphological_class", "color"});
  CHECK(r.record.attributes.value_or_empty("color") == "red");
  CHECK(r.record.attributes.value_or_empty("excavation_unit") == "");
  // two missing schema keys plus one extra
  CHECK(r.warnings.size() == 3);
}

TEST_CASE("retries append the JSON-only instruction") {
  ScriptedVlm vlm;
  vlm.script["p0000-img-000"] = {"I think it is a jar.", "still prose", R"({"item_index":"2"})"};
  ComprehensionPromptConfig cfg;
  cfg.max_retries = 3;
  const auto r = comprehend_block(block("p0000-img-000", Modality::image), "crop.png", cfg, vlm, kNoWait);
  CHECK(r.record.parse_status == ParseStatus::ok);
  REQUIRE(vlm.prompts.size() == 3);
  const std::string base = cfg.render(Modality::image);
  CHECK(vlm.prompts[0] == base);
  CHECK(vlm.prompts[1] == base + std::string(kJsonOnlySuffix));
  CHECK(vlm.prompts[2] == base + std::string(kJsonOnlySuffix));

  ScriptedVlm never;
  never.script["p0000-img-000"] = {"nope"};
  cfg.max_retries = 2;
  const auto u = comprehend_block(block("p0000-img-000", Modality::image), "crop.png", cfg, never, kNoWait);
  CHECK(u.record.parse_status == ParseStatus::unparsed);
  CHECK(never.prompts.size() == 3);
}

TEST_CASE("transport failure surfaces after the retry budget") {
  class Down final : public VlmBackend {
   public:
    mutable std::atomic<int> calls{0};
    std::string complete(const VlmRequest&) const override {
      ++calls;
      throw TransportError("down");
    }
  } vlm;
  CHECK_THROWS_AS(comprehend_block(block("p0000-img-000", Modality::image), "c.png", {}, vlm, kNoWait),
                  TransportError);
  CHECK(vlm.calls == 3);
}

TEST_CASE("comprehend_all on no blocks") {
  const FixtureVlm vlm(std::map<std::string, std::string>{});
  const auto batch = comprehend_all({}, {}, {}, vlm);
  CHECK(batch.image_records.empty());
  CHECK(batch.text_records.empty());
  CHECK(batch.failures.empty());
}

TEST_CASE("comprehend_all partitions by modality in id order") {
  const std::string ok = R"({"catalog_figure_no":"图一","item_index":"1"})";
  const FixtureVlm vlm(std::map<std::string, std::string>{
      {"p0000-img-001", ok}, {"p0000-img-000", ok}, {"p0000-txt-000", "```\nbroken {\n```"}});
  const std::vector<Block> blocks{block("p0000-txt-000", Modality::text), block("p0000-img-001", Modality::image),
                                  block("p0000-img-000", Modality::image)};
  std::map<std::string, fs::path> crops;
  for (const auto& b : blocks) crops[b.id] = "crop.png";
  ComprehensionPromptConfig cfg;
  cfg.max_retries = 0;
  const auto batch = comprehend_all(blocks, crops, cfg, vlm, 3, kNoWait);
  REQUIRE(batch.image_records.size() == 2);
  REQUIRE(batch.text_records.size() == 1);
  CHECK(batch.image_records[0].block_id == "p0000-img-000");
  CHECK(batch.image_records[1].block_id == "p0000-img-001");
  CHECK(batch.image_records[0].parse_status == ParseStatus::ok);
  CHECK(batch.text_records[0].parse_status == ParseStatus::unparsed);
  CHECK(batch.failures.empty());
}

TEST_CASE("comprehend_all keeps going when one block fails") {
  const FixtureVlm vlm(std::map<std::string, std::string>{{"p0000-img-000", R"({"item_index":"1"})"}});
  const std::vector<Block> blocks{block("p0000-img-000", Modality::image), block("p0000-img-001", Modality::image),
                                  block("p0000-txt-000", Modality::text)};
  std::map<std::string, fs::path> crops{{"p0000-img-000", "a.png"}, {"p0000-img-001", "b.png"}};
  const auto batch = comprehend_all(blocks, crops, {}, vlm, 2, kNoWait);
  CHECK(batch.image_records.size() == 2);
  CHECK(batch.text_records.size() == 1);
  REQUIRE(batch.failures.size() == 2);
  CHECK(batch.failures[0].block_id == "p0000-img-001");  // no fixture reply
  CHECK(batch.failures[1].block_id == "p0000-txt-000");  // no crop
  CHECK(batch.image_records[1].parse_status == ParseStatus::unparsed);
}

TEST_CASE("comprehend_all is deterministic across parallelism") {
  std::map<std::string, std::string> replies;
  std::vector<Block> blocks;
  std::map<std::string, fs::path> crops;
  for (int i = 0; i < 40; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "p%04d-%s-%03d", i % 3, i % 2 ? "img" : "txt", i);
    blocks.push_back(block(id, i % 2 ? Modality::image : Modality::text));
    crops[id] = "x.png";
    replies[id] = "{\"item_index\": \"" + std::to_string(i) + "\"}";
  }
  const FixtureVlm vlm(replies);
  const auto serial = comprehend_all(blocks, crops, {}, vlm, 1, kNoWait);
  const auto parallel = comprehend_all(blocks, crops, {}, vlm, 8, kNoWait);
  CHECK(json(serial.image_records) == json(parallel.image_records));
  CHECK(json(serial.text_records) == json(parallel.text_records));
  CHECK(serial.warnings == parallel.warnings);
}

TEST_CASE("fixture replies file drives the recorded pages") {
  const FixtureVlm vlm(catalog::testing::fixture_dir() / "replies.json");
  const auto r = comprehend_block(block("p0000-txt-001", Modality::text), "c.png", {}, vlm, kNoWait);
  CHECK(r.record.attributes.value_or_empty("catalog_figure_no") == "图一");
  CHECK(r.record.attributes.value_or_empty("item_index") == "2");
  CHECK_THROWS_AS(vlm.complete({"p9999-img-000", "c.png", ""}), IoError);
}

TEST_CASE("http vlm round trip") {
  TempDir tmp;
  write_png(Image(3, 3, 9), tmp / "crop.png");
  const std::string png = read_file(tmp / "crop.png");

  httplib::Server server;
  bool image_ok = false;
  server.Post("/comprehend", [&](const httplib::Request& req, httplib::Response& res) {
    const auto body = json::parse(req.body);
    image_ok = base64_decode(body.at("image_b64").get<std::string>()) == png && body.at("prompt") == "describe";
    if (body.at("prompt") == "describe") {
      res.set_content(json{{"text", "{\"item_index\": \"4\"}"}}.dump(), "application/json");
    }
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  const HttpVlm vlm("http://127.0.0.1:" + std::to_string(port), std::chrono::seconds(5));
  CHECK(vlm.complete({"b", tmp / "crop.png", "describe"}) == "{\"item_index\": \"4\"}");
  CHECK(image_ok);
  CHECK_THROWS_AS(vlm.complete({"b", tmp / "crop.png", "other"}), DecodeError);

  server.stop();
  th.join();
  CHECK_THROWS_AS(vlm.complete({"b", tmp / "crop.png", "describe"}), TransportError);
}
