#include "catalog/config.hpp"
#include "test_support.hpp"

using namespace catalog;

TEST_CASE("toml subset parses into a json tree") {
  const json j = parse_toml(R"(
# comment
title = "x # not a comment"
lit = 'C:\path'
n = 1_000
f = -2.5e1
yes = true
[a.b]
list = [
  "one",  # trailing comment
  'two',
]
"quoted key" = "\u56fe\t"
[c]
empty = []
)");
  CHECK(j.at("title") == "x # not a comment");
  CHECK(j.at("lit") == "C:\\path");
  CHECK(j.at("n") == 1000);
  CHECK(j.at("f") == -25.0);
  CHECK(j.at("yes") == true);
  CHECK(j.at("a").at("b").at("list") == json::array({"one", "two"}));
  CHECK(j.at("a").at("b").at("quoted key") == "图\t");
  CHECK(j.at("c").at("empty") == json::array());
}

TEST_CASE("toml syntax errors name the line") {
  try {
    parse_toml("a = 1\nb = \n");
    FAIL("expected a parse error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("2") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_toml("a = \"unterminated\n"), ValidationError);
  CHECK_THROWS_AS(parse_toml("a = 1\na = 2\n"), ValidationError);
  CHECK_THROWS_AS(parse_toml("[t\n"), ValidationError);
}

TEST_CASE("defaults when the config is empty") {
  const RunConfig cfg = config_from_toml("");
  CHECK(cfg.detection.score_threshold == 0.35);
  CHECK(cfg.detection.nms_iou_threshold == 0.5);
  CHECK(cfg.comprehension.max_retries == 3);
  CHECK(cfg.comprehension.schema_keys.size() == 4);
  CHECK(cfg.foreign_keys.keys == std::vector<std::string>{"catalog_figure_no", "item_index"});
  CHECK(cfg.eval.iou_threshold == 0.9);
  CHECK(cfg.eval.require_attribute_match);
  CHECK(cfg.retry.max_attempts == 3);
  CHECK(cfg.detector.kind == "http");
}

TEST_CASE("fixture config loads") {
  const RunConfig cfg = load_config(catalog::testing::fixture_dir() / "config.toml");
  CHECK(cfg.detector.kind == "fixture");
  CHECK(cfg.vlm.kind == "fixture");
  CHECK(cfg.comprehension.max_retries == 1);
  CHECK(cfg.retry.base_delay.count() == 0);
  CHECK(cfg.parallelism == 4);
}

TEST_CASE("all sections map onto the run config") {
  const RunConfig cfg = config_from_toml(R"(
[detector]
backend = "http"
url = "http://det:9000"
timeout_seconds = 5
image_prompt = "pot"
text_prompt = "label"
score_threshold = 0.5
nms_iou_threshold = 0.6

[comprehension]
backend = "http"
url = "http://vlm:9001"
template = "{modality} -> {schema_keys}"
schema_keys = ["fig", "item", "unit", "cls"]
max_retries = 0
parallelism = 2

[matching]
foreign_keys = ["fig"]

[annotation]
figure_key = "fig"
unit_key = "unit"
class_key = "cls"

[evaluation]
iou_threshold = 0.75
require_attribute_match = false
attribute_keys_checked = ["excavation_unit"]

[retry]
max_attempts = 5
base_delay_ms = 10
)");
  CHECK(cfg.detector.url == "http://det:9000");
  CHECK(cfg.detector.timeout_seconds == 5);
  CHECK(cfg.detection.image_prompt == "pot");
  CHECK(cfg.detection.nms_iou_threshold == 0.6);
  CHECK(cfg.vlm.url == "http://vlm:9001");
  CHECK(cfg.comprehension.render(Modality::image) == "image -> fig, item, unit, cls");
  CHECK(cfg.parallelism == 2);
  CHECK(cfg.foreign_keys.keys == std::vector<std::string>{"fig"});
  CHECK(cfg.fields.class_key == "cls");
  CHECK(cfg.eval.iou_threshold == 0.75);
  CHECK_FALSE(cfg.eval.require_attribute_match);
  CHECK(cfg.retry.max_attempts == 5);
  CHECK(cfg.retry.base_delay.count() == 10);
}

TEST_CASE("invalid configs are rejected") {
  CHECK_THROWS_AS(config_from_toml("[detector]\nscore_threshold = 2.0\n"), ValidationError);
  CHECK_THROWS_AS(config_from_toml("[detector]\nimage_prompt = \"\"\n"), ValidationError);
  CHECK_THROWS_AS(config_from_toml("[detector]\nbackend = \"grpc\"\n"), ValidationError);
  CHECK_THROWS_AS(config_from_toml("[detectr]\n"), ValidationError);
  CHECK_THROWS_AS(config_from_toml("[matching]\nforeign_keys = [\"color\"]\n"), ValidationError);
  CHECK_THROWS_AS(config_from_toml("[matching]\nforeign_keys = []\n"), ValidationError);
  CHECK_THROWS_AS(config_from_toml("[comprehension]\nschema_keys = [\"a\", \"a\"]\n"), ValidationError);
  CHECK_THROWS_AS(config_from_toml("[evaluation]\niou_threshold = 0\n"), ValidationError);
  CHECK_THROWS_AS(config_from_toml("[retry]\nmax_attempts = \"three\"\n"), ValidationError);
  CHECK_THROWS_AS(config_from_toml("[comprehension]\nparallelism = 0\n"), ValidationError);
}
