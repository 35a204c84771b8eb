#include <doctest.h>

#include <functional>
#include <string>

#include "gridsynth/caseio.hpp"
#include "gridsynth/error.hpp"
#include "gridsynth/pipeline.hpp"
#include "gridsynth/sizing.hpp"
#include "temp_dir.hpp"

using namespace gridsynth;
using namespace gridsynth::pipeline;

namespace {

const char* kConfig = "data/fixture30/config.json";

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ValidationError& e) {
    return e.what();
  }
  return {};
}

nlohmann::json fixture_json() { return nlohmann::json::parse(read_file(kConfig)); }

}  // namespace

TEST_CASE("config survives a JSON round trip") {
  auto cfg = read_config(kConfig);
  auto once = config_to_json(cfg);
  auto again = config_to_json(config_from_json(nlohmann::json::parse(once.dump())));
  CHECK(once.dump() == again.dump());
  CHECK(cfg.eval_hours == 744);
  CHECK(cfg.stack_windows.size() == 2);
  CHECK(cfg.checkpoint_dir == cfg.output_dir / "checkpoints");
}

TEST_CASE("unknown config keys are rejected by name") {
  auto j = fixture_json();
  j["sizing"] = {{"lamda", 0.5}};
  auto msg = error_of([&] { config_from_json(j, "data/fixture30"); });
  CHECK(msg.find("lamda") != std::string::npos);

  j = fixture_json();
  j["extra"] = 1;
  msg = error_of([&] { config_from_json(j, "data/fixture30"); });
  CHECK(msg.find("extra") != std::string::npos);
}

TEST_CASE("invalid settings fail validation") {
  auto cfg = read_config(kConfig);
  cfg.eval_hours = -1;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("stage names parse back") {
  for (auto s : kAllStages) CHECK(parse_stage(to_string(s)) == s);
  CHECK_THROWS_AS(parse_stage("sizes"), ValidationError);
}

TEST_CASE("a corrupt row halts ingest with the file and line") {
  TempDir dir("pipeline_corrupt");
  auto cfg = read_config(kConfig);
  auto text = read_file(cfg.inputs.generators);
  auto at = text.find(",600,");
  REQUIRE(at != std::string::npos);
  text.replace(at, 5, ",six hundred,");
  cfg.inputs.generators = dir.path / "generators.csv";
  write_file(cfg.inputs.generators, text);
  cfg.output_dir = dir.path / "out";
  cfg.checkpoint_dir = dir.path / "out" / "checkpoints";
  auto msg = error_of([&] { run_pipeline(cfg); });
  CHECK(msg.find("stage 'ingest'") != std::string::npos);
  CHECK(msg.find("generators.csv:2") != std::string::npos);
  CHECK(!std::filesystem::exists(checkpoint_path(cfg, Stage::kTopology)));
}

TEST_CASE("resuming from a checkpoint reproduces the uninterrupted run") {
  TempDir dir("pipeline_resume");
  auto cfg = read_config(kConfig);
  cfg.output_dir = dir.path / "a";
  cfg.checkpoint_dir = dir.path / "a" / "checkpoints";
  auto full = run_pipeline(cfg, Stage::kIngest, Stage::kReactive);
  REQUIRE(std::filesystem::exists(checkpoint_path(cfg, Stage::kAssign) / "case.m"));
  auto full_case = caseio::export_case(full.model).matpower;

  auto sized = run_pipeline(cfg, Stage::kScenarios, Stage::kReactive);
  CHECK(caseio::export_case(sized.model).matpower == full_case);
  CHECK(sizing::trace_jsonl(sized.sizing) == sizing::trace_jsonl(full.sizing));

  auto last = run_pipeline(cfg, Stage::kReactive, Stage::kReactive);
  CHECK(caseio::export_case(last.model).matpower == full_case);
}

TEST_CASE("resuming without a checkpoint names the missing stage") {
  TempDir dir("pipeline_missing");
  auto cfg = read_config(kConfig);
  cfg.output_dir = dir.path;
  cfg.checkpoint_dir = dir.path / "checkpoints";
  auto msg = error_of([&] { run_pipeline(cfg, Stage::kSize, Stage::kSize); });
  CHECK(msg.find("stage 'size'") != std::string::npos);
}
