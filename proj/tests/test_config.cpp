// SPDX-License-Identifier: Apache-2.0
//
// Configuration, hashing, checkpoint and aggregation checks: strict schema
// validation, stage-hash sensitivity, bit-exact checkpoint round-trips, and
// the cross-seed report table.
#include <doctest.h>

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "l2a/checkpoint.hpp"
#include "l2a/config.hpp"
#include "l2a/report.hpp"
#include "l2a/tensor.hpp"

using namespace l2a;
using nlohmann::json;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("config defaults survive a canonical round-trip") {
  RunConfig def;
  json j = config_to_json(def);
  RunConfig back = config_from_json(j);
  CHECK(config_to_json(back) == j);
}

TEST_CASE("unknown keys are rejected with their field path") {
  json j = config_to_json(RunConfig{});
  j["data"]["bogus"] = 1;
  try {
    config_from_json(j);
    CHECK(false);
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("data.bogus") != std::string::npos);
  }
}

TEST_CASE("top-level unknown keys are also rejected") {
  json j = config_to_json(RunConfig{});
  j["extra_section"] = json::object();
  CHECK_THROWS_AS(config_from_json(j), ConfigError);
}

TEST_CASE("json hashing is order-insensitive and content-sensitive") {
  json a = {{"x", 1}, {"y", 2}};
  json b = {{"y", 2}, {"x", 1}};
  CHECK(json_hash(a) == json_hash(b));
  json c = {{"x", 1}, {"y", 3}};
  CHECK(json_hash(a) != json_hash(c));
  CHECK(json_hash(a).size() == 16);
}

TEST_CASE("stage hashes react only to their own stage's settings") {
  RunConfig base;
  RunConfig teacher_lr = base;
  teacher_lr.train.teacher_lr *= 2.0;
  // Teacher training sees the change; the generator stage does not.
  CHECK(stage_hash(base, "train-teacher") !=
        stage_hash(teacher_lr, "train-teacher"));
  CHECK(stage_hash(base, "pretrain-generator") ==
        stage_hash(teacher_lr, "pretrain-generator"));
  CHECK(stage_hash(base, "student-ft") == stage_hash(teacher_lr, "student-ft"));

  RunConfig alpha = base;
  alpha.sampler.alpha = 0.3;
  CHECK(stage_hash(base, "distill-l2a") != stage_hash(alpha, "distill-l2a"));
  CHECK(stage_hash(base, "train-teacher") == stage_hash(alpha, "train-teacher"));
  CHECK(stage_hash(base, "distill-noaug") ==
        stage_hash(alpha, "distill-noaug"));

  RunConfig kd_flags = base;
  kd_flags.kd.use_att = false;
  CHECK(stage_hash(base, "distill-noaug") !=
        stage_hash(kd_flags, "distill-noaug"));
}

TEST_CASE("output location and seed list never affect stage hashes") {
  RunConfig base;
  RunConfig moved = base;
  moved.output_dir = "elsewhere";
  moved.seeds = {7, 8, 9};
  for (const char* cmd : {"synth-data", "pretrain-generator", "train-teacher",
                          "student-ft", "distill-noaug", "distill",
                          "distill-l2a", "evaluate"})
    CHECK(stage_hash(base, cmd) == stage_hash(moved, cmd));
}

TEST_CASE("unknown commands cannot be hashed") {
  CHECK_THROWS_AS(stage_hash(RunConfig{}, "fabricate"), ConfigError);
}

TEST_CASE("artifact paths are derivable from config alone") {
  RunConfig cfg;
  cfg.output_dir = temp_path("l2a_test_artifacts");
  std::string p = artifact_dir(cfg, "train-teacher", 3);
  CHECK(p == cfg.output_dir + "/train-teacher/" +
                 stage_hash(cfg, "train-teacher") + "/3");
  // The no-augmentation variant shares the distill directory under its own
  // hash, so both variants can coexist.
  std::string noaug = artifact_dir(cfg, "distill-noaug", 3);
  std::string aug = artifact_dir(cfg, "distill", 3);
  CHECK(noaug.find("/distill/") != std::string::npos);
  CHECK(noaug != aug);
}

TEST_CASE("configs with synth and file data at once are rejected") {
  json j = config_to_json(RunConfig{});
  j["data"]["source_train_path"] = "some.jsonl";
  CHECK_THROWS_AS(config_from_json(j), ConfigError);
}

TEST_CASE("checkpoints round-trip doubles bit-exactly") {
  ParameterStore params;
  params.add("w", Tensor::from_values(
                      {2, 2}, {3.141592653589793, -0.0, 1e-300, -2.5e17}, true));
  params.add("b", Tensor::from_values({1, 1}, {0.1 + 0.2}, true));
  json cfg = {{"kind", "unit"}, {"n", 3}};
  std::string path = temp_path("l2a_test_ckpt.bin");
  save_checkpoint(path, cfg, params);
  Checkpoint back = load_checkpoint(path);
  CHECK(back.config == cfg);
  REQUIRE(back.params.names() == params.names());
  for (const std::string& name : params.names()) {
    const auto& a = params.at(name).values();
    const auto& b = back.params.at(name).values();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
      CHECK(std::bit_cast<std::uint64_t>(a[i]) ==
            std::bit_cast<std::uint64_t>(b[i]));
  }
  std::remove(path.c_str());
}

TEST_CASE("corrupt checkpoints are rejected") {
  std::string path = temp_path("l2a_test_ckpt_bad.bin");
  {
    std::ofstream out(path, std::ios::binary);
    out << "definitely not a checkpoint";
  }
  CHECK_THROWS_AS(load_checkpoint(path), Error);
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_checkpoint(temp_path("l2a_test_absent.bin")), Error);
}

TEST_CASE("model configs round-trip through json") {
  ModelConfig cfg;
  cfg.layers = 3;
  cfg.hidden = 24;
  cfg.heads = 3;
  cfg.ffn = 96;
  cfg.vocab_size = 57;
  cfg.max_len = 11;
  cfg.head = HeadKind::mlm;
  CHECK(model_config_from_json(model_config_to_json(cfg)) == cfg);
}

namespace {

json fake_report(double sft, double kd, double l2a, int seed) {
  auto method = [](double acc, double f1v) {
    return json{{"best_val", acc},
                {"test", {{"accuracy", acc}, {"f1", f1v}, {"n", 100}}}};
  };
  return json{{"task", "classification"},
              {"seed", seed},
              {"student_ft", method(sft, sft - 0.01)},
              {"kd_noaug", method(kd, kd - 0.01)},
              {"l2a", method(l2a, l2a - 0.01)}};
}

}  // namespace

TEST_CASE("aggregation produces one row per method and metric") {
  std::vector<json> reports = {fake_report(0.70, 0.80, 0.90, 1),
                               fake_report(0.74, 0.78, 0.92, 2),
                               fake_report(0.72, 0.82, 0.88, 3)};
  AggregateReport agg = report_aggregate(reports);
  CHECK(agg.task == "classification");
  // Three methods x three metrics (best_val, accuracy, f1).
  CHECK(agg.rows.size() == 9);
  bool found = false;
  for (const AggregateRow& row : agg.rows)
    if (row.method == "l2a" && row.metric == "accuracy") {
      found = true;
      CHECK(std::abs(row.mean - 0.90) < 1e-12);
      CHECK(std::abs(row.stdev - 0.02) < 1e-12);
      CHECK(row.n == 3);
    }
  CHECK(found);
}

TEST_CASE("single-seed aggregation reports zero spread") {
  AggregateReport agg = report_aggregate({fake_report(0.7, 0.8, 0.9, 1)});
  for (const AggregateRow& row : agg.rows) {
    CHECK(row.stdev == 0.0);
    CHECK(row.n == 1);
  }
}

TEST_CASE("mixed tasks cannot be aggregated") {
  json a = fake_report(0.7, 0.8, 0.9, 1);
  json b = fake_report(0.7, 0.8, 0.9, 2);
  b["task"] = "regression";
  CHECK_THROWS_AS(report_aggregate({a, b}), DataError);
}

TEST_CASE("aggregation requires consistent metrics across seeds") {
  json a = fake_report(0.7, 0.8, 0.9, 1);
  json b = fake_report(0.7, 0.8, 0.9, 2);
  b["l2a"]["test"].erase("f1");
  CHECK_THROWS_AS(report_aggregate({a, b}), DataError);
}

TEST_CASE("missing run directories are named in the error") {
  std::string absent = temp_path("l2a_test_no_such_run");
  try {
    load_run_reports({absent});
    CHECK(false);
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find(absent) != std::string::npos);
  }
}

TEST_CASE("the aggregate table renders as csv with a header") {
  AggregateReport agg = report_aggregate({fake_report(0.7, 0.8, 0.9, 1)});
  std::string csv = aggregate_csv(agg);
  CHECK(csv.rfind("method,metric,mean,stdev,n\n", 0) == 0);
  CHECK(csv.find("l2a,accuracy,") != std::string::npos);
}

TEST_CASE("plot data emits one line per series point and row") {
  AggregateReport agg = report_aggregate({fake_report(0.7, 0.8, 0.9, 1)});
  std::string out = plot_data({{20.0, agg}, {40.0, agg}});
  CHECK(out.find("# x method metric mean stdev n") != std::string::npos);
  CHECK(out.find("20 ") != std::string::npos);
  CHECK(out.find("40 ") != std::string::npos);
}
