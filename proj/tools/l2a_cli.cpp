// SPDX-License-Identifier: Apache-2.0
//
// Command-line surface of the pipeline. Every command reads a JSON run
// configuration, runs for every listed seed, and writes artifacts under
// output_dir/<command>/<config-hash>/<seed>/.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "l2a/config.hpp"
#include "l2a/report.hpp"
#include "l2a/trainer.hpp"

namespace {

using namespace l2a;

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

int run_synth_data(const RunConfig& cfg) {
  if (!cfg.data.use_synth)
    throw ConfigError("synth-data requires a data.synth specification");
  for (std::uint64_t seed : cfg.seeds) {
    const PipelineData data = prepare_data(cfg, seed);
    const std::string dir = artifact_dir(cfg, "synth-data", seed, true);
    save_jsonl(data.source_train, dir + "/source_train.jsonl");
    save_jsonl(data.target_pool, dir + "/target_train.jsonl");
    save_jsonl(data.target_val, dir + "/target_val.jsonl");
    save_jsonl(data.target_test, dir + "/target_test.jsonl");
    std::cout << "seed " << seed << ": wrote " << dir << "\n";
  }
  return 0;
}

int run_pretrain_generator(const RunConfig& cfg) {
  for (std::uint64_t seed : cfg.seeds) {
    const PipelineData data = prepare_data(cfg, seed);
    ensure_generator(cfg, seed, data);
    const std::string dir = artifact_dir(cfg, "pretrain-generator", seed);
    std::ifstream in(dir + "/report.json");
    nlohmann::json j;
    in >> j;
    std::cout << "seed " << seed << ": holdout_accuracy="
              << j["holdout_accuracy"].get<double>()
              << " chance=" << j["chance_accuracy"].get<double>() << " -> "
              << dir << "\n";
  }
  return 0;
}

int run_train_teacher(const RunConfig& cfg) {
  for (std::uint64_t seed : cfg.seeds) {
    const PipelineData data = prepare_data(cfg, seed);
    ensure_teacher(cfg, seed, data);
    const std::string dir = artifact_dir(cfg, "train-teacher", seed);
    std::ifstream in(dir + "/report.json");
    nlohmann::json j;
    in >> j;
    std::cout << "seed " << seed << ": best_val="
              << j["best_val"].get<double>() << " -> " << dir << "\n";
  }
  return 0;
}

int run_distill(const RunConfig& cfg, bool no_aug) {
  for (std::uint64_t seed : cfg.seeds) {
    const PipelineData data = prepare_data(cfg, seed);
    const ParameterStore teacher = ensure_teacher(cfg, seed, data);
    const nlohmann::json j = no_aug
                                 ? ensure_kd_noaug(cfg, seed, data, teacher)
                                 : ensure_kd_static(cfg, seed, data, teacher);
    std::cout << "seed " << seed << ": best_val="
              << j["best_val"].get<double>() << " test=" << j["test"].dump()
              << "\n";
  }
  return 0;
}

int run_distill_l2a(const RunConfig& cfg) {
  for (std::uint64_t seed : cfg.seeds) {
    const nlohmann::json report = run_l2a(cfg, seed);
    std::cout << "seed " << seed
              << ": l2a=" << report["l2a"]["test"].dump()
              << " kd_noaug=" << report["kd_noaug"]["test"].dump()
              << " student_ft=" << report["student_ft"]["test"].dump() << "\n";
  }
  return 0;
}

std::vector<nlohmann::json> reports_for(const RunConfig& cfg) {
  std::vector<nlohmann::json> reports;
  reports.reserve(cfg.seeds.size());
  for (std::uint64_t seed : cfg.seeds) reports.push_back(run_l2a(cfg, seed));
  return reports;
}

int run_evaluate(const RunConfig& cfg) {
  const std::vector<nlohmann::json> reports = reports_for(cfg);
  const AggregateReport agg = report_aggregate(reports);
  const std::string dir =
      cfg.output_dir + "/evaluate/" + stage_hash(cfg, "evaluate");
  std::filesystem::create_directories(dir);
  write_text(dir + "/aggregate.csv", aggregate_csv(agg));
  write_text(dir + "/seed_reports.json", nlohmann::json(reports).dump(2) + "\n");
  std::cout << aggregate_csv(agg) << "wrote " << dir << "\n";
  return 0;
}

int run_sweep(const RunConfig& cfg) {
  if (cfg.sweep.empty())
    throw ConfigError("sweep: no grid values given under \"sweep\"");
  const std::string dir = cfg.output_dir + "/sweep/" + stage_hash(cfg, "sweep");
  std::filesystem::create_directories(dir);
  std::string combined = "dimension,x,method,metric,mean,stdev,n\n";

  auto run_grid = [&](const std::string& dim, const std::vector<double>& xs,
                      auto apply) {
    if (xs.empty()) return;
    std::vector<std::pair<double, AggregateReport>> series;
    for (double x : xs) {
      RunConfig c = cfg;
      c.sweep = {};
      apply(c, x);
      c.validate();
      std::cout << "sweep " << dim << "=" << x << "\n";
      series.emplace_back(x, report_aggregate(reports_for(c)));
    }
    for (const auto& [x, agg] : series)
      for (const auto& row : agg.rows)
        combined += dim + "," + std::to_string(x) + "," + row.method + "," +
                    row.metric + "," + std::to_string(row.mean) + "," +
                    std::to_string(row.stdev) + "," + std::to_string(row.n) +
                    "\n";
    write_text(dir + "/" + dim + ".dat", plot_data(series));
  };

  std::vector<double> sizes;
  for (std::size_t n : cfg.sweep.n_per_class)
    sizes.push_back(static_cast<double>(n));
  run_grid("n_per_class", sizes, [](RunConfig& c, double x) {
    c.data.n_per_class = static_cast<std::size_t>(x);
  });
  run_grid("alpha", cfg.sweep.alpha,
           [](RunConfig& c, double x) { c.sampler.alpha = x; });
  run_grid("temp_T", cfg.sweep.temp_T,
           [](RunConfig& c, double x) { c.sampler.temp_T = x; });

  write_text(dir + "/sweep.csv", combined);
  std::cout << combined << "wrote " << dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Low-resource knowledge distillation with learned augmentation and "
      "reinforced sample selection"};
  std::string config_path;
  app.add_option("-c,--config", config_path, "JSON run configuration")
      ->required();
  app.require_subcommand(1);

  app.add_subcommand("synth-data",
                     "Generate the synthetic source/target benchmark splits");
  app.add_subcommand("pretrain-generator",
                     "Masked-LM pretraining of the substitution generator");
  app.add_subcommand("train-teacher",
                     "Supervised teacher training on source + subsampled target");
  CLI::App* distill = app.add_subcommand(
      "distill", "Distill the teacher into the student on a sampled corpus");
  bool no_aug = false;
  distill->add_flag("--no-aug", no_aug,
                    "Train on the original examples only (no augmentation)");
  CLI::App* l2a_cmd = app.add_subcommand(
      "distill-l2a",
      "Full method: augmentation, reinforced selection, generator updates");
  bool wo_src = false, wo_tgt = false, wo_att = false, wo_hidden = false,
       wo_dark = false;
  l2a_cmd->add_flag("--wo-src", wo_src,
                    "Drop source-domain augmentation (n_source = 0)");
  l2a_cmd->add_flag("--wo-tgt", wo_tgt,
                    "Drop target-domain augmentation (n_target = 0)");
  l2a_cmd->add_flag("--wo-att", wo_att, "Disable the attention loss");
  l2a_cmd->add_flag("--wo-hidden", wo_hidden, "Disable the hidden-state loss");
  l2a_cmd->add_flag("--wo-dark", wo_dark, "Disable the soft-logit loss");
  app.add_subcommand("evaluate",
                     "Run every method for every seed and aggregate the results");
  app.add_subcommand("sweep",
                     "Grid runs over n_per_class / alpha / temp_T");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    RunConfig cfg = load_config(config_path);
    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "distill-l2a") {
      if (wo_src) cfg.sampler.n_source = 0;
      if (wo_tgt) cfg.sampler.n_target = 0;
      if (wo_att) cfg.kd.use_att = false;
      if (wo_hidden) cfg.kd.use_hidden = false;
      if (wo_dark) cfg.kd.use_dark = false;
    }
    cfg.validate();
    if (cmd == "synth-data") return run_synth_data(cfg);
    if (cmd == "pretrain-generator") return run_pretrain_generator(cfg);
    if (cmd == "train-teacher") return run_train_teacher(cfg);
    if (cmd == "distill") return run_distill(cfg, no_aug);
    if (cmd == "distill-l2a") return run_distill_l2a(cfg);
    if (cmd == "evaluate") return run_evaluate(cfg);
    if (cmd == "sweep") return run_sweep(cfg);
    std::cerr << "error: unknown command " << cmd << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
