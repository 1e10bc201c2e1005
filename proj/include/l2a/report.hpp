// SPDX-License-Identifier: Apache-2.0
//
// Cross-seed aggregation of per-seed comparison reports into a
// method x metric table (mean and stdev) plus plain columnar plot data.
#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace l2a {

struct AggregateRow {
  std::string method;
  std::string metric;
  double mean = 0.0;
  double stdev = 0.0;  // sample stdev; 0 for a single seed
  std::size_t n = 0;
};

struct AggregateReport {
  std::string task;
  std::vector<AggregateRow> rows;
};

// Input: per-seed reports as emitted by the pipeline (each holds a "task"
// tag and per-method objects with "best_val" and a "test" metric block).
// All reports must agree on task and metric keys; mixing tasks is an error.
AggregateReport report_aggregate(const std::vector<nlohmann::json>& seed_reports);

// Reads <dir>/comparison.json for each completed run directory; a missing
// directory or file is an error that names the offender.
std::vector<nlohmann::json> load_run_reports(const std::vector<std::string>& dirs);

// "method,metric,mean,stdev,n" CSV.
std::string aggregate_csv(const AggregateReport& report);

// Long-format columnar text, one series point per aggregate: each line is
// "x method metric mean stdev n". Ready for any plotting tool; no rendering.
std::string plot_data(
    const std::vector<std::pair<double, AggregateReport>>& series);

}  // namespace l2a
