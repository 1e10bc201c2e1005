// SPDX-License-Identifier: Apache-2.0
#include "l2a/report.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "l2a/common.hpp"

namespace l2a {

namespace {

constexpr const char* kMethods[] = {"student_ft", "kd_noaug", "l2a",
                                    "teacher_ft"};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::pair<double, double> mean_stdev(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

// Metric keys of one method entry, in report order: best_val first, then the
// numeric test metrics (flags and counts skipped).
std::vector<std::string> metric_keys(const nlohmann::json& method_entry) {
  std::vector<std::string> keys = {"best_val"};
  if (method_entry.contains("test"))
    for (const auto& [k, val] : method_entry.at("test").items())
      if (val.is_number() && k != "n") keys.push_back(k);
  return keys;
}

double metric_value(const nlohmann::json& method_entry, const std::string& key) {
  if (key == "best_val") return method_entry.at("best_val").get<double>();
  return method_entry.at("test").at(key).get<double>();
}

}  // namespace

AggregateReport report_aggregate(const std::vector<nlohmann::json>& seed_reports) {
  if (seed_reports.empty())
    throw DataError("report_aggregate: no seed reports given");
  AggregateReport out;
  out.task = seed_reports.front().at("task").get<std::string>();
  for (const auto& r : seed_reports)
    if (r.at("task").get<std::string>() != out.task)
      throw DataError("report_aggregate: mixed tasks (" + out.task + " vs " +
                      r.at("task").get<std::string>() + ")");

  for (const char* method : kMethods) {
    bool everywhere = true;
    for (const auto& r : seed_reports)
      if (!r.contains(method)) everywhere = false;
    if (!everywhere) continue;

    const auto keys = metric_keys(seed_reports.front().at(method));
    for (const auto& key : keys) {
      std::vector<double> vals;
      vals.reserve(seed_reports.size());
      for (const auto& r : seed_reports) {
        const auto& entry = r.at(method);
        if (key != "best_val" &&
            (!entry.contains("test") || !entry.at("test").contains(key)))
          throw DataError("report_aggregate: metric " + key +
                          " missing for method " + method + " in some seed");
        vals.push_back(metric_value(entry, key));
      }
      const auto [mean, stdev] = mean_stdev(vals);
      out.rows.push_back({method, key, mean, stdev, vals.size()});
    }
  }
  if (out.rows.empty())
    throw DataError("report_aggregate: no known method entries in the reports");
  return out;
}

std::vector<nlohmann::json> load_run_reports(const std::vector<std::string>& dirs) {
  std::vector<nlohmann::json> out;
  out.reserve(dirs.size());
  for (const auto& dir : dirs) {
    const std::string path = dir + "/comparison.json";
    if (!std::filesystem::exists(path))
      throw DataError("load_run_reports: missing run report " + path);
    std::ifstream in(path);
    if (!in) throw DataError("load_run_reports: cannot read " + path);
    nlohmann::json j;
    in >> j;
    out.push_back(std::move(j));
  }
  return out;
}

std::string aggregate_csv(const AggregateReport& report) {
  std::ostringstream out;
  out << "method,metric,mean,stdev,n\n";
  for (const auto& row : report.rows)
    out << row.method << ',' << row.metric << ',' << fmt(row.mean) << ','
        << fmt(row.stdev) << ',' << row.n << "\n";
  return out.str();
}

std::string plot_data(
    const std::vector<std::pair<double, AggregateReport>>& series) {
  std::ostringstream out;
  out << "# x method metric mean stdev n\n";
  for (const auto& [x, report] : series)
    for (const auto& row : report.rows)
      out << fmt(x) << ' ' << row.method << ' ' << row.metric << ' '
          << fmt(row.mean) << ' ' << fmt(row.stdev) << ' ' << row.n << "\n";
  return out.str();
}

}  // namespace l2a
