// SPDX-License-Identifier: Apache-2.0
#include "l2a/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace l2a {

namespace {

void check_pair_lengths(std::size_t a, std::size_t b, const char* op) {
  if (a == 0) throw DataError(std::string(op) + ": empty input");
  if (a != b)
    throw DataError(std::string(op) + ": length mismatch " + std::to_string(a) +
                    " vs " + std::to_string(b));
}

}  // namespace

MetricValue accuracy(const std::vector<int>& preds, const std::vector<int>& labels) {
  check_pair_lengths(preds.size(), labels.size(), "accuracy");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (preds[i] == labels[i]) ++hits;
  return {static_cast<double>(hits) / static_cast<double>(preds.size()), false};
}

MetricValue f1_binary(const std::vector<int>& preds, const std::vector<int>& labels,
                      int positive_class) {
  check_pair_lengths(preds.size(), labels.size(), "f1");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool p = preds[i] == positive_class;
    const bool t = labels[i] == positive_class;
    if (p && t) ++tp;
    else if (p && !t) ++fp;
    else if (!p && t) ++fn;
  }
  if (tp == 0 && fp == 0 && fn == 0) return {1.0, true};  // class never occurs
  if (tp == 0) return {0.0, false};
  const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return {2.0 * precision * recall / (precision + recall), false};
}

MetricValue f1_macro(const std::vector<int>& preds, const std::vector<int>& labels,
                     int num_classes) {
  check_pair_lengths(preds.size(), labels.size(), "f1_macro");
  if (num_classes < 2) throw DataError("f1_macro: need at least 2 classes");
  double acc = 0.0;
  bool any_vacuous = false;
  for (int c = 0; c < num_classes; ++c) {
    MetricValue v = f1_binary(preds, labels, c);
    acc += v.value;
    any_vacuous = any_vacuous || v.degenerate;
  }
  return {acc / static_cast<double>(num_classes), any_vacuous};
}

MetricValue f1(const std::vector<int>& preds, const std::vector<int>& labels,
               int num_classes) {
  if (num_classes == 2) return f1_binary(preds, labels, 1);
  return f1_macro(preds, labels, num_classes);
}

MetricValue pearson(const std::vector<double>& x, const std::vector<double>& y) {
  check_pair_lengths(x.size(), y.size(), "pearson");
  if (x.size() < 2) throw DataError("pearson: need at least 2 points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return {0.0, true};  // constant input
  return {sxy / std::sqrt(sxx * syy), false};
}

std::vector<double> average_ranks(const std::vector<double>& x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&x](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based mean rank
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

MetricValue spearman(const std::vector<double>& x, const std::vector<double>& y) {
  check_pair_lengths(x.size(), y.size(), "spearman");
  if (x.size() < 2) throw DataError("spearman: need at least 2 points");
  return pearson(average_ranks(x), average_ranks(y));
}

}  // namespace l2a
