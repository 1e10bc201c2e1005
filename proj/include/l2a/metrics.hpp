// SPDX-License-Identifier: Apache-2.0
//
// Task metrics: accuracy, F1, Pearson, Spearman. Pure functions over
// prediction/label vectors; used for rewards, checkpoint selection and
// final reports.
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "l2a/common.hpp"

namespace l2a {

// `degenerate` marks values that are defined by convention rather than by the
// formula: vacuous F1 classes (no true and no predicted positives → 1.0) and
// correlations of constant vectors (→ 0.0).
struct MetricValue {
  double value = 0.0;
  bool degenerate = false;
};

struct MetricReport {
  std::string name;
  double value = 0.0;
  std::string split;
  std::size_t n = 0;
};

MetricValue accuracy(const std::vector<int>& preds, const std::vector<int>& labels);

// Binary F1 for `positive_class`; both-zero precision/recall → 0 unless the
// class is absent from preds and labels entirely (vacuous → 1.0, flagged).
MetricValue f1_binary(const std::vector<int>& preds, const std::vector<int>& labels,
                      int positive_class);

// Unweighted mean of per-class binary F1 over classes 0..num_classes-1.
MetricValue f1_macro(const std::vector<int>& preds, const std::vector<int>& labels,
                     int num_classes);

// Dispatch: binary positive-class-1 F1 for 2-class tasks, macro otherwise.
MetricValue f1(const std::vector<int>& preds, const std::vector<int>& labels,
               int num_classes);

MetricValue pearson(const std::vector<double>& x, const std::vector<double>& y);

// Pearson over average ranks; ties receive the mean of their rank range.
MetricValue spearman(const std::vector<double>& x, const std::vector<double>& y);

std::vector<double> average_ranks(const std::vector<double>& x);

}  // namespace l2a
