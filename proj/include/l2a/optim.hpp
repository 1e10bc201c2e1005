// SPDX-License-Identifier: Apache-2.0
//
// Adam with bias correction; beta2 follows the training setup used across
// the project (0.998).
#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "l2a/tensor.hpp"

namespace l2a {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.998;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(ParameterStore& params, AdamConfig cfg);

  // Applies one update from the gradients currently accumulated in `params`.
  void step();
  void set_lr(double lr) { cfg_.lr = lr; }
  double lr() const { return cfg_.lr; }

 private:
  ParameterStore* params_;
  AdamConfig cfg_;
  std::size_t t_ = 0;
  std::unordered_map<std::string, std::vector<double>> m_;
  std::unordered_map<std::string, std::vector<double>> v_;
};

}  // namespace l2a
