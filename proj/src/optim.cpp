// SPDX-License-Identifier: Apache-2.0
#include "l2a/optim.hpp"

#include <cmath>

namespace l2a {

Adam::Adam(ParameterStore& params, AdamConfig cfg) : params_(&params), cfg_(cfg) {
  if (!(cfg.lr > 0.0) || !(cfg.eps > 0.0) || cfg.beta1 < 0.0 || cfg.beta1 >= 1.0 ||
      cfg.beta2 < 0.0 || cfg.beta2 >= 1.0)
    throw ConfigError("adam: invalid hyperparameters");
  for (const auto& name : params.names()) {
    const std::size_t n = params.at(name).size();
    m_[name].assign(n, 0.0);
    v_[name].assign(n, 0.0);
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (const auto& name : params_->names()) {
    Tensor& p = params_->at(name);
    if (!p.requires_grad()) continue;
    const std::vector<double>& g = p.grad();
    std::vector<double>& m = m_[name];
    std::vector<double>& v = v_[name];
    std::vector<double>& val = p.mutable_values();
    for (std::size_t i = 0; i < val.size(); ++i) {
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      val[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

}  // namespace l2a
