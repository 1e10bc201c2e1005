// SPDX-License-Identifier: Apache-2.0
//
// Reinforced sample selector: featurization of (teacher, student) outputs,
// a small sigmoid policy network, and REINFORCE with an EMA baseline over
// epoch-long episodes (one batch = one step).
#pragma once

#include <cstdint>
#include <vector>

#include "l2a/metrics.hpp"
#include "l2a/model.hpp"
#include "l2a/optim.hpp"
#include "l2a/rng.hpp"
#include "l2a/tensor.hpp"
#include "l2a/text.hpp"

namespace l2a {

struct SelectorConfig {
  double gamma = 0.95;      // discount over batch steps
  double lr = 3e-5;         // policy learning rate
  std::size_t hidden = 128;  // policy hidden width

  void validate() const;
};

struct SelectorState {
  std::vector<double> features;
};

struct Transition {
  std::vector<SelectorState> states;
  std::vector<int> actions;  // 0/1 per sample
  double reward = 0.0;
};

struct EpisodeHistory {
  std::vector<Transition> transitions;
  double gamma = 0.95;
};

// Features per sample: teacher soft probs, student soft probs, |diff| probs
// (softened at t_kd), the sample's dark-loss value, per-batch-standardized
// log_ps, and a domain indicator. Regression uses the raw scalar outputs.
std::size_t feature_dim(TaskKind task, int num_classes);

SelectorState featurize(const Tensor& teacher_logits,
                        const Tensor& student_logits, double t_kd,
                        TaskKind task, double log_ps_standardized,
                        Domain domain);

// Zero-mean unit-variance; constant or single-element input maps to zeros.
std::vector<double> standardize(const std::vector<double>& v);

// Two-layer tanh MLP with sigmoid output; the final layer is zero-initialized
// so every sample starts at probability 0.5.
ParameterStore init_policy(std::size_t feature_dim, std::size_t hidden,
                           std::uint64_t seed);

double policy_forward(const ParameterStore& policy, const SelectorState& state);

// Graph-building batch version used by the REINFORCE update; returns an
// (n x 1) tensor of probabilities in (0,1).
Tensor policy_probs(const ParameterStore& policy,
                    const std::vector<SelectorState>& states);

enum class ActionMode { sample, threshold };

// sample: Bernoulli(p) per entry; threshold: p >= 0.5. An all-zero draw
// forces the highest-probability sample on.
std::vector<int> select_actions(const std::vector<double>& probs, Rng& rng,
                                ActionMode mode);

double step_reward(const MetricValue& after, const MetricValue& before,
                   bool* flagged = nullptr);

// returns[t] = sum_k gamma^k * rewards[t+k]
std::vector<double> discounted_returns(const std::vector<double>& rewards,
                                       double gamma);

struct BaselineState {
  double value = 0.0;
  bool initialized = false;
  static constexpr double kDecay = 0.9;
};

struct PolicyUpdateOptions {
  bool use_baseline = true;
  bool standardize_returns = true;
};

struct PolicyGradientReport {
  double surrogate_loss = 0.0;
  std::vector<double> returns;     // discounted, pre-standardization
  std::vector<double> advantages;  // what actually weighted the gradient
};

// Accumulates the REINFORCE gradient of
//   sum_b advantage_b * sum_i [a_i log p_i + (1-a_i) log(1-p_i)]
// into the policy's grads (ascent direction = negative surrogate). Also
// advances the EMA baseline with the episode's mean (standardized) return.
PolicyGradientReport policy_gradient(ParameterStore& policy,
                                     const EpisodeHistory& history,
                                     BaselineState& baseline,
                                     const PolicyUpdateOptions& opts = {});

PolicyGradientReport policy_update(ParameterStore& policy,
                                   const EpisodeHistory& history, Adam& opt,
                                   BaselineState& baseline,
                                   const PolicyUpdateOptions& opts = {});

}  // namespace l2a
