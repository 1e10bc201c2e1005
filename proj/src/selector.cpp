// SPDX-License-Identifier: Apache-2.0
#include "l2a/selector.hpp"

#include <algorithm>
#include <cmath>

#include "l2a/distill.hpp"

namespace l2a {

void SelectorConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0))
    throw ConfigError("selector: gamma must be in (0,1]");
  if (!(lr > 0.0)) throw ConfigError("selector: lr must be positive");
  if (hidden < 1) throw ConfigError("selector: hidden width must be >= 1");
}

std::size_t feature_dim(TaskKind task, int num_classes) {
  const std::size_t k =
      task == TaskKind::classification ? static_cast<std::size_t>(num_classes) : 1;
  return 3 * k + 3;  // t probs, s probs, |diff|, dark, log_ps, domain
}

SelectorState featurize(const Tensor& teacher_logits,
                        const Tensor& student_logits, double t_kd,
                        TaskKind task, double log_ps_standardized,
                        Domain domain) {
  NoGradGuard ng;
  if (teacher_logits.shape() != student_logits.shape())
    throw ShapeError("featurize: logits shape mismatch " +
                     shape_str(teacher_logits.shape()) + " vs " +
                     shape_str(student_logits.shape()));
  SelectorState s;
  std::vector<double> tp, sp;
  if (task == TaskKind::classification) {
    Tensor t = Tensor::from_values(teacher_logits.shape(), teacher_logits.values(), false);
    Tensor u = Tensor::from_values(student_logits.shape(), student_logits.values(), false);
    tp = softmax_rows(t, t_kd).values();
    sp = softmax_rows(u, t_kd).values();
  } else {
    tp = teacher_logits.values();
    sp = student_logits.values();
  }
  const double dark =
      dark_loss(student_logits, teacher_logits, t_kd, task).item();
  s.features.insert(s.features.end(), tp.begin(), tp.end());
  s.features.insert(s.features.end(), sp.begin(), sp.end());
  for (std::size_t i = 0; i < tp.size(); ++i)
    s.features.push_back(std::abs(tp[i] - sp[i]));
  s.features.push_back(dark);
  s.features.push_back(log_ps_standardized);
  s.features.push_back(domain == Domain::source ? 1.0 : 0.0);
  for (double f : s.features)
    if (!is_finite(f)) throw Error("featurize: non-finite feature");
  return s;
}

std::vector<double> standardize(const std::vector<double>& v) {
  std::vector<double> out(v.size(), 0.0);
  if (v.size() < 2) return out;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size());
  if (var <= 0.0) return out;
  const double inv_std = 1.0 / std::sqrt(var);
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - mean) * inv_std;
  return out;
}

ParameterStore init_policy(std::size_t feature_dim, std::size_t hidden,
                           std::uint64_t seed) {
  if (feature_dim < 1 || hidden < 1)
    throw ConfigError("init_policy: dimensions must be >= 1");
  Rng rng(seed);
  ParameterStore p;
  const double s1 = 1.0 / std::sqrt(static_cast<double>(feature_dim));
  p.add("policy.w1", Tensor::uniform({feature_dim, hidden}, s1, rng, true));
  p.add("policy.b1", Tensor::zeros({1, hidden}, true));
  // Zero final layer: initial probability exactly 0.5 everywhere.
  p.add("policy.w2", Tensor::zeros({hidden, 1}, true));
  p.add("policy.b2", Tensor::zeros({1, 1}, true));
  return p;
}

Tensor policy_probs(const ParameterStore& policy,
                    const std::vector<SelectorState>& states) {
  if (states.empty()) throw Error("policy_probs: empty state batch");
  const std::size_t f = policy.at("policy.w1").rows();
  std::vector<double> flat;
  flat.reserve(states.size() * f);
  for (const auto& s : states) {
    if (s.features.size() != f)
      throw ShapeError("policy_probs: state dim " +
                       std::to_string(s.features.size()) +
                       " does not match policy input " + std::to_string(f));
    flat.insert(flat.end(), s.features.begin(), s.features.end());
  }
  Tensor x = Tensor::from_values({states.size(), f}, std::move(flat), false);
  Tensor h = tanh_op(add_rowvec(matmul(x, policy.at("policy.w1")),
                                policy.at("policy.b1")));
  return sigmoid(add_rowvec(matmul(h, policy.at("policy.w2")),
                            policy.at("policy.b2")));
}

double policy_forward(const ParameterStore& policy, const SelectorState& state) {
  NoGradGuard ng;
  return policy_probs(policy, {state}).item();
}

std::vector<int> select_actions(const std::vector<double>& probs, Rng& rng,
                                ActionMode mode) {
  std::vector<int> actions(probs.size(), 0);
  bool any = false;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const bool on = mode == ActionMode::sample ? rng.bernoulli(probs[i])
                                               : probs[i] >= 0.5;
    actions[i] = on ? 1 : 0;
    any = any || on;
  }
  if (!any && !probs.empty()) {
    const std::size_t best = static_cast<std::size_t>(
        std::max_element(probs.begin(), probs.end()) - probs.begin());
    actions[best] = 1;  // never train on an empty batch
  }
  return actions;
}

double step_reward(const MetricValue& after, const MetricValue& before,
                   bool* flagged) {
  if (flagged) *flagged = after.degenerate || before.degenerate;
  return (after.degenerate ? 0.0 : after.value) -
         (before.degenerate ? 0.0 : before.value);
}

std::vector<double> discounted_returns(const std::vector<double>& rewards,
                                       double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0))
    throw Error("discounted_returns: gamma must be in (0,1]");
  std::vector<double> returns(rewards.size(), 0.0);
  double acc = 0.0;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    acc = rewards[i] + gamma * acc;
    returns[i] = acc;
  }
  return returns;
}

PolicyGradientReport policy_gradient(ParameterStore& policy,
                                     const EpisodeHistory& history,
                                     BaselineState& baseline,
                                     const PolicyUpdateOptions& opts) {
  if (history.transitions.empty()) throw Error("policy_gradient: empty history");
  std::vector<double> rewards;
  rewards.reserve(history.transitions.size());
  for (const auto& t : history.transitions) rewards.push_back(t.reward);

  PolicyGradientReport report;
  report.returns = discounted_returns(rewards, history.gamma);
  std::vector<double> used = opts.standardize_returns
                                 ? standardize(report.returns)
                                 : report.returns;
  report.advantages.resize(used.size());
  for (std::size_t b = 0; b < used.size(); ++b)
    report.advantages[b] = used[b] - (opts.use_baseline ? baseline.value : 0.0);

  double episode_mean = 0.0;
  for (double r : used) episode_mean += r;
  episode_mean /= static_cast<double>(used.size());
  if (opts.use_baseline) {
    baseline.value = baseline.initialized
                         ? BaselineState::kDecay * baseline.value +
                               (1.0 - BaselineState::kDecay) * episode_mean
                         : episode_mean;
    baseline.initialized = true;
  }

  // Flatten the episode into one forward pass.
  std::vector<SelectorState> states;
  std::vector<double> act, adv;
  for (std::size_t b = 0; b < history.transitions.size(); ++b) {
    const auto& tr = history.transitions[b];
    if (tr.states.size() != tr.actions.size())
      throw Error("policy_gradient: state/action length mismatch");
    for (std::size_t i = 0; i < tr.states.size(); ++i) {
      states.push_back(tr.states[i]);
      act.push_back(static_cast<double>(tr.actions[i]));
      adv.push_back(report.advantages[b]);
    }
  }

  Tensor p = policy_probs(policy, states);
  const Shape shape = p.shape();
  Tensor a = Tensor::from_values(shape, std::move(act), false);
  Tensor w = Tensor::from_values(shape, std::move(adv), false);
  Tensor ones = Tensor::full(shape, 1.0, false);
  // a*log(p) + (1-a)*log(1-p), weighted by the advantage; surrogate to
  // minimize is the negation.
  Tensor ll = add(mul(a, log_op(p)), mul(sub(ones, a), log_op(sub(ones, p))));
  Tensor loss = neg(sum(mul(w, ll)));
  report.surrogate_loss = loss.item();

  policy.zero_grads();
  backward(loss);
  return report;
}

PolicyGradientReport policy_update(ParameterStore& policy,
                                   const EpisodeHistory& history, Adam& opt,
                                   BaselineState& baseline,
                                   const PolicyUpdateOptions& opts) {
  PolicyGradientReport report = policy_gradient(policy, history, baseline, opts);
  opt.step();
  return report;
}

}  // namespace l2a
