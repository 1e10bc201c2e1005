// SPDX-License-Identifier: Apache-2.0
//
// Orchestration: generator MLM pretraining, supervised teacher/student
// training, the distillation loop with reinforced sample selection and the
// reward-weighted generator update, and the full per-seed pipeline.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "l2a/augment.hpp"
#include "l2a/config.hpp"
#include "l2a/distill.hpp"
#include "l2a/metrics.hpp"
#include "l2a/model.hpp"
#include "l2a/optim.hpp"
#include "l2a/selector.hpp"
#include "l2a/text.hpp"

namespace l2a {

// Everything downstream stages need, derived deterministically from
// (config, seed): loaded/synthesized splits, the subsampled target train
// set, the vocabulary (built from the data the pipeline is allowed to see:
// source train + subsampled target train), and concrete model configs.
struct PipelineData {
  Dataset source_train;
  Dataset target_pool;  // target train before subsampling
  Dataset target_train;
  Dataset target_val;
  Dataset target_test;
  Vocabulary vocab;
  ModelConfig teacher_cfg;
  ModelConfig student_cfg;
  ModelConfig generator_cfg;
};

PipelineData prepare_data(const RunConfig& cfg, std::uint64_t seed);

std::vector<EncodedExample> encode_dataset(const Dataset& ds,
                                           const Vocabulary& vocab,
                                           std::size_t max_len);

// Checkpoint-selection / reward metric: accuracy for classification,
// Pearson correlation for regression.
MetricValue primary_metric(const ParameterStore& params, const ModelConfig& mcfg,
                           const std::vector<EncodedExample>& data);

// Test-time report: accuracy+F1 or Pearson+Spearman.
nlohmann::json eval_report(const ParameterStore& params, const ModelConfig& mcfg,
                           const std::vector<EncodedExample>& data,
                           int num_classes);

// Mean masked-token negative log-likelihood for one sequence (full-vocab
// softmax, temperature 1); the generator pretraining objective.
Tensor mlm_masked_nll(const ParameterStore& params, const ModelConfig& cfg,
                      const EncodedExample& ex,
                      const std::vector<std::size_t>& masked_positions);

struct GeneratorPretrainReport {
  double final_train_loss = 0.0;
  double holdout_accuracy = 0.0;
  double chance_accuracy = 0.0;
  bool zero_epochs = false;
};

// 15%-style random masking over editable positions (at least one per
// sequence); reports held-out masked-token accuracy.
ParameterStore pretrain_generator(const PipelineData& data, const RunConfig& cfg,
                                  std::uint64_t seed,
                                  GeneratorPretrainReport* report = nullptr,
                                  std::ostream* csv = nullptr);

struct SupervisedReport {
  double best_val = 0.0;
  std::size_t best_epoch = 0;
  double final_train_loss = 0.0;
};

// Supervised training with best-validation checkpointing.
ParameterStore train_supervised(const ModelConfig& mcfg,
                                const std::vector<EncodedExample>& train,
                                const std::vector<EncodedExample>& val,
                                double lr, std::size_t epochs,
                                std::size_t batch_size, std::uint64_t seed,
                                SupervisedReport* report = nullptr,
                                std::ostream* csv = nullptr);

// Teacher sees source + subsampled target; student-FT sees target only.
ParameterStore train_teacher(const PipelineData& data, const RunConfig& cfg,
                             std::uint64_t seed, SupervisedReport* report = nullptr,
                             std::ostream* csv = nullptr);
ParameterStore train_student_ft(const PipelineData& data, const RunConfig& cfg,
                                std::uint64_t seed,
                                SupervisedReport* report = nullptr,
                                std::ostream* csv = nullptr);

// Controls which parts of the distillation loop are live. The plain-KD path
// and the degenerate selector-on/identity-augmentation path are the same
// loop under different flags, which is what makes their student updates
// bit-identical.
struct DistillMode {
  bool sample_augment = true;    // false: one unedited copy per example
  bool force_select = false;     // true: every sample selected, policy idle
  bool update_generator = true;  // weighted-MLE generator step per batch
  bool update_policy = true;     // REINFORCE at epoch end
  bool compute_rewards = true;   // per-batch validation reward
};

DistillMode plain_kd_mode();      // identity corpus, all selected, no RL
DistillMode static_aug_mode();    // sampled corpus, all selected, no RL
DistillMode l2a_mode();           // the full method
DistillMode degenerate_l2a_mode();  // selector forced on + identity corpus

struct GeneratorUpdateReport {
  bool skipped = true;  // no substituted positions in the batch
  bool flagged_small_batch = false;
  double loss = 0.0;
  std::vector<double> weights;
};

// -sum_i w_i log P_G(z_i|x_i): each sample is scored by one forward pass
// with all its substituted positions masked; per-position log-softmax at
// temp_T over the allowed set (reserved ids and the pre-edit token
// excluded), matching how the words were proposed. Samples without
// substitutions contribute nothing.
Tensor generator_weighted_nll(const ParameterStore& generator,
                              const ModelConfig& gen_cfg,
                              const std::vector<const AugmentedSample*>& batch,
                              const std::vector<double>& weights, double temp_T);

// Reward-weighted MLE step: raw weight = log_ps + policy score, min-max
// normalized to [0,1] over the samples that enter the loss (sigmoid
// fallback when fewer than two, flagged; all-equal maps to 1.0).
GeneratorUpdateReport generator_l2a_update(
    ParameterStore& generator, const ModelConfig& gen_cfg,
    const std::vector<const AugmentedSample*>& batch,
    const std::vector<double>& policy_scores, double temp_T, Adam& opt);

struct DistillResult {
  ParameterStore student;  // best-validation params (includes "distill.w")
  std::vector<double> val_history;  // per-epoch primary metric
  double best_val = 0.0;
  std::size_t best_epoch = 0;
  std::vector<double> rewards;  // per step, all epochs concatenated
  ParameterStore policy;
  ParameterStore generator;  // possibly updated copy
};

// generator may be null only when mode.sample_augment is false.
DistillResult distill_run(const PipelineData& data, const RunConfig& cfg,
                          std::uint64_t seed, const ParameterStore& teacher,
                          const ParameterStore* generator,
                          const DistillMode& mode,
                          std::ostream* metrics_csv = nullptr);

// Stage wrappers with artifact reuse: load the checkpoint for
// (config-stage-hash, seed) if present, otherwise compute and save it.
ParameterStore ensure_generator(const RunConfig& cfg, std::uint64_t seed,
                                const PipelineData& data);
ParameterStore ensure_teacher(const RunConfig& cfg, std::uint64_t seed,
                              const PipelineData& data);
nlohmann::json ensure_student_ft(const RunConfig& cfg, std::uint64_t seed,
                                 const PipelineData& data);
nlohmann::json ensure_kd_noaug(const RunConfig& cfg, std::uint64_t seed,
                               const PipelineData& data,
                               const ParameterStore& teacher);
// Distillation on a statically sampled corpus (no selector, no generator
// updates); pretrains the generator on demand.
nlohmann::json ensure_kd_static(const RunConfig& cfg, std::uint64_t seed,
                                const PipelineData& data,
                                const ParameterStore& teacher);

// Full per-seed pipeline; emits the comparison report
// {task, seed, param_counts, teacher_ft, student_ft, kd_noaug, l2a}.
nlohmann::json run_l2a(const RunConfig& cfg, std::uint64_t seed,
                       const DistillMode& mode = l2a_mode());

}  // namespace l2a
