// SPDX-License-Identifier: Apache-2.0
//
// Run configuration: one JSON document describing task, data, model
// architectures, loss/sampler/selector settings, optimization, seeds, and
// optional sweep grids. Strictly validated: unknown keys are rejected with
// their full path. Artifact paths derive from (command, config-hash, seed).
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "l2a/augment.hpp"
#include "l2a/distill.hpp"
#include "l2a/model.hpp"
#include "l2a/selector.hpp"
#include "l2a/text.hpp"

namespace l2a {

struct DataConfig {
  bool use_synth = true;
  SynthSpec synth;
  std::string source_train_path;
  std::string target_train_path;
  std::string target_val_path;
  std::string target_test_path;
  std::size_t n_per_class = 40;
  std::size_t max_len = 12;
  std::size_t min_freq = 1;
};

struct ArchConfig {
  std::size_t layers = 2;
  std::size_t hidden = 32;
  std::size_t heads = 2;
  std::size_t ffn = 128;
};

struct TrainSettings {
  std::size_t batch_size = 16;
  double teacher_lr = 2e-3;
  std::size_t teacher_epochs = 12;
  double student_lr = 2e-3;
  std::size_t student_ft_epochs = 12;
  double generator_lr = 5e-4;
  std::size_t generator_pretrain_epochs = 15;
  double mask_rate = 0.15;
  std::size_t distill_epochs = 5;
};

struct SweepConfig {
  std::vector<std::size_t> n_per_class;
  std::vector<double> alpha;
  std::vector<double> temp_T;
  bool empty() const { return n_per_class.empty() && alpha.empty() && temp_T.empty(); }
};

struct RunConfig {
  TaskKind task = TaskKind::classification;
  std::string output_dir = "runs";
  std::vector<std::uint64_t> seeds = {1};
  DataConfig data;
  // Head counts match so attention maps pair index-to-index.
  ArchConfig teacher{4, 64, 4, 256};
  ArchConfig student{2, 32, 4, 128};
  ArchConfig generator{4, 64, 4, 256};
  KDConfig kd;
  SamplerConfig sampler;
  SelectorConfig selector;
  TrainSettings train;
  SweepConfig sweep;

  void validate() const;
};

RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::string& path);
nlohmann::json config_to_json(const RunConfig& cfg);  // canonical, all fields

// FNV-1a over a canonical JSON dump; 16 hex chars.
std::string json_hash(const nlohmann::json& j);

// Hash of the fields that are semantically meaningful for `command`
// (output_dir, seeds and sweep grids are excluded everywhere; upstream
// stages exclude downstream-only settings so ablations share checkpoints).
std::string stage_hash(const RunConfig& cfg, const std::string& command);

// output_dir/<command>/<stage-hash>/<seed>; created on demand.
std::string artifact_dir(const RunConfig& cfg, const std::string& command,
                         std::uint64_t seed, bool create = false);

}  // namespace l2a
