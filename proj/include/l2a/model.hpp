// SPDX-License-Identifier: Apache-2.0
//
// Mini transformer encoder (post-LN, learned positions) with a classifier,
// regressor, or masked-language-model head. Teacher, student and generator
// all share this skeleton and differ only in ModelConfig.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "l2a/tensor.hpp"
#include "l2a/text.hpp"

namespace l2a {

enum class HeadKind { classifier, regressor, mlm };

std::string head_kind_name(HeadKind k);
HeadKind head_kind_from_name(const std::string& name);

struct ModelConfig {
  std::size_t layers = 2;
  std::size_t hidden = 32;
  std::size_t heads = 2;
  std::size_t ffn = 128;
  std::size_t vocab_size = 0;
  std::size_t max_len = 16;
  HeadKind head = HeadKind::classifier;
  int num_classes = 2;  // classifier head only

  std::size_t head_dim() const { return hidden / heads; }
  void validate() const;  // throws ConfigError
  bool operator==(const ModelConfig&) const = default;
};

// Last layer only: the distillation losses read the final H and A.
struct EncoderOutput {
  Tensor hidden;                  // valid_len x hidden
  std::vector<Tensor> attention;  // per head, valid_len x valid_len
  Tensor logits;                  // 1 x num_classes (classifier) or 1 x 1
  Tensor mlm_logits;              // valid_len x vocab (mlm head only)
};

// Deterministic scaled-uniform init: internal weights at 1/sqrt(fan_in),
// output-head weights at 1/fan_in (keeps the untrained MLM near uniform),
// LayerNorm at gamma=1/beta=0, biases at 0.
ParameterStore init_model(const ModelConfig& cfg, std::uint64_t seed);

// ids[0..valid_len) is the live prefix; everything after must be [PAD].
// Attention is computed over the live prefix only, so every attention row
// sums to 1 over non-pad positions.
EncoderOutput encoder_forward(const ParameterStore& params,
                              const ModelConfig& cfg,
                              const std::vector<std::size_t>& ids,
                              std::size_t valid_len);

EncoderOutput encoder_forward(const ParameterStore& params,
                              const ModelConfig& cfg,
                              const EncodedExample& ex);

// Masks position o, runs the MLM generator, and returns the vocab
// distribution at o with reserved ids and the original token excluded
// (zero probability, rest renormalized). Pure prediction; no graph is built.
std::vector<double> mlm_predict(const ParameterStore& params,
                                const ModelConfig& cfg,
                                const EncodedExample& ex, std::size_t o);

}  // namespace l2a
