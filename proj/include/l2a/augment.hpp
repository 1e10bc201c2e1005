// SPDX-License-Identifier: Apache-2.0
//
// Stationary augmentation distribution over substitution-edited sequences:
// a reweighted edit-distance marginal, uniform position subsets, and
// masked-LM word proposals, with exact log-probability scoring.
#pragma once

#include <cstdint>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "l2a/model.hpp"
#include "l2a/rng.hpp"
#include "l2a/text.hpp"

namespace l2a {

struct SamplerConfig {
  double alpha = 0.6;      // distance reweighting temperature
  double temp_T = 1.0;     // word-substitution softmax temperature
  std::size_t n_target = 20;  // samples per target example
  std::size_t n_source = 1;   // samples per source example

  void validate() const;
};

struct AugmentedSample {
  std::size_t origin_index = 0;  // index into the source+target corpus order
  EncodedExample z;              // edited sequence; label/domain inherited
  std::size_t d = 0;             // substitution count (Hamming distance)
  std::vector<std::size_t> positions;  // sorted distinct editable indices
  std::vector<std::size_t> words;      // substituted token ids, parallel
  std::vector<std::size_t> original_words;  // pre-edit token ids, parallel
  double log_ps = 0.0;                 // log P_s(z|x), finite and <= 0
};

// Number of sequences at substitution distance e from a length-m sequence
// when every position has `candidates` alternatives: C(m,e) * candidates^e.
boost::multiprecision::cpp_int count_at_distance(std::size_t e, std::size_t m,
                                                 std::size_t candidates);

// P(d) ∝ exp(-d/alpha) * count_at_distance(d, m); log-space, sums to 1.
// m == 0 or candidates == 0 degenerates to P(0)=1 (flagged).
std::vector<double> distance_distribution(std::size_t m, std::size_t candidates,
                                          double alpha,
                                          bool* degenerate = nullptr);

// Uniform over all C(m,d) subsets of the editable positions; sorted result.
std::vector<std::size_t> sample_positions(std::size_t d,
                                          const std::vector<std::size_t>& editable,
                                          Rng& rng);

struct SubstituteDraw {
  std::size_t token = 0;
  double log_prob = 0.0;
};

// Draws from the MLM distribution re-softened at temp_T over the candidate
// set (reserved ids and the current original excluded).
SubstituteDraw sample_substitute(const ParameterStore& generator,
                                 const ModelConfig& gen_cfg,
                                 const EncodedExample& ex, std::size_t position,
                                 double temp_T, Rng& rng);

// Distance, then positions, then words left-to-right (each conditioned on
// the previously substituted prefix). log_ps is the exact sample score.
AugmentedSample sample_augmented(const EncodedExample& x,
                                 std::size_t origin_index,
                                 const SamplerConfig& cfg,
                                 const ParameterStore& generator,
                                 const ModelConfig& gen_cfg, Rng& rng);

// n_source draws per source example then n_target per target example, in
// dataset order. Identity mode (see distill loop) bypasses this entirely.
std::vector<AugmentedSample> augment_corpus(const Dataset& source,
                                            const Dataset& target,
                                            const Vocabulary& vocab,
                                            std::size_t max_len,
                                            const SamplerConfig& cfg,
                                            const ParameterStore& generator,
                                            const ModelConfig& gen_cfg, Rng& rng);

// The no-op counterpart used by the plain-KD path and degeneracy checks:
// one unedited copy per example (d=0, log_ps=0), same ordering contract.
std::vector<AugmentedSample> identity_corpus(const Dataset& source,
                                             const Dataset& target,
                                             const Vocabulary& vocab,
                                             std::size_t max_len);

std::size_t candidate_count(const Vocabulary& vocab);   // |V| - reserved - 1
std::size_t candidate_count(std::size_t vocab_size);

}  // namespace l2a
