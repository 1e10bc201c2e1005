// SPDX-License-Identifier: Apache-2.0
#include "l2a/augment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace l2a {

using boost::multiprecision::cpp_int;

void SamplerConfig::validate() const {
  if (!(alpha > 0.0)) throw ConfigError("sampler: alpha must be positive");
  if (!(temp_T > 0.0)) throw ConfigError("sampler: temp_T must be positive");
}

std::size_t candidate_count(std::size_t vocab_size) {
  if (vocab_size <= Vocabulary::kNumReserved + 1) return 0;
  return vocab_size - Vocabulary::kNumReserved - 1;
}

std::size_t candidate_count(const Vocabulary& vocab) {
  return candidate_count(vocab.size());
}

cpp_int count_at_distance(std::size_t e, std::size_t m, std::size_t candidates) {
  if (e > m)
    throw Error("count_at_distance: e " + std::to_string(e) + " exceeds m " +
                std::to_string(m));
  // C(m,e): multiplicative form, each intermediate division exact.
  cpp_int binom = 1;
  for (std::size_t i = 1; i <= e; ++i) {
    binom *= static_cast<unsigned long>(m - e + i);
    binom /= static_cast<unsigned long>(i);
  }
  cpp_int pow = 1;
  for (std::size_t i = 0; i < e; ++i) pow *= static_cast<unsigned long>(candidates);
  return binom * pow;
}

std::vector<double> distance_distribution(std::size_t m, std::size_t candidates,
                                          double alpha, bool* degenerate) {
  if (!(alpha > 0.0)) throw Error("distance_distribution: alpha must be positive");
  if (degenerate) *degenerate = false;
  if (m == 0 || candidates == 0) {
    if (degenerate) *degenerate = true;
    std::vector<double> p(m + 1, 0.0);
    p[0] = 1.0;
    return p;
  }
  // log weights: -d/alpha + log C(m,d) + d log(candidates), max-shifted.
  std::vector<double> logw(m + 1);
  const double log_cand = std::log(static_cast<double>(candidates));
  double log_binom = 0.0;  // log C(m,0)
  for (std::size_t d = 0; d <= m; ++d) {
    if (d > 0)
      log_binom += std::log(static_cast<double>(m - d + 1)) -
                   std::log(static_cast<double>(d));
    logw[d] = -static_cast<double>(d) / alpha + log_binom +
              static_cast<double>(d) * log_cand;
  }
  const double mx = *std::max_element(logw.begin(), logw.end());
  double denom = 0.0;
  std::vector<double> p(m + 1);
  for (std::size_t d = 0; d <= m; ++d) {
    p[d] = std::exp(logw[d] - mx);
    denom += p[d];
  }
  for (double& v : p) v /= denom;
  return p;
}

std::vector<std::size_t> sample_positions(std::size_t d,
                                          const std::vector<std::size_t>& editable,
                                          Rng& rng) {
  if (d > editable.size())
    throw Error("sample_positions: d " + std::to_string(d) +
                " exceeds editable count " + std::to_string(editable.size()));
  std::vector<std::size_t> pool = editable;
  // Partial Fisher-Yates: the first d entries are a uniform subset.
  for (std::size_t i = 0; i < d; ++i) {
    const std::size_t j = i + rng.uniform_int(pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(d);
  std::sort(pool.begin(), pool.end());
  return pool;
}

SubstituteDraw sample_substitute(const ParameterStore& generator,
                                 const ModelConfig& gen_cfg,
                                 const EncodedExample& ex, std::size_t position,
                                 double temp_T, Rng& rng) {
  if (!(temp_T > 0.0)) throw Error("sample_substitute: temp_T must be positive");
  const std::vector<double> base = mlm_predict(generator, gen_cfg, ex, position);
  // Re-soften: q_i ∝ p_i^(1/T) == softmax(logits/T) over the candidate set.
  std::vector<double> logq(base.size(), -std::numeric_limits<double>::infinity());
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < base.size(); ++i)
    if (base[i] > 0.0) {
      logq[i] = std::log(base[i]) / temp_T;
      mx = std::max(mx, logq[i]);
    }
  double denom = 0.0;
  std::vector<double> q(base.size(), 0.0);
  for (std::size_t i = 0; i < base.size(); ++i)
    if (base[i] > 0.0) {
      q[i] = std::exp(logq[i] - mx);
      denom += q[i];
    }
  for (double& v : q) v /= denom;
  const std::size_t token = rng.categorical(q);
  return {token, std::log(q[token])};
}

AugmentedSample sample_augmented(const EncodedExample& x,
                                 std::size_t origin_index,
                                 const SamplerConfig& cfg,
                                 const ParameterStore& generator,
                                 const ModelConfig& gen_cfg, Rng& rng) {
  cfg.validate();
  if (x.m == 0) throw Error("sample_augmented: example has no editable positions");
  std::vector<std::size_t> editable;
  for (std::size_t i = 0; i < x.valid_len; ++i)
    if (x.editable[i]) editable.push_back(i);

  const std::size_t cand = candidate_count(gen_cfg.vocab_size);
  bool degenerate = false;
  const std::vector<double> pd =
      distance_distribution(x.m, cand, cfg.alpha, &degenerate);

  AugmentedSample out;
  out.origin_index = origin_index;
  out.z = x;
  out.d = rng.categorical(pd);
  out.log_ps = std::log(pd[out.d]);
  out.positions = sample_positions(out.d, editable, rng);
  // Uniform subset factor: log 1/C(m,d).
  for (std::size_t i = 1; i <= out.d; ++i)
    out.log_ps -= std::log(static_cast<double>(x.m - out.d + i)) -
                  std::log(static_cast<double>(i));
  // Words filled left-to-right; each draw sees the already-substituted prefix.
  for (std::size_t pos : out.positions) {
    const SubstituteDraw draw =
        sample_substitute(generator, gen_cfg, out.z, pos, cfg.temp_T, rng);
    out.original_words.push_back(out.z.ids[pos]);
    out.z.ids[pos] = draw.token;
    out.words.push_back(draw.token);
    out.log_ps += draw.log_prob;
  }
  return out;
}

namespace {

std::vector<AugmentedSample> corpus_common(
    const Dataset& source, const Dataset& target, const Vocabulary& vocab,
    std::size_t max_len, std::size_t n_source, std::size_t n_target,
    const SamplerConfig* cfg, const ParameterStore* generator,
    const ModelConfig* gen_cfg, Rng* rng) {
  if (gen_cfg && gen_cfg->vocab_size != vocab.size())
    throw DataError("augment_corpus: vocabulary size " +
                    std::to_string(vocab.size()) +
                    " does not match generator vocab " +
                    std::to_string(gen_cfg->vocab_size));
  std::vector<AugmentedSample> out;
  std::size_t origin = 0;
  auto emit = [&](const Dataset& ds, std::size_t n) {
    for (const auto& ex : ds.examples) {
      const EncodedExample enc = encode(ex, vocab, max_len);
      for (std::size_t i = 0; i < n; ++i) {
        if (cfg) {
          out.push_back(
              sample_augmented(enc, origin, *cfg, *generator, *gen_cfg, *rng));
        } else {
          AugmentedSample s;  // identity: unedited copy, log 1 = 0
          s.origin_index = origin;
          s.z = enc;
          out.push_back(std::move(s));
        }
      }
      ++origin;
    }
  };
  emit(source, n_source);
  emit(target, n_target);
  return out;
}

}  // namespace

std::vector<AugmentedSample> augment_corpus(const Dataset& source,
                                            const Dataset& target,
                                            const Vocabulary& vocab,
                                            std::size_t max_len,
                                            const SamplerConfig& cfg,
                                            const ParameterStore& generator,
                                            const ModelConfig& gen_cfg, Rng& rng) {
  cfg.validate();
  return corpus_common(source, target, vocab, max_len, cfg.n_source,
                       cfg.n_target, &cfg, &generator, &gen_cfg, &rng);
}

std::vector<AugmentedSample> identity_corpus(const Dataset& source,
                                             const Dataset& target,
                                             const Vocabulary& vocab,
                                             std::size_t max_len) {
  return corpus_common(source, target, vocab, max_len, 1, 1, nullptr, nullptr,
                       nullptr, nullptr);
}

}  // namespace l2a
