// SPDX-License-Identifier: Apache-2.0
#include "l2a/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace l2a {

std::string head_kind_name(HeadKind k) {
  switch (k) {
    case HeadKind::classifier: return "classifier";
    case HeadKind::regressor: return "regressor";
    case HeadKind::mlm: return "mlm";
  }
  return "?";
}

HeadKind head_kind_from_name(const std::string& name) {
  if (name == "classifier") return HeadKind::classifier;
  if (name == "regressor") return HeadKind::regressor;
  if (name == "mlm") return HeadKind::mlm;
  throw ConfigError("unknown head kind: " + name);
}

void ModelConfig::validate() const {
  if (layers < 1 || hidden < 1 || heads < 1 || ffn < 1 || max_len < 1)
    throw ConfigError("model config: all counts must be >= 1");
  if (hidden % heads != 0)
    throw ConfigError("model config: hidden " + std::to_string(hidden) +
                      " not divisible by heads " + std::to_string(heads));
  if (vocab_size <= Vocabulary::kNumReserved)
    throw ConfigError("model config: vocab_size must exceed the reserved block");
  if (head == HeadKind::classifier && num_classes < 2)
    throw ConfigError("model config: classifier needs >= 2 classes");
}

namespace {

std::string lname(std::size_t l, const char* part) {
  return "l" + std::to_string(l) + "." + part;
}

}  // namespace

ParameterStore init_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  ParameterStore params;
  auto w = [&](const std::string& name, std::size_t rows, std::size_t cols,
               double scale) {
    params.add(name, Tensor::uniform({rows, cols}, scale, rng, true));
  };
  auto zeros = [&](const std::string& name, std::size_t n) {
    params.add(name, Tensor::zeros({1, n}, true));
  };
  auto ones = [&](const std::string& name, std::size_t n) {
    params.add(name, Tensor::full({1, n}, 1.0, true));
  };

  const double emb_scale = 1.0 / std::sqrt(static_cast<double>(cfg.hidden));
  w("emb.tok", cfg.vocab_size, cfg.hidden, emb_scale);
  w("emb.pos", cfg.max_len, cfg.hidden, emb_scale);
  ones("emb.ln.gamma", cfg.hidden);
  zeros("emb.ln.beta", cfg.hidden);

  const double attn_scale = 1.0 / std::sqrt(static_cast<double>(cfg.hidden));
  const double ffn_scale = 1.0 / std::sqrt(static_cast<double>(cfg.ffn));
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    for (const char* part : {"attn.wq", "attn.wk", "attn.wv", "attn.wo"})
      w(lname(l, part), cfg.hidden, cfg.hidden, attn_scale);
    for (const char* part : {"attn.bq", "attn.bk", "attn.bv", "attn.bo"})
      zeros(lname(l, part), cfg.hidden);
    ones(lname(l, "ln1.gamma"), cfg.hidden);
    zeros(lname(l, "ln1.beta"), cfg.hidden);
    w(lname(l, "ffn.w1"), cfg.hidden, cfg.ffn, attn_scale);
    zeros(lname(l, "ffn.b1"), cfg.ffn);
    w(lname(l, "ffn.w2"), cfg.ffn, cfg.hidden, ffn_scale);
    zeros(lname(l, "ffn.b2"), cfg.hidden);
    ones(lname(l, "ln2.gamma"), cfg.hidden);
    zeros(lname(l, "ln2.beta"), cfg.hidden);
  }

  // Head weights at 1/fan_in so untrained logits stay near zero; keeps the
  // initial MLM distribution close to uniform over candidates.
  const double head_scale = 1.0 / static_cast<double>(cfg.hidden);
  switch (cfg.head) {
    case HeadKind::classifier:
      w("head.w", cfg.hidden, static_cast<std::size_t>(cfg.num_classes), head_scale);
      zeros("head.b", static_cast<std::size_t>(cfg.num_classes));
      break;
    case HeadKind::regressor:
      w("head.w", cfg.hidden, 1, head_scale);
      zeros("head.b", 1);
      break;
    case HeadKind::mlm:
      w("head.w", cfg.hidden, cfg.vocab_size, head_scale);
      zeros("head.b", cfg.vocab_size);
      break;
  }
  return params;
}

EncoderOutput encoder_forward(const ParameterStore& params,
                              const ModelConfig& cfg,
                              const std::vector<std::size_t>& ids,
                              std::size_t valid_len) {
  if (valid_len == 0 || valid_len > ids.size())
    throw Error("encoder_forward: valid_len " + std::to_string(valid_len) +
                " out of range for input of " + std::to_string(ids.size()));
  if (valid_len > cfg.max_len)
    throw Error("encoder_forward: sequence longer than max_len " +
                std::to_string(cfg.max_len));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= cfg.vocab_size)
      throw Error("encoder_forward: token id " + std::to_string(ids[i]) +
                  " out of range for vocab " + std::to_string(cfg.vocab_size));
    if (i >= valid_len && ids[i] != Vocabulary::kPad)
      throw Error("encoder_forward: non-pad token after valid_len");
  }
  // Pads are a suffix; attention runs on the live prefix only.
  std::vector<std::size_t> live(ids.begin(), ids.begin() + valid_len);
  std::vector<std::size_t> pos(valid_len);
  for (std::size_t i = 0; i < valid_len; ++i) pos[i] = i;

  Tensor x = add(embedding_lookup(params.at("emb.tok"), live),
                 embedding_lookup(params.at("emb.pos"), pos));
  x = layer_norm_rows(x, params.at("emb.ln.gamma"), params.at("emb.ln.beta"));

  const std::size_t dk = cfg.head_dim();
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));
  std::vector<Tensor> last_attention;
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    Tensor q = add_rowvec(matmul(x, params.at(lname(l, "attn.wq"))),
                          params.at(lname(l, "attn.bq")));
    Tensor k = add_rowvec(matmul(x, params.at(lname(l, "attn.wk"))),
                          params.at(lname(l, "attn.bk")));
    Tensor v = add_rowvec(matmul(x, params.at(lname(l, "attn.wv"))),
                          params.at(lname(l, "attn.bv")));
    std::vector<Tensor> head_outs;
    std::vector<Tensor> attn;
    for (std::size_t h = 0; h < cfg.heads; ++h) {
      Tensor qh = slice_cols(q, h * dk, (h + 1) * dk);
      Tensor kh = slice_cols(k, h * dk, (h + 1) * dk);
      Tensor vh = slice_cols(v, h * dk, (h + 1) * dk);
      Tensor scores = scale(matmul_nt(qh, kh), inv_sqrt_dk);
      Tensor a = softmax_rows(scores, 1.0);
      attn.push_back(a);
      head_outs.push_back(matmul(a, vh));
    }
    Tensor o = add_rowvec(matmul(concat_cols(head_outs), params.at(lname(l, "attn.wo"))),
                          params.at(lname(l, "attn.bo")));
    x = layer_norm_rows(add(x, o), params.at(lname(l, "ln1.gamma")),
                        params.at(lname(l, "ln1.beta")));
    Tensor f = add_rowvec(
        matmul(gelu(add_rowvec(matmul(x, params.at(lname(l, "ffn.w1"))),
                               params.at(lname(l, "ffn.b1")))),
               params.at(lname(l, "ffn.w2"))),
        params.at(lname(l, "ffn.b2")));
    x = layer_norm_rows(add(x, f), params.at(lname(l, "ln2.gamma")),
                        params.at(lname(l, "ln2.beta")));
    if (l + 1 == cfg.layers) last_attention = std::move(attn);
  }

  EncoderOutput out;
  out.hidden = x;
  out.attention = std::move(last_attention);
  if (cfg.head == HeadKind::mlm) {
    out.mlm_logits = add_rowvec(matmul(x, params.at("head.w")), params.at("head.b"));
    out.logits = out.mlm_logits;  // alias for uniform access
  } else {
    out.logits =
        add_rowvec(matmul(select_row(x, 0), params.at("head.w")), params.at("head.b"));
  }
  return out;
}

EncoderOutput encoder_forward(const ParameterStore& params,
                              const ModelConfig& cfg, const EncodedExample& ex) {
  return encoder_forward(params, cfg, ex.ids, ex.valid_len);
}

std::vector<double> mlm_predict(const ParameterStore& params,
                                const ModelConfig& cfg,
                                const EncodedExample& ex, std::size_t o) {
  if (o >= ex.editable.size() || !ex.editable[o])
    throw Error("mlm_predict: position " + std::to_string(o) + " is not editable");
  if (cfg.head != HeadKind::mlm) throw Error("mlm_predict: model has no MLM head");
  NoGradGuard ng;
  EncodedExample masked = ex;
  const std::size_t original = masked.ids[o];
  masked.ids[o] = Vocabulary::kMask;
  EncoderOutput out = encoder_forward(params, cfg, masked);

  const std::vector<double>& logits = out.mlm_logits.values();
  const std::size_t v = cfg.vocab_size;
  std::vector<double> probs(v, 0.0);
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = Vocabulary::kNumReserved; i < v; ++i)
    if (i != original) mx = std::max(mx, logits[o * v + i]);
  double denom = 0.0;
  for (std::size_t i = Vocabulary::kNumReserved; i < v; ++i) {
    if (i == original) continue;
    probs[i] = std::exp(logits[o * v + i] - mx);
    denom += probs[i];
  }
  if (denom <= 0.0) throw Error("mlm_predict: empty candidate set");
  for (double& p : probs) p /= denom;
  return probs;
}

}  // namespace l2a
