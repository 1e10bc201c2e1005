// SPDX-License-Identifier: Apache-2.0
//
// Shared fixtures for the unit suites: tiny vocabularies, model configs and
// encoded examples sized for fast exact checks.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "l2a/model.hpp"
#include "l2a/text.hpp"

namespace l2a::testing {

// Vocabulary with word tokens w0..w{n-1} after the reserved block.
inline Vocabulary word_vocab(std::size_t n) {
  Vocabulary v;
  for (std::size_t i = 0; i < n; ++i) v.add("w" + std::to_string(i));
  return v;
}

inline ModelConfig tiny_config(std::size_t vocab_size, HeadKind head,
                               std::size_t max_len = 8) {
  ModelConfig cfg;
  cfg.layers = 1;
  cfg.hidden = 8;
  cfg.heads = 2;
  cfg.ffn = 16;
  cfg.vocab_size = vocab_size;
  cfg.max_len = max_len;
  cfg.head = head;
  cfg.num_classes = 2;
  return cfg;
}

// [CLS] w... [SEP] [PAD]* encoding of the given vocabulary ids.
inline EncodedExample encode_words(const Vocabulary& vocab,
                                   const std::vector<std::size_t>& word_ids,
                                   std::size_t max_len) {
  Example ex;
  for (std::size_t id : word_ids) ex.tokens_a.push_back(vocab.token(id));
  return encode(ex, vocab, max_len);
}

}  // namespace l2a::testing
