// SPDX-License-Identifier: Apache-2.0
//
// Vocabulary, tokenization, dataset ingestion (JSONL), low-resource
// subsampling, and the synthetic source/target benchmark generator.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "l2a/common.hpp"
#include "l2a/rng.hpp"

namespace l2a {

enum class TaskKind { classification, regression };
enum class Domain { source, target };
enum class Split { train, validation, test };

std::string domain_name(Domain d);
std::string split_name(Split s);

// Whitespace tokenizer; the unit of editing is one token.
std::vector<std::string> tokenize(const std::string& text);

class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr std::size_t kCls = 2;
  static constexpr std::size_t kSep = 3;
  static constexpr std::size_t kMask = 4;
  static constexpr std::size_t kNumReserved = 5;

  Vocabulary();

  // size() counts reserved tokens too.
  std::size_t size() const { return id_to_token_.size(); }
  std::size_t id_for(const std::string& token) const;  // unknown -> kUnk
  const std::string& token(std::size_t id) const;
  bool contains(const std::string& token) const;
  static bool is_reserved(std::size_t id) { return id < kNumReserved; }

  std::size_t add(const std::string& token);  // idempotent

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, std::size_t> token_to_id_;
};

// Tokens with frequency >= min_freq, ordered by frequency desc then
// lexicographic; ids start after the reserved block.
Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& corpus,
                            std::size_t min_freq);

struct Example {
  std::vector<std::string> tokens_a;
  std::vector<std::string> tokens_b;  // empty for single-sentence tasks
  double label = 0.0;                 // class id (integral) or regression value
  Domain domain = Domain::target;
};

struct Dataset {
  std::vector<Example> examples;
  TaskKind task = TaskKind::classification;
  Split split = Split::train;
  int num_classes = 0;  // classification only

  std::size_t size() const { return examples.size(); }
};

// Fixed-length encoding [CLS] a... [SEP] (b... [SEP]) + [PAD] suffix.
// `editable` marks non-special positions — the substitution sites.
struct EncodedExample {
  std::vector<std::size_t> ids;
  std::vector<std::uint8_t> editable;
  std::size_t valid_len = 0;  // positions before the padding suffix
  std::size_t m = 0;          // number of editable positions
  bool truncated = false;
  double label = 0.0;
  Domain domain = Domain::target;
};

EncodedExample encode(const Example& ex, const Vocabulary& vocab,
                      std::size_t max_len);

// In-vocabulary round trip: original tokens minus truncation.
std::vector<std::string> decode_editable(const Vocabulary& vocab,
                                         const EncodedExample& enc);

std::vector<std::vector<std::string>> token_streams(const Dataset& ds);

// One JSON object per line: {"text": str, "text_b"?: str, "label": num,
// "domain": "source"|"target"}. Integer labels -> classification, real ->
// regression (min-max normalized to [0,1]); mixing the two is an error.
Dataset load_jsonl(const std::string& path, Split split);
void save_jsonl(const Dataset& ds, const std::string& path);

// Seeded uniform draw of exactly n_per_class examples per class.
Dataset subsample_target(const Dataset& ds, std::size_t n_per_class,
                         std::uint64_t seed);

// Synthetic benchmark: each class owns disjoint keyword sets per domain
// (shared core + domain-only tail); sentences mix keywords with neutral
// fillers and the label is the strict majority keyword class.
struct SynthSpec {
  int num_classes = 2;
  std::size_t shared_keywords_per_class = 3;
  std::size_t source_only_keywords_per_class = 2;
  std::size_t target_only_keywords_per_class = 2;
  std::size_t filler_vocab = 30;
  std::size_t min_sentence_len = 5;
  std::size_t max_sentence_len = 9;
  double keyword_prob = 0.6;  // chance a position carries a keyword
  double noise = 0.1;         // keyword drawn from a wrong class
  std::size_t source_train_size = 320;
  std::size_t target_train_size = 400;  // pool before subsampling
  std::size_t target_val_size = 80;
  std::size_t target_test_size = 400;
};

struct SynthData {
  Dataset source_train;
  Dataset target_train;
  Dataset target_val;
  Dataset target_test;
};

std::vector<std::vector<std::string>> synth_keywords(const SynthSpec& spec,
                                                     Domain domain);

SynthData synth_generate(const SynthSpec& spec, std::uint64_t seed);

// Majority-vote rule classifier over the domain's keyword->class map; its
// accuracy is the task ceiling (1.0 by construction of synth_generate).
double keyword_oracle_accuracy(const Dataset& ds, const SynthSpec& spec,
                               Domain domain);

}  // namespace l2a
