// SPDX-License-Identifier: Apache-2.0
#include "l2a/text.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace l2a {

using nlohmann::json;

std::string domain_name(Domain d) {
  return d == Domain::source ? "source" : "target";
}

std::string split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "?";
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

// ----- Vocabulary ----------------------------------------------------------

Vocabulary::Vocabulary() {
  for (const char* t : {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"}) add(t);
}

std::size_t Vocabulary::id_for(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(std::size_t id) const {
  if (id >= id_to_token_.size())
    throw DataError("Vocabulary: id " + std::to_string(id) + " out of range " +
                    std::to_string(id_to_token_.size()));
  return id_to_token_[id];
}

bool Vocabulary::contains(const std::string& token) const {
  return token_to_id_.count(token) != 0;
}

std::size_t Vocabulary::add(const std::string& token) {
  auto it = token_to_id_.find(token);
  if (it != token_to_id_.end()) return it->second;
  const std::size_t id = id_to_token_.size();
  id_to_token_.push_back(token);
  token_to_id_.emplace(token, id);
  return id;
}

Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& corpus,
                            std::size_t min_freq) {
  if (corpus.empty()) throw DataError("build_vocabulary: empty corpus");
  if (min_freq < 1) throw DataError("build_vocabulary: min_freq must be >= 1");
  std::unordered_map<std::string, std::size_t> freq;
  for (const auto& stream : corpus)
    for (const auto& tok : stream) ++freq[tok];

  Vocabulary vocab;
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (const auto& [tok, n] : freq)
    if (n >= min_freq && !vocab.contains(tok)) kept.emplace_back(tok, n);
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  for (const auto& [tok, n] : kept) {
    (void)n;
    vocab.add(tok);
  }
  return vocab;
}

// ----- encoding ------------------------------------------------------------

EncodedExample encode(const Example& ex, const Vocabulary& vocab,
                      std::size_t max_len) {
  if (max_len < 3) throw DataError("encode: max_len must be >= 3");
  EncodedExample out;
  out.label = ex.label;
  out.domain = ex.domain;

  std::vector<std::size_t> ids;
  std::vector<std::uint8_t> editable;
  auto push = [&](std::size_t id, bool edit) {
    ids.push_back(id);
    editable.push_back(edit ? 1 : 0);
  };
  push(Vocabulary::kCls, false);
  for (const auto& tok : ex.tokens_a) {
    const std::size_t id = vocab.id_for(tok);
    push(id, !Vocabulary::is_reserved(id));
  }
  push(Vocabulary::kSep, false);
  if (!ex.tokens_b.empty()) {
    for (const auto& tok : ex.tokens_b) {
      const std::size_t id = vocab.id_for(tok);
      push(id, !Vocabulary::is_reserved(id));
    }
    push(Vocabulary::kSep, false);
  }

  if (ids.size() > max_len) {
    ids.resize(max_len);
    editable.resize(max_len);
    ids.back() = Vocabulary::kSep;  // keep a terminal separator
    editable.back() = 0;
    out.truncated = true;
  }
  out.valid_len = ids.size();
  while (ids.size() < max_len) {
    ids.push_back(Vocabulary::kPad);
    editable.push_back(0);
  }
  out.ids = std::move(ids);
  out.editable = std::move(editable);
  for (std::uint8_t e : out.editable) out.m += e;
  return out;
}

std::vector<std::string> decode_editable(const Vocabulary& vocab,
                                         const EncodedExample& enc) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < enc.valid_len; ++i)
    if (enc.editable[i]) out.push_back(vocab.token(enc.ids[i]));
  return out;
}

std::vector<std::vector<std::string>> token_streams(const Dataset& ds) {
  std::vector<std::vector<std::string>> out;
  out.reserve(ds.examples.size());
  for (const auto& ex : ds.examples) {
    std::vector<std::string> s = ex.tokens_a;
    s.insert(s.end(), ex.tokens_b.begin(), ex.tokens_b.end());
    out.push_back(std::move(s));
  }
  return out;
}

// ----- JSONL ---------------------------------------------------------------

Dataset load_jsonl(const std::string& path, Split split) {
  std::ifstream in(path);
  if (!in) throw DataError("load_jsonl: cannot open " + path);
  Dataset ds;
  ds.split = split;
  bool saw_class = false, saw_real = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError("load_jsonl: " + path + ":" + std::to_string(line_no) +
                      ": malformed JSON: " + e.what());
    }
    auto require = [&](const char* field) -> const json& {
      if (!obj.contains(field))
        throw DataError("load_jsonl: " + path + ":" + std::to_string(line_no) +
                        ": missing field \"" + field + "\"");
      return obj.at(field);
    };
    Example ex;
    const json& text = require("text");
    if (!text.is_string())
      throw DataError("load_jsonl: " + path + ":" + std::to_string(line_no) +
                      ": \"text\" must be a string");
    ex.tokens_a = tokenize(text.get<std::string>());
    if (obj.contains("text_b")) {
      if (!obj["text_b"].is_string())
        throw DataError("load_jsonl: " + path + ":" + std::to_string(line_no) +
                        ": \"text_b\" must be a string");
      ex.tokens_b = tokenize(obj["text_b"].get<std::string>());
    }
    const json& label = require("label");
    if (label.is_number_integer()) {
      saw_class = true;
      ex.label = static_cast<double>(label.get<long long>());
      if (ex.label < 0)
        throw DataError("load_jsonl: " + path + ":" + std::to_string(line_no) +
                        ": negative class label");
    } else if (label.is_number_float()) {
      saw_real = true;
      ex.label = label.get<double>();
    } else {
      throw DataError("load_jsonl: " + path + ":" + std::to_string(line_no) +
                      ": \"label\" must be a number");
    }
    if (saw_class && saw_real)
      throw DataError("load_jsonl: " + path + ":" + std::to_string(line_no) +
                      ": mixed integer and real labels in one dataset");
    const json& dom = require("domain");
    if (!dom.is_string() ||
        (dom.get<std::string>() != "source" && dom.get<std::string>() != "target"))
      throw DataError("load_jsonl: " + path + ":" + std::to_string(line_no) +
                      ": \"domain\" must be \"source\" or \"target\"");
    ex.domain = dom.get<std::string>() == "source" ? Domain::source : Domain::target;
    ds.examples.push_back(std::move(ex));
  }
  if (ds.examples.empty()) throw DataError("load_jsonl: no examples in " + path);

  if (saw_real) {
    ds.task = TaskKind::regression;
    double lo = ds.examples[0].label, hi = lo;
    for (const auto& ex : ds.examples) {
      lo = std::min(lo, ex.label);
      hi = std::max(hi, ex.label);
    }
    if (lo == hi)
      throw DataError("load_jsonl: constant regression labels in " + path);
    for (auto& ex : ds.examples) ex.label = (ex.label - lo) / (hi - lo);
  } else {
    ds.task = TaskKind::classification;
    int max_label = 0;
    for (const auto& ex : ds.examples)
      max_label = std::max(max_label, static_cast<int>(ex.label));
    ds.num_classes = max_label + 1;
  }
  return ds;
}

void save_jsonl(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("save_jsonl: cannot open " + path + " for writing");
  auto join = [](const std::vector<std::string>& toks) {
    std::string s;
    for (std::size_t i = 0; i < toks.size(); ++i) {
      if (i) s += ' ';
      s += toks[i];
    }
    return s;
  };
  for (const auto& ex : ds.examples) {
    json obj;
    obj["text"] = join(ex.tokens_a);
    if (!ex.tokens_b.empty()) obj["text_b"] = join(ex.tokens_b);
    if (ds.task == TaskKind::classification)
      obj["label"] = static_cast<long long>(ex.label);
    else
      obj["label"] = ex.label;
    obj["domain"] = domain_name(ex.domain);
    out << obj.dump() << '\n';
  }
}

// ----- subsampling ---------------------------------------------------------

Dataset subsample_target(const Dataset& ds, std::size_t n_per_class,
                         std::uint64_t seed) {
  if (ds.task != TaskKind::classification)
    throw DataError("subsample_target: classification dataset required");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < ds.examples.size(); ++i)
    by_class[static_cast<int>(ds.examples[i].label)].push_back(i);

  Rng rng(seed);
  std::vector<std::size_t> chosen;
  for (auto& [cls, indices] : by_class) {
    if (indices.size() < n_per_class)
      throw DataError("subsample_target: class " + std::to_string(cls) +
                      " has " + std::to_string(indices.size()) +
                      " examples, need " + std::to_string(n_per_class));
    rng.shuffle(indices);
    chosen.insert(chosen.end(), indices.begin(), indices.begin() + n_per_class);
  }
  std::sort(chosen.begin(), chosen.end());  // keep original dataset order

  Dataset out;
  out.task = ds.task;
  out.split = ds.split;
  out.num_classes = ds.num_classes;
  for (std::size_t i : chosen) out.examples.push_back(ds.examples[i]);
  return out;
}

// ----- synthetic benchmark -------------------------------------------------

namespace {

void check_synth_spec(const SynthSpec& spec) {
  if (spec.num_classes < 2) throw DataError("synth: need at least 2 classes");
  if (spec.shared_keywords_per_class == 0)
    throw DataError("synth: shared keyword set must be non-empty");
  if (spec.min_sentence_len < 1 || spec.max_sentence_len < spec.min_sentence_len)
    throw DataError("synth: invalid sentence length range");
  if (!(spec.keyword_prob > 0.0 && spec.keyword_prob <= 1.0))
    throw DataError("synth: keyword_prob must be in (0,1]");
  if (!(spec.noise >= 0.0 && spec.noise < 0.5))
    throw DataError("synth: noise must be in [0,0.5)");
}

// Class keyword sets are disjoint by construction (class id is embedded in
// the token); verified anyway to honor the contract.
void check_disjoint(const std::vector<std::vector<std::string>>& sets) {
  std::unordered_map<std::string, int> owner;
  for (std::size_t c = 0; c < sets.size(); ++c)
    for (const auto& kw : sets[c]) {
      auto [it, inserted] = owner.emplace(kw, static_cast<int>(c));
      if (!inserted && it->second != static_cast<int>(c))
        throw DataError("synth: keyword \"" + kw +
                        "\" shared between classes " +
                        std::to_string(it->second) + " and " +
                        std::to_string(c));
    }
}

Example make_sentence(const SynthSpec& spec,
                      const std::vector<std::vector<std::string>>& keywords,
                      int label, Domain domain, Rng& rng) {
  const int k = spec.num_classes;
  for (int attempt = 0; attempt < 10000; ++attempt) {
    const std::size_t len =
        spec.min_sentence_len +
        rng.uniform_int(spec.max_sentence_len - spec.min_sentence_len + 1);
    std::vector<std::string> tokens;
    std::vector<int> votes(k, 0);
    for (std::size_t p = 0; p < len; ++p) {
      if (rng.bernoulli(spec.keyword_prob)) {
        int c = label;
        if (rng.bernoulli(spec.noise)) {
          c = static_cast<int>(rng.uniform_int(k - 1));
          if (c >= label) ++c;
        }
        tokens.push_back(keywords[c][rng.uniform_int(keywords[c].size())]);
        ++votes[c];
      } else {
        tokens.push_back("w" + std::to_string(rng.uniform_int(spec.filler_vocab)));
      }
    }
    // Accept only sentences whose strict keyword majority equals the label.
    int best = 0;
    bool tie = false;
    for (int c = 1; c < k; ++c) {
      if (votes[c] > votes[best]) {
        best = c;
        tie = false;
      } else if (votes[c] == votes[best]) {
        tie = true;
      }
    }
    if (votes[label] > 0 && best == label && !tie) {
      Example ex;
      ex.tokens_a = std::move(tokens);
      ex.label = label;
      ex.domain = domain;
      return ex;
    }
  }
  throw DataError("synth: could not produce a majority-labeled sentence");
}

Dataset make_split(const SynthSpec& spec,
                   const std::vector<std::vector<std::string>>& keywords,
                   std::size_t size, Domain domain, Split split, Rng& rng) {
  Dataset ds;
  ds.task = TaskKind::classification;
  ds.split = split;
  ds.num_classes = spec.num_classes;
  for (std::size_t i = 0; i < size; ++i) {
    const int label = static_cast<int>(i % spec.num_classes);
    ds.examples.push_back(make_sentence(spec, keywords, label, domain, rng));
  }
  return ds;
}

}  // namespace

std::vector<std::vector<std::string>> synth_keywords(const SynthSpec& spec,
                                                     Domain domain) {
  std::vector<std::vector<std::string>> sets(spec.num_classes);
  for (int c = 0; c < spec.num_classes; ++c) {
    for (std::size_t i = 0; i < spec.shared_keywords_per_class; ++i)
      sets[c].push_back("c" + std::to_string(c) + "both" + std::to_string(i));
    const std::size_t n_only = domain == Domain::source
                                   ? spec.source_only_keywords_per_class
                                   : spec.target_only_keywords_per_class;
    const char* tag = domain == Domain::source ? "src" : "tgt";
    for (std::size_t i = 0; i < n_only; ++i)
      sets[c].push_back("c" + std::to_string(c) + tag + std::to_string(i));
  }
  check_disjoint(sets);
  return sets;
}

SynthData synth_generate(const SynthSpec& spec, std::uint64_t seed) {
  check_synth_spec(spec);
  const auto src_kw = synth_keywords(spec, Domain::source);
  const auto tgt_kw = synth_keywords(spec, Domain::target);

  Rng root(seed);
  Rng r_src = root.fork(1);
  Rng r_tgt_train = root.fork(2);
  Rng r_tgt_val = root.fork(3);
  Rng r_tgt_test = root.fork(4);

  SynthData out;
  out.source_train = make_split(spec, src_kw, spec.source_train_size,
                                Domain::source, Split::train, r_src);
  out.target_train = make_split(spec, tgt_kw, spec.target_train_size,
                                Domain::target, Split::train, r_tgt_train);
  out.target_val = make_split(spec, tgt_kw, spec.target_val_size, Domain::target,
                              Split::validation, r_tgt_val);
  out.target_test = make_split(spec, tgt_kw, spec.target_test_size,
                               Domain::target, Split::test, r_tgt_test);
  return out;
}

double keyword_oracle_accuracy(const Dataset& ds, const SynthSpec& spec,
                               Domain domain) {
  const auto keywords = synth_keywords(spec, domain);
  std::unordered_map<std::string, int> owner;
  for (int c = 0; c < spec.num_classes; ++c)
    for (const auto& kw : keywords[c]) owner[kw] = c;

  std::size_t hits = 0;
  for (const auto& ex : ds.examples) {
    std::vector<int> votes(spec.num_classes, 0);
    for (const auto& tok : ex.tokens_a) {
      auto it = owner.find(tok);
      if (it != owner.end()) ++votes[it->second];
    }
    int best = 0;
    for (int c = 1; c < spec.num_classes; ++c)
      if (votes[c] > votes[best]) best = c;
    if (best == static_cast<int>(ex.label)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(ds.examples.size());
}

}  // namespace l2a
