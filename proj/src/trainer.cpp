// SPDX-License-Identifier: Apache-2.0
#include "l2a/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "l2a/checkpoint.hpp"

namespace l2a {

namespace {

// Substream tags, globally unique across every function that derives streams
// from the run seed. Per-epoch streams fork again on the epoch index, so
// enabling or disabling one consumer never shifts another.
constexpr std::uint64_t kTagSynth = 1;
constexpr std::uint64_t kTagSubsample = 2;
constexpr std::uint64_t kTagGenInit = 10;
constexpr std::uint64_t kTagGenSplit = 11;
constexpr std::uint64_t kTagGenShuffle = 12;
constexpr std::uint64_t kTagGenMask = 13;
constexpr std::uint64_t kTagTeacher = 20;
constexpr std::uint64_t kTagStudentFt = 30;
constexpr std::uint64_t kTagDistillStudentInit = 40;
constexpr std::uint64_t kTagDistillProjInit = 41;
constexpr std::uint64_t kTagDistillPolicyInit = 42;
constexpr std::uint64_t kTagDistillShuffle = 43;
constexpr std::uint64_t kTagDistillAugment = 44;
constexpr std::uint64_t kTagDistillAction = 45;

std::string csv_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int class_of(const EncodedExample& ex) {
  return static_cast<int>(std::llround(ex.label));
}

std::size_t argmax(const std::vector<double>& v, std::size_t lo = 0) {
  std::size_t best = lo;
  for (std::size_t i = lo; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

// Label-free seeded draw used for regression targets, where n_per_class is
// read as a total count.
Dataset subsample_uniform(const Dataset& ds, std::size_t n, std::uint64_t seed) {
  if (ds.size() < n)
    throw DataError("subsample: pool has " + std::to_string(ds.size()) +
                    " examples, need " + std::to_string(n));
  std::vector<std::size_t> idx(ds.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  rng.shuffle(idx);
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  Dataset out;
  out.task = ds.task;
  out.split = ds.split;
  out.num_classes = ds.num_classes;
  for (std::size_t i : idx) out.examples.push_back(ds.examples[i]);
  return out;
}

std::vector<std::size_t> editable_positions(const EncodedExample& ex) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < ex.valid_len; ++i)
    if (ex.editable[i]) out.push_back(i);
  return out;
}

AdamConfig adam_with_lr(double lr) {
  AdamConfig c;
  c.lr = lr;
  return c;
}

Tensor supervised_loss(const EncoderOutput& out, const EncodedExample& ex,
                       HeadKind head) {
  if (head == HeadKind::classifier) {
    const Tensor lp = log_softmax_rows(out.logits, 1.0);
    return neg(pick(lp, static_cast<std::size_t>(class_of(ex))));
  }
  return mse(out.logits, Tensor::from_values({1, 1}, {ex.label}));
}

void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << j.dump(2) << "\n";
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  nlohmann::json j;
  in >> j;
  return j;
}

}  // namespace

PipelineData prepare_data(const RunConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng root(seed);
  PipelineData out;
  if (cfg.data.use_synth) {
    SynthData sd = synth_generate(cfg.data.synth, root.fork(kTagSynth).seed());
    out.source_train = std::move(sd.source_train);
    out.target_pool = std::move(sd.target_train);
    out.target_val = std::move(sd.target_val);
    out.target_test = std::move(sd.target_test);
  } else {
    out.source_train = load_jsonl(cfg.data.source_train_path, Split::train);
    out.target_pool = load_jsonl(cfg.data.target_train_path, Split::train);
    out.target_val = load_jsonl(cfg.data.target_val_path, Split::validation);
    out.target_test = load_jsonl(cfg.data.target_test_path, Split::test);
  }
  for (const Dataset* ds : {&out.source_train, &out.target_pool, &out.target_val,
                            &out.target_test})
    if (ds->task != cfg.task)
      throw DataError("prepare_data: split task kind does not match the config");

  if (cfg.task == TaskKind::classification)
    out.target_train = subsample_target(out.target_pool, cfg.data.n_per_class,
                                        root.fork(kTagSubsample).seed());
  else
    out.target_train = subsample_uniform(out.target_pool, cfg.data.n_per_class,
                                         root.fork(kTagSubsample).seed());

  // The vocabulary sees exactly what training may see: the source train
  // split plus the already-subsampled target train split.
  std::vector<std::vector<std::string>> streams = token_streams(out.source_train);
  const auto target_streams = token_streams(out.target_train);
  streams.insert(streams.end(), target_streams.begin(), target_streams.end());
  out.vocab = build_vocabulary(streams, cfg.data.min_freq);

  int k = 2;
  if (cfg.task == TaskKind::classification)
    k = std::max({out.source_train.num_classes, out.target_pool.num_classes,
                  out.target_val.num_classes, out.target_test.num_classes});

  const HeadKind task_head = cfg.task == TaskKind::classification
                                 ? HeadKind::classifier
                                 : HeadKind::regressor;
  auto make_cfg = [&](const ArchConfig& a, HeadKind head) {
    ModelConfig m;
    m.layers = a.layers;
    m.hidden = a.hidden;
    m.heads = a.heads;
    m.ffn = a.ffn;
    m.vocab_size = out.vocab.size();
    m.max_len = cfg.data.max_len;
    m.head = head;
    m.num_classes = k;
    m.validate();
    return m;
  };
  out.teacher_cfg = make_cfg(cfg.teacher, task_head);
  out.student_cfg = make_cfg(cfg.student, task_head);
  out.generator_cfg = make_cfg(cfg.generator, HeadKind::mlm);
  return out;
}

std::vector<EncodedExample> encode_dataset(const Dataset& ds,
                                           const Vocabulary& vocab,
                                           std::size_t max_len) {
  std::vector<EncodedExample> out;
  out.reserve(ds.size());
  for (const auto& ex : ds.examples) out.push_back(encode(ex, vocab, max_len));
  return out;
}

MetricValue primary_metric(const ParameterStore& params, const ModelConfig& mcfg,
                           const std::vector<EncodedExample>& data) {
  if (data.empty()) throw DataError("primary_metric: empty evaluation set");
  NoGradGuard guard;
  if (mcfg.head == HeadKind::classifier) {
    std::vector<int> preds, labels;
    preds.reserve(data.size());
    labels.reserve(data.size());
    for (const auto& ex : data) {
      const EncoderOutput o = encoder_forward(params, mcfg, ex);
      preds.push_back(static_cast<int>(argmax(o.logits.values())));
      labels.push_back(class_of(ex));
    }
    return accuracy(preds, labels);
  }
  std::vector<double> preds, labels;
  preds.reserve(data.size());
  labels.reserve(data.size());
  for (const auto& ex : data) {
    const EncoderOutput o = encoder_forward(params, mcfg, ex);
    preds.push_back(o.logits.values()[0]);
    labels.push_back(ex.label);
  }
  return pearson(preds, labels);
}

nlohmann::json eval_report(const ParameterStore& params, const ModelConfig& mcfg,
                           const std::vector<EncodedExample>& data,
                           int num_classes) {
  if (data.empty()) throw DataError("eval_report: empty evaluation set");
  NoGradGuard guard;
  nlohmann::json j;
  j["n"] = data.size();
  if (mcfg.head == HeadKind::classifier) {
    std::vector<int> preds, labels;
    for (const auto& ex : data) {
      const EncoderOutput o = encoder_forward(params, mcfg, ex);
      preds.push_back(static_cast<int>(argmax(o.logits.values())));
      labels.push_back(class_of(ex));
    }
    const MetricValue acc = accuracy(preds, labels);
    const MetricValue f = f1(preds, labels, num_classes);
    j["accuracy"] = acc.value;
    j["f1"] = f.value;
    j["f1_degenerate"] = f.degenerate;
  } else {
    std::vector<double> preds, labels;
    for (const auto& ex : data) {
      const EncoderOutput o = encoder_forward(params, mcfg, ex);
      preds.push_back(o.logits.values()[0]);
      labels.push_back(ex.label);
    }
    const MetricValue p = pearson(preds, labels);
    const MetricValue s = spearman(preds, labels);
    j["pearson"] = p.value;
    j["pearson_degenerate"] = p.degenerate;
    j["spearman"] = s.value;
    j["spearman_degenerate"] = s.degenerate;
  }
  return j;
}

Tensor mlm_masked_nll(const ParameterStore& params, const ModelConfig& cfg,
                      const EncodedExample& ex,
                      const std::vector<std::size_t>& masked_positions) {
  if (cfg.head != HeadKind::mlm)
    throw ConfigError("mlm_masked_nll: model has no mlm head");
  if (masked_positions.empty())
    throw Error("mlm_masked_nll: no positions to mask");
  EncodedExample masked = ex;
  for (std::size_t pos : masked_positions) {
    if (pos >= ex.valid_len || !ex.editable[pos])
      throw Error("mlm_masked_nll: position " + std::to_string(pos) +
                  " is not editable");
    masked.ids[pos] = Vocabulary::kMask;
  }
  const EncoderOutput o = encoder_forward(params, cfg, masked);
  Tensor acc = Tensor::scalar(0.0);
  for (std::size_t pos : masked_positions) {
    const Tensor lp = log_softmax_rows(select_row(o.mlm_logits, pos), 1.0);
    acc = sub(acc, pick(lp, ex.ids[pos]));
  }
  return scale(acc, 1.0 / static_cast<double>(masked_positions.size()));
}

ParameterStore pretrain_generator(const PipelineData& data, const RunConfig& cfg,
                                  std::uint64_t seed,
                                  GeneratorPretrainReport* report,
                                  std::ostream* csv) {
  Rng root(seed);
  std::vector<EncodedExample> corpus =
      encode_dataset(data.source_train, data.vocab, cfg.data.max_len);
  {
    const auto target =
        encode_dataset(data.target_train, data.vocab, cfg.data.max_len);
    corpus.insert(corpus.end(), target.begin(), target.end());
  }
  std::erase_if(corpus, [](const EncodedExample& e) { return e.m == 0; });
  if (corpus.empty())
    throw DataError("pretrain_generator: corpus has no maskable positions");

  // 90/10 train/holdout split.
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  {
    Rng split_rng = root.fork(kTagGenSplit);
    split_rng.shuffle(order);
  }
  const std::size_t n_hold = std::max<std::size_t>(1, corpus.size() / 10);
  std::vector<std::size_t> hold(order.begin(), order.begin() + n_hold);
  std::vector<std::size_t> train(order.begin() + n_hold, order.end());
  if (train.empty()) throw DataError("pretrain_generator: corpus too small");

  ParameterStore gen = init_model(data.generator_cfg, root.fork(kTagGenInit).seed());
  GeneratorPretrainReport rep;
  const std::size_t cand = candidate_count(data.generator_cfg.vocab_size);
  rep.chance_accuracy = cand > 0 ? 1.0 / static_cast<double>(cand) : 1.0;

  if (csv) *csv << "epoch,step,loss\n";
  if (cfg.train.generator_pretrain_epochs == 0) {
    rep.zero_epochs = true;
  } else {
    Adam opt(gen, adam_with_lr(cfg.train.generator_lr));
    const std::size_t bs = std::max<std::size_t>(1, cfg.train.batch_size);
    for (std::size_t e = 0; e < cfg.train.generator_pretrain_epochs; ++e) {
      Rng shuffle_rng = root.fork(kTagGenShuffle).fork(e);
      Rng mask_rng = root.fork(kTagGenMask).fork(e);
      shuffle_rng.shuffle(train);
      double epoch_loss = 0.0;
      std::size_t steps = 0;
      for (std::size_t b0 = 0; b0 < train.size(); b0 += bs) {
        const std::size_t b1 = std::min(train.size(), b0 + bs);
        Tensor loss = Tensor::scalar(0.0);
        for (std::size_t i = b0; i < b1; ++i) {
          const EncodedExample& ex = corpus[train[i]];
          const std::vector<std::size_t> editable = editable_positions(ex);
          std::vector<std::size_t> masked;
          for (std::size_t pos : editable)
            if (mask_rng.bernoulli(cfg.train.mask_rate)) masked.push_back(pos);
          if (masked.empty())
            masked.push_back(editable[mask_rng.uniform_int(editable.size())]);
          loss = add(loss, mlm_masked_nll(gen, data.generator_cfg, ex, masked));
        }
        loss = scale(loss, 1.0 / static_cast<double>(b1 - b0));
        gen.zero_grads();
        backward(loss);
        opt.step();
        epoch_loss += loss.item();
        ++steps;
        if (csv)
          *csv << e << ',' << (steps - 1) << ',' << csv_num(loss.item()) << "\n";
      }
      rep.final_train_loss = epoch_loss / static_cast<double>(steps);
    }
  }

  // Held-out masked-token accuracy: every editable position masked one at a
  // time, argmax over the non-reserved vocabulary.
  {
    NoGradGuard guard;
    std::size_t correct = 0, total = 0;
    for (std::size_t i : hold) {
      const EncodedExample& ex = corpus[i];
      for (std::size_t pos : editable_positions(ex)) {
        EncodedExample masked = ex;
        masked.ids[pos] = Vocabulary::kMask;
        const EncoderOutput o = encoder_forward(gen, data.generator_cfg, masked);
        const std::vector<double>& row = o.mlm_logits.values();
        const std::size_t vs = data.generator_cfg.vocab_size;
        std::size_t best = Vocabulary::kNumReserved;
        for (std::size_t v = Vocabulary::kNumReserved; v < vs; ++v)
          if (row[pos * vs + v] > row[pos * vs + best]) best = v;
        correct += best == ex.ids[pos] ? 1 : 0;
        ++total;
      }
    }
    rep.holdout_accuracy =
        total > 0 ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
  }
  if (report) *report = rep;
  return gen;
}

ParameterStore train_supervised(const ModelConfig& mcfg,
                                const std::vector<EncodedExample>& train,
                                const std::vector<EncodedExample>& val,
                                double lr, std::size_t epochs,
                                std::size_t batch_size, std::uint64_t seed,
                                SupervisedReport* report, std::ostream* csv) {
  if (train.empty()) throw DataError("train_supervised: empty training set");
  if (mcfg.head == HeadKind::mlm)
    throw ConfigError("train_supervised: task head required");
  Rng root(seed);
  ParameterStore params = init_model(mcfg, root.fork(1).seed());
  SupervisedReport rep;
  if (csv) *csv << "epoch,step,loss,val\n";

  ParameterStore best = params.clone();
  if (epochs == 0) {
    rep.best_val = primary_metric(params, mcfg, val).value;
  } else {
    Adam opt(params, adam_with_lr(lr));
    const std::size_t bs = std::max<std::size_t>(1, batch_size);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    double best_val = -std::numeric_limits<double>::infinity();
    for (std::size_t e = 0; e < epochs; ++e) {
      Rng shuffle_rng = root.fork(2).fork(e);
      shuffle_rng.shuffle(order);
      double epoch_loss = 0.0;
      std::size_t steps = 0;
      for (std::size_t b0 = 0; b0 < order.size(); b0 += bs) {
        const std::size_t b1 = std::min(order.size(), b0 + bs);
        Tensor loss = Tensor::scalar(0.0);
        for (std::size_t i = b0; i < b1; ++i) {
          const EncodedExample& ex = train[order[i]];
          loss = add(loss, supervised_loss(encoder_forward(params, mcfg, ex), ex,
                                           mcfg.head));
        }
        loss = scale(loss, 1.0 / static_cast<double>(b1 - b0));
        params.zero_grads();
        backward(loss);
        opt.step();
        epoch_loss += loss.item();
        ++steps;
        if (csv)
          *csv << e << ',' << (steps - 1) << ',' << csv_num(loss.item()) << ",\n";
      }
      rep.final_train_loss = epoch_loss / static_cast<double>(steps);
      const MetricValue v = primary_metric(params, mcfg, val);
      if (csv)
        *csv << e << ",-1," << csv_num(rep.final_train_loss) << ','
             << csv_num(v.value) << "\n";
      if (v.value > best_val) {
        best_val = v.value;
        rep.best_epoch = e;
        best.copy_values_from(params);
      }
    }
    rep.best_val = best_val;
  }
  if (report) *report = rep;
  return best;
}

ParameterStore train_teacher(const PipelineData& data, const RunConfig& cfg,
                             std::uint64_t seed, SupervisedReport* report,
                             std::ostream* csv) {
  std::vector<EncodedExample> train =
      encode_dataset(data.source_train, data.vocab, cfg.data.max_len);
  {
    const auto target =
        encode_dataset(data.target_train, data.vocab, cfg.data.max_len);
    train.insert(train.end(), target.begin(), target.end());
  }
  const auto val = encode_dataset(data.target_val, data.vocab, cfg.data.max_len);
  Rng root(seed);
  return train_supervised(data.teacher_cfg, train, val, cfg.train.teacher_lr,
                          cfg.train.teacher_epochs, cfg.train.batch_size,
                          root.fork(kTagTeacher).seed(), report, csv);
}

ParameterStore train_student_ft(const PipelineData& data, const RunConfig& cfg,
                                std::uint64_t seed, SupervisedReport* report,
                                std::ostream* csv) {
  const auto train =
      encode_dataset(data.target_train, data.vocab, cfg.data.max_len);
  const auto val = encode_dataset(data.target_val, data.vocab, cfg.data.max_len);
  Rng root(seed);
  return train_supervised(data.student_cfg, train, val, cfg.train.student_lr,
                          cfg.train.student_ft_epochs, cfg.train.batch_size,
                          root.fork(kTagStudentFt).seed(), report, csv);
}

DistillMode plain_kd_mode() { return {false, true, false, false, false}; }
DistillMode static_aug_mode() { return {true, true, false, false, false}; }
DistillMode l2a_mode() { return {true, false, true, true, true}; }
DistillMode degenerate_l2a_mode() { return {false, true, true, true, true}; }

Tensor generator_weighted_nll(const ParameterStore& generator,
                              const ModelConfig& gen_cfg,
                              const std::vector<const AugmentedSample*>& batch,
                              const std::vector<double>& weights, double temp_T) {
  if (batch.size() != weights.size())
    throw ShapeError("generator_weighted_nll: " + std::to_string(batch.size()) +
                     " samples vs " + std::to_string(weights.size()) + " weights");
  if (!(temp_T > 0.0))
    throw Error("generator_weighted_nll: temp_T must be positive");
  Tensor total = Tensor::scalar(0.0);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const AugmentedSample& s = *batch[i];
    if (s.positions.empty()) continue;
    if (s.original_words.size() != s.positions.size() ||
        s.words.size() != s.positions.size())
      throw ShapeError("generator_weighted_nll: inconsistent sample edit lists");
    EncodedExample masked = s.z;
    for (std::size_t pos : s.positions) masked.ids[pos] = Vocabulary::kMask;
    const EncoderOutput o = encoder_forward(generator, gen_cfg, masked);
    Tensor sample_ll = Tensor::scalar(0.0);
    for (std::size_t j = 0; j < s.positions.size(); ++j) {
      std::vector<double> col_mask(gen_cfg.vocab_size, 0.0);
      for (std::size_t r = 0; r < Vocabulary::kNumReserved; ++r)
        col_mask[r] = -std::numeric_limits<double>::infinity();
      col_mask[s.original_words[j]] = -std::numeric_limits<double>::infinity();
      const Tensor lp = log_softmax_rows(select_row(o.mlm_logits, s.positions[j]),
                                         temp_T, &col_mask);
      sample_ll = add(sample_ll, pick(lp, s.words[j]));
    }
    total = sub(total, scale(sample_ll, weights[i]));
  }
  return total;
}

GeneratorUpdateReport generator_l2a_update(
    ParameterStore& generator, const ModelConfig& gen_cfg,
    const std::vector<const AugmentedSample*>& batch,
    const std::vector<double>& policy_scores, double temp_T, Adam& opt) {
  if (batch.size() != policy_scores.size())
    throw ShapeError("generator_l2a_update: " + std::to_string(batch.size()) +
                     " samples vs " + std::to_string(policy_scores.size()) +
                     " policy scores");
  GeneratorUpdateReport rep;
  rep.weights.assign(batch.size(), 0.0);
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < batch.size(); ++i)
    if (batch[i] && !batch[i]->positions.empty()) active.push_back(i);
  if (active.empty()) return rep;  // nothing to fit; skipped stays true
  rep.skipped = false;

  std::vector<double> raw(active.size());
  for (std::size_t a = 0; a < active.size(); ++a)
    raw[a] = batch[active[a]]->log_ps + policy_scores[active[a]];

  if (active.size() < 2) {
    rep.flagged_small_batch = true;
    rep.weights[active[0]] = 1.0 / (1.0 + std::exp(-raw[0]));
  } else {
    const auto [mn_it, mx_it] = std::minmax_element(raw.begin(), raw.end());
    const double mn = *mn_it, mx = *mx_it;
    for (std::size_t a = 0; a < active.size(); ++a)
      rep.weights[active[a]] = mx == mn ? 1.0 : (raw[a] - mn) / (mx - mn);
  }

  const Tensor loss =
      generator_weighted_nll(generator, gen_cfg, batch, rep.weights, temp_T);
  rep.loss = loss.item();
  generator.zero_grads();
  backward(loss);
  opt.step();
  return rep;
}

DistillResult distill_run(const PipelineData& data, const RunConfig& cfg,
                          std::uint64_t seed, const ParameterStore& teacher,
                          const ParameterStore* generator,
                          const DistillMode& mode, std::ostream* metrics_csv) {
  cfg.validate();
  if (mode.sample_augment && !generator)
    throw Error("distill_run: augmentation requires a generator");
  KDConfig kdc = cfg.kd;
  kdc.task = cfg.task;
  kdc.validate();

  Rng root(seed);
  const ParameterStore teacher_f = teacher.detached_copy();

  ParameterStore student =
      init_model(data.student_cfg, root.fork(kTagDistillStudentInit).seed());
  student.add("distill.w",
              init_hidden_projection(data.student_cfg.hidden,
                                     data.teacher_cfg.hidden,
                                     root.fork(kTagDistillProjInit).seed()));
  Adam student_opt(student, adam_with_lr(cfg.train.student_lr));

  const std::size_t fdim = feature_dim(cfg.task, data.teacher_cfg.num_classes);
  ParameterStore policy = init_policy(fdim, cfg.selector.hidden,
                                      root.fork(kTagDistillPolicyInit).seed());
  Adam policy_opt(policy, adam_with_lr(cfg.selector.lr));
  BaselineState baseline;

  ParameterStore gen;
  std::optional<Adam> gen_opt;
  if (generator) {
    gen = generator->clone();
    if (mode.update_generator)
      gen_opt.emplace(gen, adam_with_lr(cfg.train.generator_lr));
  }

  const auto val = encode_dataset(data.target_val, data.vocab, cfg.data.max_len);
  const std::size_t bs = std::max<std::size_t>(1, cfg.train.batch_size);

  if (metrics_csv)
    *metrics_csv
        << "epoch,step,att,hidden,dark,kd,mean_prob,frac_selected,reward_or_val\n";

  DistillResult res;
  ParameterStore best = student.clone();
  double best_val = -std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;

  for (std::size_t e = 0; e < cfg.train.distill_epochs; ++e) {
    std::vector<AugmentedSample> corpus;
    if (mode.sample_augment) {
      Rng aug_rng = root.fork(kTagDistillAugment).fork(e);
      corpus = augment_corpus(data.source_train, data.target_train, data.vocab,
                              cfg.data.max_len, cfg.sampler, gen,
                              data.generator_cfg, aug_rng);
    } else {
      corpus = identity_corpus(data.source_train, data.target_train, data.vocab,
                               cfg.data.max_len);
    }
    if (corpus.empty()) throw DataError("distill_run: empty training corpus");

    std::vector<std::size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), 0);
    {
      Rng shuffle_rng = root.fork(kTagDistillShuffle).fork(e);
      shuffle_rng.shuffle(order);
    }
    Rng action_rng = root.fork(kTagDistillAction).fork(e);

    MetricValue val_before;
    if (mode.compute_rewards)
      val_before = primary_metric(student, data.student_cfg, val);

    EpisodeHistory history;
    history.gamma = cfg.selector.gamma;

    double ep_att = 0.0, ep_hidden = 0.0, ep_dark = 0.0, ep_kd = 0.0;
    double ep_prob = 0.0, ep_frac = 0.0;
    std::size_t n_steps = 0;

    for (std::size_t b0 = 0; b0 < order.size(); b0 += bs) {
      const std::size_t b1 = std::min(order.size(), b0 + bs);
      const std::size_t nb = b1 - b0;

      std::vector<const AugmentedSample*> batch(nb);
      for (std::size_t i = 0; i < nb; ++i) batch[i] = &corpus[order[b0 + i]];

      std::vector<EncoderOutput> t_out(nb), s_out(nb);
      std::vector<KDBreakdown> kd(nb);
      for (std::size_t i = 0; i < nb; ++i) {
        {
          NoGradGuard guard;
          t_out[i] = encoder_forward(teacher_f, data.teacher_cfg, batch[i]->z);
        }
        s_out[i] = encoder_forward(student, data.student_cfg, batch[i]->z);
        kd[i] = kd_loss(s_out[i], t_out[i], student.at("distill.w"), kdc);
      }

      std::vector<SelectorState> states;
      if (mode.update_policy || !mode.force_select) {
        std::vector<double> lps(nb);
        for (std::size_t i = 0; i < nb; ++i) lps[i] = batch[i]->log_ps;
        const std::vector<double> lps_std = standardize(lps);
        states.resize(nb);
        for (std::size_t i = 0; i < nb; ++i)
          states[i] = featurize(t_out[i].logits, s_out[i].logits, kdc.t_kd,
                                cfg.task, lps_std[i], batch[i]->z.domain);
      }

      std::vector<double> probs(nb, 1.0);
      std::vector<int> actions(nb, 1);
      if (!mode.force_select) {
        for (std::size_t i = 0; i < nb; ++i)
          probs[i] = policy_forward(policy, states[i]);
        actions = select_actions(probs, action_rng, ActionMode::sample);
      }

      Tensor loss = Tensor::scalar(0.0);
      std::size_t n_sel = 0;
      double att = 0.0, hid = 0.0, dark = 0.0, kd_total = 0.0;
      for (std::size_t i = 0; i < nb; ++i) {
        if (!actions[i]) continue;
        loss = add(loss, kd[i].total);
        att += kd[i].att;
        hid += kd[i].hidden;
        dark += kd[i].dark;
        kd_total += kd[i].total.item();
        ++n_sel;
      }
      loss = scale(loss, 1.0 / static_cast<double>(n_sel));
      student.zero_grads();
      backward(loss);
      student_opt.step();

      if (mode.update_generator && generator)
        generator_l2a_update(gen, data.generator_cfg, batch, probs,
                             cfg.sampler.temp_T, *gen_opt);

      double reward = 0.0;
      if (mode.compute_rewards) {
        const MetricValue after = primary_metric(student, data.student_cfg, val);
        reward = step_reward(after, val_before);
        val_before = after;
      }
      res.rewards.push_back(reward);
      if (mode.update_policy)
        history.transitions.push_back({states, actions, reward});

      const double mean_prob =
          std::accumulate(probs.begin(), probs.end(), 0.0) / nb;
      const double frac = static_cast<double>(n_sel) / nb;
      const double dn = static_cast<double>(n_sel);
      if (metrics_csv)
        *metrics_csv << e << ',' << n_steps << ',' << csv_num(att / dn) << ','
                     << csv_num(hid / dn) << ',' << csv_num(dark / dn) << ','
                     << csv_num(kd_total / dn) << ',' << csv_num(mean_prob) << ','
                     << csv_num(frac) << ',' << csv_num(reward) << "\n";
      ep_att += att / dn;
      ep_hidden += hid / dn;
      ep_dark += dark / dn;
      ep_kd += kd_total / dn;
      ep_prob += mean_prob;
      ep_frac += frac;
      ++n_steps;
    }

    if (mode.update_policy && !history.transitions.empty())
      policy_update(policy, history, policy_opt, baseline);

    const MetricValue v = primary_metric(student, data.student_cfg, val);
    res.val_history.push_back(v.value);
    if (v.value > best_val) {
      best_val = v.value;
      best_epoch = e;
      best.copy_values_from(student);
    }
    const double ns = static_cast<double>(n_steps);
    if (metrics_csv)
      *metrics_csv << e << ",-1," << csv_num(ep_att / ns) << ','
                   << csv_num(ep_hidden / ns) << ',' << csv_num(ep_dark / ns)
                   << ',' << csv_num(ep_kd / ns) << ',' << csv_num(ep_prob / ns)
                   << ',' << csv_num(ep_frac / ns) << ',' << csv_num(v.value)
                   << "\n";
  }

  res.student = std::move(best);
  res.best_val = best_val;
  res.best_epoch = best_epoch;
  res.policy = std::move(policy);
  res.generator = std::move(gen);
  return res;
}

namespace {

bool artifacts_present(const std::string& dir,
                       const std::vector<std::string>& names) {
  for (const auto& n : names)
    if (!std::filesystem::exists(dir + "/" + n)) return false;
  return true;
}

}  // namespace

ParameterStore ensure_generator(const RunConfig& cfg, std::uint64_t seed,
                                const PipelineData& data) {
  const std::string dir = artifact_dir(cfg, "pretrain-generator", seed, true);
  const std::string ckpt = dir + "/generator.ckpt";
  if (artifacts_present(dir, {"generator.ckpt", "report.json"})) {
    Checkpoint c = load_checkpoint(ckpt);
    if (model_config_from_json(c.config) != data.generator_cfg)
      throw Error("ensure_generator: checkpoint " + ckpt +
                  " does not match the configured generator");
    return std::move(c.params);
  }
  std::ofstream csv(dir + "/metrics.csv");
  GeneratorPretrainReport rep;
  ParameterStore gen = pretrain_generator(data, cfg, seed, &rep, &csv);
  save_checkpoint(ckpt, model_config_to_json(data.generator_cfg), gen);
  nlohmann::json j;
  j["final_train_loss"] = rep.final_train_loss;
  j["holdout_accuracy"] = rep.holdout_accuracy;
  j["chance_accuracy"] = rep.chance_accuracy;
  j["zero_epochs"] = rep.zero_epochs;
  write_json_file(dir + "/report.json", j);
  return gen;
}

ParameterStore ensure_teacher(const RunConfig& cfg, std::uint64_t seed,
                              const PipelineData& data) {
  const std::string dir = artifact_dir(cfg, "train-teacher", seed, true);
  const std::string ckpt = dir + "/teacher.ckpt";
  if (artifacts_present(dir, {"teacher.ckpt", "report.json"})) {
    Checkpoint c = load_checkpoint(ckpt);
    if (model_config_from_json(c.config) != data.teacher_cfg)
      throw Error("ensure_teacher: checkpoint " + ckpt +
                  " does not match the configured teacher");
    return std::move(c.params);
  }
  std::ofstream csv(dir + "/metrics.csv");
  SupervisedReport rep;
  ParameterStore teacher = train_teacher(data, cfg, seed, &rep, &csv);
  save_checkpoint(ckpt, model_config_to_json(data.teacher_cfg), teacher);
  nlohmann::json j;
  j["best_val"] = rep.best_val;
  j["best_epoch"] = rep.best_epoch;
  j["final_train_loss"] = rep.final_train_loss;
  j["test"] = eval_report(
      teacher, data.teacher_cfg,
      encode_dataset(data.target_test, data.vocab, cfg.data.max_len),
      data.teacher_cfg.num_classes);
  write_json_file(dir + "/report.json", j);
  return teacher;
}

nlohmann::json ensure_student_ft(const RunConfig& cfg, std::uint64_t seed,
                                 const PipelineData& data) {
  const std::string dir = artifact_dir(cfg, "student-ft", seed, true);
  if (artifacts_present(dir, {"student_ft.ckpt", "report.json"}))
    return read_json_file(dir + "/report.json");
  std::ofstream csv(dir + "/metrics.csv");
  SupervisedReport rep;
  ParameterStore student = train_student_ft(data, cfg, seed, &rep, &csv);
  save_checkpoint(dir + "/student_ft.ckpt",
                  model_config_to_json(data.student_cfg), student);
  nlohmann::json j;
  j["best_val"] = rep.best_val;
  j["best_epoch"] = rep.best_epoch;
  j["final_train_loss"] = rep.final_train_loss;
  j["test"] = eval_report(
      student, data.student_cfg,
      encode_dataset(data.target_test, data.vocab, cfg.data.max_len),
      data.student_cfg.num_classes);
  write_json_file(dir + "/report.json", j);
  return j;
}

nlohmann::json ensure_kd_noaug(const RunConfig& cfg, std::uint64_t seed,
                               const PipelineData& data,
                               const ParameterStore& teacher) {
  const std::string dir = artifact_dir(cfg, "distill-noaug", seed, true);
  if (artifacts_present(dir, {"student_kd.ckpt", "report.json"}))
    return read_json_file(dir + "/report.json");
  std::ofstream csv(dir + "/metrics.csv");
  const DistillResult res =
      distill_run(data, cfg, seed, teacher, nullptr, plain_kd_mode(), &csv);
  save_checkpoint(dir + "/student_kd.ckpt",
                  model_config_to_json(data.student_cfg), res.student);
  nlohmann::json j;
  j["best_val"] = res.best_val;
  j["best_epoch"] = res.best_epoch;
  j["val_history"] = res.val_history;
  j["test"] = eval_report(
      res.student, data.student_cfg,
      encode_dataset(data.target_test, data.vocab, cfg.data.max_len),
      data.student_cfg.num_classes);
  write_json_file(dir + "/report.json", j);
  return j;
}

nlohmann::json ensure_kd_static(const RunConfig& cfg, std::uint64_t seed,
                                const PipelineData& data,
                                const ParameterStore& teacher) {
  const std::string dir = artifact_dir(cfg, "distill", seed, true);
  if (artifacts_present(dir, {"student_kd.ckpt", "report.json"}))
    return read_json_file(dir + "/report.json");
  const ParameterStore generator = ensure_generator(cfg, seed, data);
  std::ofstream csv(dir + "/metrics.csv");
  const DistillResult res =
      distill_run(data, cfg, seed, teacher, &generator, static_aug_mode(), &csv);
  save_checkpoint(dir + "/student_kd.ckpt",
                  model_config_to_json(data.student_cfg), res.student);
  nlohmann::json j;
  j["best_val"] = res.best_val;
  j["best_epoch"] = res.best_epoch;
  j["val_history"] = res.val_history;
  j["test"] = eval_report(
      res.student, data.student_cfg,
      encode_dataset(data.target_test, data.vocab, cfg.data.max_len),
      data.student_cfg.num_classes);
  write_json_file(dir + "/report.json", j);
  return j;
}

nlohmann::json run_l2a(const RunConfig& cfg, std::uint64_t seed,
                       const DistillMode& mode) {
  cfg.validate();
  const PipelineData data = prepare_data(cfg, seed);

  nlohmann::json report;
  report["task"] =
      cfg.task == TaskKind::classification ? "classification" : "regression";
  report["seed"] = seed;
  {
    const std::size_t tc = init_model(data.teacher_cfg, 0).param_count();
    const std::size_t sc = init_model(data.student_cfg, 0).param_count();
    report["param_counts"] = {{"teacher", tc},
                              {"student", sc},
                              {"ratio", static_cast<double>(tc) /
                                            static_cast<double>(sc)}};
  }

  const ParameterStore teacher = ensure_teacher(cfg, seed, data);
  report["teacher_ft"] =
      read_json_file(artifact_dir(cfg, "train-teacher", seed) + "/report.json");
  report["student_ft"] = ensure_student_ft(cfg, seed, data);
  report["kd_noaug"] = ensure_kd_noaug(cfg, seed, data, teacher);

  const std::string dir = artifact_dir(cfg, "distill-l2a", seed, true);
  if (artifacts_present(dir, {"student_l2a.ckpt", "report.json"})) {
    report["l2a"] = read_json_file(dir + "/report.json");
  } else {
    const ParameterStore generator = ensure_generator(cfg, seed, data);
    std::ofstream csv(dir + "/metrics.csv");
    const DistillResult res =
        distill_run(data, cfg, seed, teacher, &generator, mode, &csv);
    save_checkpoint(dir + "/student_l2a.ckpt",
                    model_config_to_json(data.student_cfg), res.student);
    nlohmann::json j;
    j["best_val"] = res.best_val;
    j["best_epoch"] = res.best_epoch;
    j["val_history"] = res.val_history;
    j["test"] = eval_report(
        res.student, data.student_cfg,
        encode_dataset(data.target_test, data.vocab, cfg.data.max_len),
        data.student_cfg.num_classes);
    write_json_file(dir + "/report.json", j);
    report["l2a"] = j;
  }
  write_json_file(dir + "/comparison.json", report);
  return report;
}

}  // namespace l2a
