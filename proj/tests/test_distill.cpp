// SPDX-License-Identifier: Apache-2.0
//
// Distillation loss checks: closed-form values for the attention, hidden and
// dark terms, ablation accounting, and gradient behavior at the optimum.
#include <doctest.h>

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "l2a/distill.hpp"
#include "l2a/model.hpp"
#include "l2a/rng.hpp"
#include "l2a/tensor.hpp"

using namespace l2a;
using l2a::testing::encode_words;
using l2a::testing::tiny_config;
using l2a::testing::word_vocab;

TEST_CASE("attention loss vanishes on identical maps") {
  Tensor a = Tensor::from_values({2, 2}, {0.9, 0.1, 0.4, 0.6});
  CHECK(attention_loss({a, a}, {a, a}).item() == 0.0);
}

TEST_CASE("attention loss of swapped one-hot maps is exactly one") {
  Tensor eye = Tensor::from_values({2, 2}, {1, 0, 0, 1});
  Tensor anti = Tensor::from_values({2, 2}, {0, 1, 1, 0});
  CHECK(std::abs(attention_loss({eye}, {anti}).item() - 1.0) < 1e-12);
}

TEST_CASE("attention loss is symmetric in its arguments") {
  Rng rng(3);
  Tensor a = Tensor::uniform({3, 3}, 1.0, rng);
  Tensor b = Tensor::uniform({3, 3}, 1.0, rng);
  CHECK(std::abs(attention_loss({a}, {b}).item() -
                 attention_loss({b}, {a}).item()) < 1e-12);
}

TEST_CASE("attention loss averages over heads") {
  Tensor eye = Tensor::from_values({2, 2}, {1, 0, 0, 1});
  Tensor anti = Tensor::from_values({2, 2}, {0, 1, 1, 0});
  // One matching head and one fully swapped head average to 1/2.
  double v = attention_loss({eye, eye}, {eye, anti}).item();
  CHECK(std::abs(v - 0.5) < 1e-12);
}

TEST_CASE("attention loss requires matching head counts") {
  Tensor a = Tensor::from_values({2, 2}, {1, 0, 0, 1});
  CHECK_THROWS_AS(attention_loss({a}, {a, a}), Error);
  CHECK_THROWS_AS(attention_loss({}, {}), Error);
}

TEST_CASE("hidden loss vanishes when the projection aligns the states") {
  Rng rng(5);
  Tensor h_s = Tensor::uniform({3, 4}, 1.0, rng);
  Tensor eye = Tensor::from_values(
      {4, 4}, {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1});
  CHECK(hidden_loss(h_s, h_s, eye).item() == 0.0);
}

TEST_CASE("hidden loss vanishes for zero projection onto zero targets") {
  Rng rng(6);
  Tensor h_s = Tensor::uniform({3, 4}, 1.0, rng);
  Tensor h_t = Tensor::zeros({3, 5});
  Tensor w = Tensor::zeros({4, 5});
  CHECK(hidden_loss(h_s, h_t, w).item() == 0.0);
}

TEST_CASE("hidden loss gradient reaches the projection matrix") {
  Rng rng(7);
  Tensor h_s = Tensor::uniform({3, 4}, 1.0, rng);
  Tensor h_t = Tensor::uniform({3, 5}, 1.0, rng);
  ParameterStore params;
  params.add("w", Tensor::uniform({4, 5}, 0.6, rng, true));
  auto loss = [&]() { return hidden_loss(h_s, h_t, params.at("w")); };
  GradCheckReport rep = grad_check(loss, params, 1e-5, 1e-3);
  CHECK(rep.pass);
}

TEST_CASE("dark loss of matching uniform binary logits is ln 2") {
  Tensor g = Tensor::from_values({1, 2}, {0.0, 0.0});
  double v = dark_loss(g, g, 1.0, TaskKind::classification).item();
  CHECK(std::abs(v - std::log(2.0)) < 1e-12);
}

TEST_CASE("dark loss equals the softened teacher entropy at a match") {
  Tensor g = Tensor::from_values({1, 3}, {1.2, -0.4, 0.3});
  for (double t : {1.0, 2.0, 4.0}) {
    Tensor p = softmax_rows(g, t);
    double h = 0.0;
    for (double q : p.values()) h -= q * std::log(q);
    CHECK(std::abs(dark_loss(g, g, t, TaskKind::classification).item() - h) <
          1e-12);
  }
}

TEST_CASE("matching the teacher minimizes the dark loss") {
  Rng rng(9);
  Tensor g_t = Tensor::from_values({1, 3}, {0.8, -0.2, 0.1});
  double at_match = dark_loss(g_t, g_t, 2.0, TaskKind::classification).item();
  for (int trial = 0; trial < 20; ++trial) {
    Tensor g_s = Tensor::uniform({1, 3}, 2.0, rng);
    CHECK(dark_loss(g_s, g_t, 2.0, TaskKind::classification).item() >=
          at_match - 1e-12);
  }
}

TEST_CASE("dark loss gradient vanishes at the matching point") {
  ParameterStore params;
  params.add("g", Tensor::from_values({1, 3}, {0.5, -1.0, 0.25}, true));
  Tensor g_t = Tensor::from_values({1, 3}, {0.5, -1.0, 0.25});
  params.zero_grads();
  backward(dark_loss(params.at("g"), g_t, 2.0, TaskKind::classification));
  for (double g : params.at("g").grad()) CHECK(std::abs(g) < 1e-12);
}

TEST_CASE("regression dark loss is the squared output gap") {
  Tensor s = Tensor::from_values({1, 1}, {0.3});
  Tensor t = Tensor::from_values({1, 1}, {0.5});
  double v = dark_loss(s, t, 2.0, TaskKind::regression).item();
  CHECK(std::abs(v - 0.04) < 1e-12);
}

TEST_CASE("dark loss rejects mismatched class counts") {
  Tensor a = Tensor::zeros({1, 2});
  Tensor b = Tensor::zeros({1, 3});
  CHECK_THROWS_AS(dark_loss(a, b, 1.0, TaskKind::classification), ShapeError);
}

TEST_CASE("kd config requires a positive temperature and at least one term") {
  KDConfig cfg;
  cfg.t_kd = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.t_kd = 2.0;
  cfg.use_att = cfg.use_hidden = cfg.use_dark = false;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

namespace {

struct KDFixture {
  Vocabulary vocab = word_vocab(6);
  ModelConfig s_cfg;
  ModelConfig t_cfg;
  ParameterStore student;
  ParameterStore teacher;
  EncodedExample ex;
  Tensor w;

  KDFixture() {
    s_cfg = tiny_config(vocab.size(), HeadKind::classifier, 6);
    t_cfg = s_cfg;
    t_cfg.hidden = 12;
    t_cfg.ffn = 24;
    student = init_model(s_cfg, 21);
    teacher = init_model(t_cfg, 22);
    ex = encode_words(vocab, {5, 7, 8}, 6);
    w = init_hidden_projection(s_cfg.hidden, t_cfg.hidden, 23);
  }
};

}  // namespace

TEST_CASE("kd total is the sum of the enabled terms") {
  KDFixture f;
  EncoderOutput s_out = encoder_forward(f.student, f.s_cfg, f.ex);
  EncoderOutput t_out = encoder_forward(f.teacher, f.t_cfg, f.ex);
  KDConfig cfg;
  KDBreakdown all = kd_loss(s_out, t_out, f.w, cfg);
  CHECK(all.att > 0.0);
  CHECK(all.hidden > 0.0);
  CHECK(all.dark > 0.0);
  CHECK(std::abs(all.total.item() - (all.att + all.hidden + all.dark)) < 1e-12);

  KDConfig no_att = cfg;
  no_att.use_att = false;
  KDBreakdown rest = kd_loss(s_out, t_out, f.w, no_att);
  CHECK(rest.att == 0.0);
  CHECK(std::abs(all.total.item() - rest.total.item() - all.att) < 1e-12);
  CHECK(std::abs(rest.hidden - all.hidden) < 1e-12);
  CHECK(std::abs(rest.dark - all.dark) < 1e-12);
}

TEST_CASE("kd loss is non-negative and zero at a perfect regression match") {
  KDFixture f;
  // Same architecture, same weights, identity projection: every term is 0.
  ModelConfig cfg = tiny_config(f.vocab.size(), HeadKind::regressor, 6);
  ParameterStore model = init_model(cfg, 31);
  EncoderOutput out_a = encoder_forward(model, cfg, f.ex);
  EncoderOutput out_b = encoder_forward(model, cfg, f.ex);
  std::vector<double> eye(cfg.hidden * cfg.hidden, 0.0);
  for (std::size_t i = 0; i < cfg.hidden; ++i) eye[i * cfg.hidden + i] = 1.0;
  Tensor w = Tensor::from_values({cfg.hidden, cfg.hidden}, eye);
  KDConfig kdc;
  kdc.task = TaskKind::regression;
  KDBreakdown b = kd_loss(out_a, out_b, w, kdc);
  CHECK(b.total.item() == 0.0);
}

TEST_CASE("kd gradients flow to the student and the projection") {
  KDFixture f;
  ParameterStore trainees = f.student.clone();
  trainees.add("distill.w", f.w);
  KDConfig cfg;
  auto loss = [&]() {
    EncoderOutput s_out = encoder_forward(trainees, f.s_cfg, f.ex);
    EncoderOutput t_out = encoder_forward(f.teacher, f.t_cfg, f.ex);
    return kd_loss(s_out, t_out, trainees.at("distill.w"), cfg).total;
  };
  GradCheckReport rep = grad_check(loss, trainees, 1e-5, 1e-3);
  CHECK(rep.pass);
}
