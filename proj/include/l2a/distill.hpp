// SPDX-License-Identifier: Apache-2.0
//
// Distillation losses: per-head attention MSE, projected hidden-state MSE,
// and soft cross-entropy on temperature-softened logits ("dark knowledge";
// plain MSE for regression heads). Combined as an unweighted sum with
// per-term ablation flags.
#pragma once

#include <cstdint>
#include <vector>

#include "l2a/model.hpp"
#include "l2a/tensor.hpp"
#include "l2a/text.hpp"

namespace l2a {

struct KDConfig {
  double t_kd = 2.0;
  bool use_att = true;
  bool use_hidden = true;
  bool use_dark = true;
  TaskKind task = TaskKind::classification;

  void validate() const;  // T_KD > 0, at least one term enabled
};

// W projects student hidden states into the teacher width; trained jointly
// with the student.
Tensor init_hidden_projection(std::size_t student_hidden,
                              std::size_t teacher_hidden, std::uint64_t seed);

// Mean over heads of elementwise MSE between paired attention maps.
// Head counts must match (maps pair index-to-index).
Tensor attention_loss(const std::vector<Tensor>& a_student,
                      const std::vector<Tensor>& a_teacher);

// MSE(H_s * W - H_t); gradient reaches both the student and W.
Tensor hidden_loss(const Tensor& h_student, const Tensor& h_teacher,
                   const Tensor& w);

// Classification: soft cross-entropy of the student under the teacher, both
// softened at T_KD (no T^2 factor). Regression: MSE of the raw outputs.
Tensor dark_loss(const Tensor& g_student, const Tensor& g_teacher, double t_kd,
                 TaskKind task);

struct KDBreakdown {
  Tensor total;
  double att = 0.0;
  double hidden = 0.0;
  double dark = 0.0;
};

KDBreakdown kd_loss(const EncoderOutput& student_out,
                    const EncoderOutput& teacher_out, const Tensor& w,
                    const KDConfig& config);

}  // namespace l2a
