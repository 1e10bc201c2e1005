// SPDX-License-Identifier: Apache-2.0
#include "l2a/distill.hpp"

#include <cmath>

namespace l2a {

void KDConfig::validate() const {
  if (!(t_kd > 0.0)) throw ConfigError("KD config: T_KD must be positive");
  if (!use_att && !use_hidden && !use_dark)
    throw ConfigError("KD config: at least one loss term must be enabled");
}

Tensor init_hidden_projection(std::size_t student_hidden,
                              std::size_t teacher_hidden, std::uint64_t seed) {
  Rng rng(seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(student_hidden));
  return Tensor::uniform({student_hidden, teacher_hidden}, scale, rng, true);
}

Tensor attention_loss(const std::vector<Tensor>& a_student,
                      const std::vector<Tensor>& a_teacher) {
  if (a_student.empty() || a_student.size() != a_teacher.size())
    throw ShapeError("attention_loss: head count mismatch " +
                     std::to_string(a_student.size()) + " vs " +
                     std::to_string(a_teacher.size()));
  Tensor acc;
  for (std::size_t h = 0; h < a_student.size(); ++h) {
    Tensor term = mse(a_student[h], a_teacher[h]);
    acc = h == 0 ? term : add(acc, term);
  }
  return scale(acc, 1.0 / static_cast<double>(a_student.size()));
}

Tensor hidden_loss(const Tensor& h_student, const Tensor& h_teacher,
                   const Tensor& w) {
  return mse(matmul(h_student, w), h_teacher);
}

Tensor dark_loss(const Tensor& g_student, const Tensor& g_teacher, double t_kd,
                 TaskKind task) {
  if (!(t_kd > 0.0)) throw Error("dark_loss: T_KD must be positive");
  if (task == TaskKind::regression) return mse(g_student, g_teacher);
  if (g_student.shape() != g_teacher.shape())
    throw ShapeError("dark_loss: class count mismatch " +
                     shape_str(g_student.shape()) + " vs " +
                     shape_str(g_teacher.shape()));
  // Soft CE: -sum_k p_t(k) log p_s(k), both at temperature T_KD.
  Tensor log_q = log_softmax_rows(g_student, t_kd);
  Tensor p;
  {
    NoGradGuard ng;  // teacher side is a fixed target
    Tensor g_detached = Tensor::from_values(g_teacher.shape(), g_teacher.values(), false);
    p = softmax_rows(g_detached, t_kd);
  }
  return neg(sum(mul(p, log_q)));
}

KDBreakdown kd_loss(const EncoderOutput& student_out,
                    const EncoderOutput& teacher_out, const Tensor& w,
                    const KDConfig& config) {
  config.validate();
  KDBreakdown out;
  std::vector<Tensor> terms;
  if (config.use_att) {
    Tensor t = attention_loss(student_out.attention, teacher_out.attention);
    out.att = t.item();
    terms.push_back(t);
  }
  if (config.use_hidden) {
    Tensor t = hidden_loss(student_out.hidden, teacher_out.hidden, w);
    out.hidden = t.item();
    terms.push_back(t);
  }
  if (config.use_dark) {
    Tensor t = dark_loss(student_out.logits, teacher_out.logits, config.t_kd,
                         config.task);
    out.dark = t.item();
    terms.push_back(t);
  }
  out.total = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) out.total = add(out.total, terms[i]);
  return out;
}

}  // namespace l2a
