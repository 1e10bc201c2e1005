// SPDX-License-Identifier: Apache-2.0
//
// Minimal dense tensor kernel with dynamic tape-based reverse-mode autodiff.
// 64-bit floats throughout; the graph is rebuilt on every step and freed when
// the last handle goes out of scope. Sized for mini transformers, not for
// anything large.
#pragma once

#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "l2a/common.hpp"
#include "l2a/rng.hpp"

namespace l2a {

struct TensorNode {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // allocated lazily, kept zeroed between steps
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void()> backward;  // pulls from this->grad into parents' grads

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

/// Value-semantic handle to a graph node. Copies share the node.
class Tensor {
public:
  Tensor() = default;

  static Tensor from_values(Shape shape, std::vector<double> values,
                            bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double v, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);
  /// Entries drawn uniformly from [-scale, scale).
  static Tensor uniform(Shape shape, double scale, Rng& rng,
                        bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t size() const { return node_->value.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  const std::vector<double>& values() const { return node_->value; }
  /// Direct mutation; only meaningful for leaf tensors (parameters).
  std::vector<double>& mutable_values() { return node_->value; }
  const std::vector<double>& grad() const;
  std::vector<double>& mutable_grad();
  void zero_grad();

  bool requires_grad() const { return node_->requires_grad; }
  double item() const;

  TensorNode* node() const { return node_.get(); }
  std::shared_ptr<TensorNode> shared_node() const { return node_; }

  explicit Tensor(std::shared_ptr<TensorNode> n) : node_(std::move(n)) {}

private:
  std::shared_ptr<TensorNode> node_;
};

/// While a guard is alive, newly created ops record no backward closures.
/// Used for evaluation-only forward passes.
class NoGradGuard {
public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

bool grad_enabled();

// ----- primitive operations ------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
/// a * b^T without materializing the transpose.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor neg(const Tensor& a);
/// m[i,:] + v for every row i.
Tensor add_rowvec(const Tensor& m, const Tensor& v);

/// Row-wise softmax of (x + mask) / temperature. `mask` (optional, one entry
/// per column, 0 or -inf) is applied to every row; -inf excludes a column.
Tensor softmax_rows(const Tensor& x, double temperature,
                    const std::vector<double>* col_mask = nullptr);
Tensor log_softmax_rows(const Tensor& x, double temperature,
                        const std::vector<double>* col_mask = nullptr);

Tensor layer_norm_rows(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                       double eps = 1e-5);

Tensor gelu(const Tensor& a);
Tensor tanh_op(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor log_op(const Tensor& a);
Tensor exp_op(const Tensor& a);

/// Gathers rows of `table` ([V x d]) by id; backward scatter-adds.
Tensor embedding_lookup(const Tensor& table, const std::vector<std::size_t>& ids);

/// Mean over all elements of (a - b)^2.
Tensor mse(const Tensor& a, const Tensor& b);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Scalar view of one element.
Tensor pick(const Tensor& a, std::size_t index);

Tensor slice_rows(const Tensor& a, std::size_t r0, std::size_t r1);
Tensor slice_cols(const Tensor& a, std::size_t c0, std::size_t c1);
Tensor select_row(const Tensor& a, std::size_t r);
Tensor concat_cols(const std::vector<Tensor>& parts);

// ----- backward ------------------------------------------------------------

/// Reverse-mode sweep from a scalar output. Gradients accumulate into the
/// grad buffers of every reachable node that requires grad; leaves not on
/// the path are untouched (their grads stay as previously zeroed).
void backward(const Tensor& output);

// ----- parameters ----------------------------------------------------------

/// Named parameter map with deterministic (insertion) iteration order.
class ParameterStore {
public:
  Tensor& add(const std::string& name, Tensor t);
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const;
  const std::vector<std::string>& names() const { return order_; }
  std::size_t size() const { return order_.size(); }
  std::size_t param_count() const;
  void zero_grads();
  /// Deep copy of values with requires_grad cleared. Used for frozen models.
  ParameterStore detached_copy() const;
  /// Deep copy preserving requires_grad.
  ParameterStore clone() const;
  void copy_values_from(const ParameterStore& other);

private:
  std::vector<std::string> order_;
  std::unordered_map<std::string, Tensor> map_;
};

// ----- gradient verification ----------------------------------------------

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_err = 0.0;
  double tol = 0.0;
  bool pass = false;
};

/// Compares analytic gradients of `loss_fn` (which must rebuild its graph on
/// every call) against central finite differences with step `eps`, for every
/// entry of every parameter in `params`. Relative error uses
/// |a - n| / max(|a|, |n|, 1e-2).
GradCheckReport grad_check(const std::function<Tensor()>& loss_fn,
                           ParameterStore& params, double eps, double tol);

}  // namespace l2a
