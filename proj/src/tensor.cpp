// SPDX-License-Identifier: Apache-2.0
#include "l2a/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace l2a {

namespace {

thread_local int g_no_grad_depth = 0;

std::shared_ptr<TensorNode> make_node(Shape shape, std::vector<double> value) {
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  return n;
}

void check_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw Error(std::string(op) + ": undefined tensor");
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

// Registers the output node and its pull-style backward closure. Parents are
// held alive through `parents`; the closure may capture raw node pointers.
Tensor finish(std::shared_ptr<TensorNode> out,
              std::vector<std::shared_ptr<TensorNode>> parents,
              std::function<void()> bw) {
  bool need = false;
  if (g_no_grad_depth == 0) {
    for (const auto& p : parents)
      if (p->requires_grad) need = true;
  }
  if (need) {
    out->requires_grad = true;
    out->parents = std::move(parents);
    out->backward = std::move(bw);
  }
  return Tensor(out);
}

struct RowStats {
  double mean;
  double inv_std;
};

}  // namespace

NoGradGuard::NoGradGuard() { ++g_no_grad_depth; }
NoGradGuard::~NoGradGuard() { --g_no_grad_depth; }
bool grad_enabled() { return g_no_grad_depth == 0; }

// ----- Tensor basics -------------------------------------------------------

Tensor Tensor::from_values(Shape shape, std::vector<double> values,
                           bool requires_grad) {
  if (shape_numel(shape) != values.size())
    throw ShapeError("Tensor: shape " + shape_str(shape) + " needs " +
                     std::to_string(shape_numel(shape)) + " values, got " +
                     std::to_string(values.size()));
  auto n = make_node(std::move(shape), std::move(values));
  n->requires_grad = requires_grad;
  return Tensor(n);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  std::vector<double> v(shape_numel(shape), 0.0);
  return from_values(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  std::vector<double> v(shape_numel(shape), value);
  return from_values(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return from_values({1}, {v}, requires_grad);
}

Tensor Tensor::uniform(Shape shape, double scale, Rng& rng, bool requires_grad) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = rng.uniform(-scale, scale);
  return from_values(std::move(shape), std::move(v), requires_grad);
}

std::size_t Tensor::rows() const {
  if (shape().size() != 2) throw ShapeError("rows: tensor is not 2-d, shape " + shape_str(shape()));
  return shape()[0];
}

std::size_t Tensor::cols() const {
  if (shape().size() != 2) throw ShapeError("cols: tensor is not 2-d, shape " + shape_str(shape()));
  return shape()[1];
}

const std::vector<double>& Tensor::grad() const {
  node_->ensure_grad();
  return node_->grad;
}

std::vector<double>& Tensor::mutable_grad() {
  node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() { node_->grad.assign(node_->value.size(), 0.0); }

double Tensor::item() const {
  if (size() != 1)
    throw ShapeError("item: tensor is not scalar, shape " + shape_str(shape()));
  return node_->value[0];
}

// ----- matmul family -------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_defined(a, "matmul");
  check_defined(b, "matmul");
  if (a.shape().size() != 2 || b.shape().size() != 2 ||
      a.shape()[1] != b.shape()[0])
    throw ShapeError("matmul: shape mismatch " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  std::vector<double> out(m * n, 0.0);
  const double* pa = a.values().data();
  const double* pb = b.values().data();
  for (std::size_t i = 0; i < m; ++i) {
    double* po = out.data() + i * n;
    for (std::size_t l = 0; l < k; ++l) {
      const double av = pa[i * k + l];
      const double* pbl = pb + l * n;
      for (std::size_t j = 0; j < n; ++j) po[j] += av * pbl[j];
    }
  }
  auto node = make_node({m, n}, std::move(out));
  TensorNode* an = a.node();
  TensorNode* bn = b.node();
  TensorNode* on = node.get();
  return finish(node, {a.shared_node(), b.shared_node()},
                [an, bn, on, m, k, n]() {
                  const double* g = on->grad.data();
                  if (an->requires_grad) {
                    an->ensure_grad();
                    double* da = an->grad.data();
                    const double* pb = bn->value.data();
                    // dA = G * B^T
                    for (std::size_t i = 0; i < m; ++i)
                      for (std::size_t l = 0; l < k; ++l) {
                        double acc = 0.0;
                        const double* gi = g + i * n;
                        const double* bl = pb + l * n;
                        for (std::size_t j = 0; j < n; ++j) acc += gi[j] * bl[j];
                        da[i * k + l] += acc;
                      }
                  }
                  if (bn->requires_grad) {
                    bn->ensure_grad();
                    double* db = bn->grad.data();
                    const double* pa = an->value.data();
                    // dB = A^T * G
                    for (std::size_t l = 0; l < k; ++l)
                      for (std::size_t i = 0; i < m; ++i) {
                        const double av = pa[i * k + l];
                        const double* gi = g + i * n;
                        double* dbl = db + l * n;
                        for (std::size_t j = 0; j < n; ++j) dbl[j] += av * gi[j];
                      }
                  }
                });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  check_defined(a, "matmul_nt");
  check_defined(b, "matmul_nt");
  if (a.shape().size() != 2 || b.shape().size() != 2 ||
      a.shape()[1] != b.shape()[1])
    throw ShapeError("matmul_nt: shape mismatch " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[0];
  std::vector<double> out(m * n, 0.0);
  const double* pa = a.values().data();
  const double* pb = b.values().data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      const double* ai = pa + i * k;
      const double* bj = pb + j * k;
      for (std::size_t l = 0; l < k; ++l) acc += ai[l] * bj[l];
      out[i * n + j] = acc;
    }
  auto node = make_node({m, n}, std::move(out));
  TensorNode* an = a.node();
  TensorNode* bn = b.node();
  TensorNode* on = node.get();
  return finish(node, {a.shared_node(), b.shared_node()},
                [an, bn, on, m, k, n]() {
                  const double* g = on->grad.data();
                  if (an->requires_grad) {
                    an->ensure_grad();
                    double* da = an->grad.data();
                    const double* pb = bn->value.data();
                    // dA = G * B
                    for (std::size_t i = 0; i < m; ++i)
                      for (std::size_t j = 0; j < n; ++j) {
                        const double gv = g[i * n + j];
                        const double* bj = pb + j * k;
                        double* dai = da + i * k;
                        for (std::size_t l = 0; l < k; ++l) dai[l] += gv * bj[l];
                      }
                  }
                  if (bn->requires_grad) {
                    bn->ensure_grad();
                    double* db = bn->grad.data();
                    const double* pa = an->value.data();
                    // dB = G^T * A
                    for (std::size_t j = 0; j < n; ++j)
                      for (std::size_t i = 0; i < m; ++i) {
                        const double gv = g[i * n + j];
                        const double* ai = pa + i * k;
                        double* dbj = db + j * k;
                        for (std::size_t l = 0; l < k; ++l) dbj[l] += gv * ai[l];
                      }
                  }
                });
}

Tensor transpose(const Tensor& a) {
  check_defined(a, "transpose");
  if (a.shape().size() != 2)
    throw ShapeError("transpose: tensor is not 2-d, shape " + shape_str(a.shape()));
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  std::vector<double> out(m * n);
  const double* pa = a.values().data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = pa[i * n + j];
  auto node = make_node({n, m}, std::move(out));
  TensorNode* an = a.node();
  TensorNode* on = node.get();
  return finish(node, {a.shared_node()}, [an, on, m, n]() {
    an->ensure_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j)
        an->grad[i * n + j] += on->grad[j * m + i];
  });
}

// ----- elementwise ---------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  check_defined(a, "add");
  check_defined(b, "add");
  check_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = a.values()[i] + b.values()[i];
  auto node = make_node(a.shape(), std::move(out));
  TensorNode* an = a.node();
  TensorNode* bn = b.node();
  TensorNode* on = node.get();
  return finish(node, {a.shared_node(), b.shared_node()}, [an, bn, on]() {
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < on->grad.size(); ++i) bn->grad[i] += on->grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_defined(a, "sub");
  check_defined(b, "sub");
  check_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = a.values()[i] - b.values()[i];
  auto node = make_node(a.shape(), std::move(out));
  TensorNode* an = a.node();
  TensorNode* bn = b.node();
  TensorNode* on = node.get();
  return finish(node, {a.shared_node(), b.shared_node()}, [an, bn, on]() {
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < on->grad.size(); ++i) bn->grad[i] -= on->grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_defined(a, "mul");
  check_defined(b, "mul");
  check_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = a.values()[i] * b.values()[i];
  auto node = make_node(a.shape(), std::move(out));
  TensorNode* an = a.node();
  TensorNode* bn = b.node();
  TensorNode* on = node.get();
  return finish(node, {a.shared_node(), b.shared_node()}, [an, bn, on]() {
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < on->grad.size(); ++i)
        an->grad[i] += on->grad[i] * bn->value[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < on->grad.size(); ++i)
        bn->grad[i] += on->grad[i] * an->value[i];
    }
  });
}

Tensor scale(const Tensor& a, double c) {
  check_defined(a, "scale");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * c;
  auto node = make_node(a.shape(), std::move(out));
  TensorNode* an = a.node();
  TensorNode* on = node.get();
  return finish(node, {a.shared_node()}, [an, on, c]() {
    an->ensure_grad();
    for (std::size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += c * on->grad[i];
  });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor add_rowvec(const Tensor& m, const Tensor& v) {
  check_defined(m, "add_rowvec");
  check_defined(v, "add_rowvec");
  if (m.shape().size() != 2 || v.size() != m.shape()[1])
    throw ShapeError("add_rowvec: shape mismatch " + shape_str(m.shape()) +
                     " vs " + shape_str(v.shape()));
  const std::size_t rows = m.shape()[0], cols = m.shape()[1];
  std::vector<double> out(m.size());
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      out[i * cols + j] = m.values()[i * cols + j] + v.values()[j];
  auto node = make_node(m.shape(), std::move(out));
  TensorNode* mn = m.node();
  TensorNode* vn = v.node();
  TensorNode* on = node.get();
  return finish(node, {m.shared_node(), v.shared_node()},
                [mn, vn, on, rows, cols]() {
                  if (mn->requires_grad) {
                    mn->ensure_grad();
                    for (std::size_t i = 0; i < on->grad.size(); ++i)
                      mn->grad[i] += on->grad[i];
                  }
                  if (vn->requires_grad) {
                    vn->ensure_grad();
                    for (std::size_t i = 0; i < rows; ++i)
                      for (std::size_t j = 0; j < cols; ++j)
                        vn->grad[j] += on->grad[i * cols + j];
                  }
                });
}

// ----- softmax family ------------------------------------------------------

namespace {

void check_softmax_args(const Tensor& x, double temperature,
                        const std::vector<double>* col_mask, const char* op) {
  check_defined(x, op);
  if (x.shape().size() != 2)
    throw ShapeError(std::string(op) + ": tensor is not 2-d, shape " +
                     shape_str(x.shape()));
  if (!(temperature > 0.0))
    throw Error(std::string(op) + ": temperature must be positive");
  if (col_mask && col_mask->size() != x.shape()[1])
    throw ShapeError(std::string(op) + ": mask size " +
                     std::to_string(col_mask->size()) + " vs cols " +
                     std::to_string(x.shape()[1]));
}

}  // namespace

Tensor softmax_rows(const Tensor& x, double temperature,
                    const std::vector<double>* col_mask) {
  check_softmax_args(x, temperature, col_mask, "softmax_rows");
  const std::size_t rows = x.shape()[0], cols = x.shape()[1];
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < rows; ++i) {
    const double* xi = x.values().data() + i * cols;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < cols; ++j) {
      const double z = (xi[j] + (col_mask ? (*col_mask)[j] : 0.0)) / temperature;
      mx = std::max(mx, z);
    }
    if (!std::isfinite(mx))
      throw Error("softmax_rows: all entries masked or non-finite in row " +
                  std::to_string(i));
    double denom = 0.0;
    double* oi = out.data() + i * cols;
    for (std::size_t j = 0; j < cols; ++j) {
      const double z = (xi[j] + (col_mask ? (*col_mask)[j] : 0.0)) / temperature;
      oi[j] = std::exp(z - mx);
      denom += oi[j];
    }
    for (std::size_t j = 0; j < cols; ++j) oi[j] /= denom;
  }
  auto node = make_node(x.shape(), std::move(out));
  TensorNode* xn = x.node();
  TensorNode* on = node.get();
  return finish(node, {x.shared_node()}, [xn, on, rows, cols, temperature]() {
    xn->ensure_grad();
    for (std::size_t i = 0; i < rows; ++i) {
      const double* p = on->value.data() + i * cols;
      const double* g = on->grad.data() + i * cols;
      double dot = 0.0;
      for (std::size_t j = 0; j < cols; ++j) dot += g[j] * p[j];
      double* dx = xn->grad.data() + i * cols;
      for (std::size_t j = 0; j < cols; ++j)
        dx[j] += p[j] * (g[j] - dot) / temperature;
    }
  });
}

Tensor log_softmax_rows(const Tensor& x, double temperature,
                        const std::vector<double>* col_mask) {
  check_softmax_args(x, temperature, col_mask, "log_softmax_rows");
  const std::size_t rows = x.shape()[0], cols = x.shape()[1];
  std::vector<double> out(x.size());
  std::vector<double> probs(x.size());  // cached for backward
  for (std::size_t i = 0; i < rows; ++i) {
    const double* xi = x.values().data() + i * cols;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < cols; ++j) {
      const double z = (xi[j] + (col_mask ? (*col_mask)[j] : 0.0)) / temperature;
      mx = std::max(mx, z);
    }
    if (!std::isfinite(mx))
      throw Error("log_softmax_rows: all entries masked or non-finite in row " +
                  std::to_string(i));
    double denom = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      const double z = (xi[j] + (col_mask ? (*col_mask)[j] : 0.0)) / temperature;
      denom += std::exp(z - mx);
    }
    const double lse = mx + std::log(denom);
    for (std::size_t j = 0; j < cols; ++j) {
      const double z = (xi[j] + (col_mask ? (*col_mask)[j] : 0.0)) / temperature;
      out[i * cols + j] = z - lse;
      probs[i * cols + j] = std::exp(z - lse);
    }
  }
  auto node = make_node(x.shape(), std::move(out));
  TensorNode* xn = x.node();
  TensorNode* on = node.get();
  return finish(node, {x.shared_node()},
                [xn, on, rows, cols, temperature, probs = std::move(probs)]() {
                  xn->ensure_grad();
                  for (std::size_t i = 0; i < rows; ++i) {
                    const double* p = probs.data() + i * cols;
                    const double* g = on->grad.data() + i * cols;
                    double gsum = 0.0;
                    for (std::size_t j = 0; j < cols; ++j) gsum += g[j];
                    double* dx = xn->grad.data() + i * cols;
                    for (std::size_t j = 0; j < cols; ++j)
                      dx[j] += (g[j] - p[j] * gsum) / temperature;
                  }
                });
}

// ----- layer norm ----------------------------------------------------------

Tensor layer_norm_rows(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                       double eps) {
  check_defined(x, "layer_norm_rows");
  if (x.shape().size() != 2)
    throw ShapeError("layer_norm_rows: tensor is not 2-d, shape " +
                     shape_str(x.shape()));
  const std::size_t rows = x.shape()[0], cols = x.shape()[1];
  if (gamma.size() != cols || beta.size() != cols)
    throw ShapeError("layer_norm_rows: gamma/beta size mismatch " +
                     shape_str(gamma.shape()) + "/" + shape_str(beta.shape()) +
                     " vs cols " + std::to_string(cols));
  std::vector<double> out(x.size());
  std::vector<RowStats> stats(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    const double* xi = x.values().data() + i * cols;
    double mean = 0.0;
    for (std::size_t j = 0; j < cols; ++j) mean += xi[j];
    mean /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      const double d = xi[j] - mean;
      var += d * d;
    }
    var /= static_cast<double>(cols);
    const double inv_std = 1.0 / std::sqrt(var + eps);
    stats[i] = {mean, inv_std};
    for (std::size_t j = 0; j < cols; ++j)
      out[i * cols + j] =
          gamma.values()[j] * (xi[j] - mean) * inv_std + beta.values()[j];
  }
  auto node = make_node(x.shape(), std::move(out));
  TensorNode* xn = x.node();
  TensorNode* gn = gamma.node();
  TensorNode* bn = beta.node();
  TensorNode* on = node.get();
  return finish(
      node, {x.shared_node(), gamma.shared_node(), beta.shared_node()},
      [xn, gn, bn, on, rows, cols, stats = std::move(stats)]() {
        const double inv_n = 1.0 / static_cast<double>(cols);
        for (std::size_t i = 0; i < rows; ++i) {
          const double* xi = xn->value.data() + i * cols;
          const double* g = on->grad.data() + i * cols;
          const double mean = stats[i].mean;
          const double inv_std = stats[i].inv_std;
          // dgamma / dbeta
          if (gn->requires_grad) {
            gn->ensure_grad();
            for (std::size_t j = 0; j < cols; ++j)
              gn->grad[j] += g[j] * (xi[j] - mean) * inv_std;
          }
          if (bn->requires_grad) {
            bn->ensure_grad();
            for (std::size_t j = 0; j < cols; ++j) bn->grad[j] += g[j];
          }
          if (xn->requires_grad) {
            xn->ensure_grad();
            // dxhat_j = g_j * gamma_j; standard layer-norm backward
            double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
            for (std::size_t j = 0; j < cols; ++j) {
              const double xhat = (xi[j] - mean) * inv_std;
              const double dxhat = g[j] * gn->value[j];
              sum_dxhat += dxhat;
              sum_dxhat_xhat += dxhat * xhat;
            }
            double* dx = xn->grad.data() + i * cols;
            for (std::size_t j = 0; j < cols; ++j) {
              const double xhat = (xi[j] - mean) * inv_std;
              const double dxhat = g[j] * gn->value[j];
              dx[j] += inv_std *
                       (dxhat - inv_n * sum_dxhat - inv_n * xhat * sum_dxhat_xhat);
            }
          }
        }
      });
}

// ----- nonlinearities ------------------------------------------------------

namespace {

Tensor unary_op(const Tensor& a, const char* name,
                const std::function<double(double)>& f,
                const std::function<double(double, double)>& df_xy) {
  check_defined(a, name);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(a.values()[i]);
  auto node = make_node(a.shape(), std::move(out));
  TensorNode* an = a.node();
  TensorNode* on = node.get();
  return finish(node, {a.shared_node()}, [an, on, df_xy]() {
    an->ensure_grad();
    for (std::size_t i = 0; i < on->grad.size(); ++i)
      an->grad[i] += on->grad[i] * df_xy(an->value[i], on->value[i]);
  });
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

}  // namespace

Tensor gelu(const Tensor& a) {
  return unary_op(
      a, "gelu",
      [](double x) {
        return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
      },
      [](double x, double) {
        const double u = kGeluC * (x + kGeluA * x * x * x);
        const double t = std::tanh(u);
        const double du = kGeluC * (1.0 + 3.0 * kGeluA * x * x);
        return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
      });
}

Tensor tanh_op(const Tensor& a) {
  return unary_op(
      a, "tanh", [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_op(
      a, "sigmoid",
      [](double x) {
        return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                        : std::exp(x) / (1.0 + std::exp(x));
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor log_op(const Tensor& a) {
  return unary_op(
      a, "log", [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

Tensor exp_op(const Tensor& a) {
  return unary_op(
      a, "exp", [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

// ----- gather / reductions -------------------------------------------------

Tensor embedding_lookup(const Tensor& table, const std::vector<std::size_t>& ids) {
  check_defined(table, "embedding_lookup");
  if (table.shape().size() != 2)
    throw ShapeError("embedding_lookup: table is not 2-d, shape " +
                     shape_str(table.shape()));
  const std::size_t v = table.shape()[0], d = table.shape()[1];
  for (std::size_t id : ids)
    if (id >= v)
      throw Error("embedding_lookup: id " + std::to_string(id) +
                  " out of range for table rows " + std::to_string(v));
  std::vector<double> out(ids.size() * d);
  for (std::size_t i = 0; i < ids.size(); ++i)
    std::copy_n(table.values().data() + ids[i] * d, d, out.data() + i * d);
  auto node = make_node({ids.size(), d}, std::move(out));
  TensorNode* tn = table.node();
  TensorNode* on = node.get();
  return finish(node, {table.shared_node()}, [tn, on, ids, d]() {
    tn->ensure_grad();
    for (std::size_t i = 0; i < ids.size(); ++i) {
      double* dst = tn->grad.data() + ids[i] * d;
      const double* src = on->grad.data() + i * d;
      for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
    }
  });
}

Tensor mse(const Tensor& a, const Tensor& b) {
  check_defined(a, "mse");
  check_defined(b, "mse");
  check_same_shape(a, b, "mse");
  const std::size_t n = a.size();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a.values()[i] - b.values()[i];
    acc += d * d;
  }
  auto node = make_node({1}, {acc / static_cast<double>(n)});
  TensorNode* an = a.node();
  TensorNode* bn = b.node();
  TensorNode* on = node.get();
  return finish(node, {a.shared_node(), b.shared_node()}, [an, bn, on, n]() {
    const double g = on->grad[0] * 2.0 / static_cast<double>(n);
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < n; ++i)
        an->grad[i] += g * (an->value[i] - bn->value[i]);
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < n; ++i)
        bn->grad[i] -= g * (an->value[i] - bn->value[i]);
    }
  });
}

Tensor sum(const Tensor& a) {
  check_defined(a, "sum");
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  auto node = make_node({1}, {acc});
  TensorNode* an = a.node();
  TensorNode* on = node.get();
  return finish(node, {a.shared_node()}, [an, on]() {
    an->ensure_grad();
    for (double& g : an->grad) g += on->grad[0];
  });
}

Tensor mean(const Tensor& a) {
  check_defined(a, "mean");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor pick(const Tensor& a, std::size_t index) {
  check_defined(a, "pick");
  if (index >= a.size())
    throw Error("pick: index " + std::to_string(index) + " out of range " +
                std::to_string(a.size()));
  auto node = make_node({1}, {a.values()[index]});
  TensorNode* an = a.node();
  TensorNode* on = node.get();
  return finish(node, {a.shared_node()}, [an, on, index]() {
    an->ensure_grad();
    an->grad[index] += on->grad[0];
  });
}

// ----- slicing / concat ----------------------------------------------------

Tensor slice_rows(const Tensor& a, std::size_t r0, std::size_t r1) {
  check_defined(a, "slice_rows");
  if (a.shape().size() != 2 || r0 >= r1 || r1 > a.shape()[0])
    throw ShapeError("slice_rows: invalid range [" + std::to_string(r0) + "," +
                     std::to_string(r1) + ") for shape " + shape_str(a.shape()));
  const std::size_t cols = a.shape()[1];
  std::vector<double> out(a.values().begin() + r0 * cols,
                          a.values().begin() + r1 * cols);
  auto node = make_node({r1 - r0, cols}, std::move(out));
  TensorNode* an = a.node();
  TensorNode* on = node.get();
  return finish(node, {a.shared_node()}, [an, on, r0, cols]() {
    an->ensure_grad();
    for (std::size_t i = 0; i < on->grad.size(); ++i)
      an->grad[r0 * cols + i] += on->grad[i];
  });
}

Tensor slice_cols(const Tensor& a, std::size_t c0, std::size_t c1) {
  check_defined(a, "slice_cols");
  if (a.shape().size() != 2 || c0 >= c1 || c1 > a.shape()[1])
    throw ShapeError("slice_cols: invalid range [" + std::to_string(c0) + "," +
                     std::to_string(c1) + ") for shape " + shape_str(a.shape()));
  const std::size_t rows = a.shape()[0], cols = a.shape()[1], w = c1 - c0;
  std::vector<double> out(rows * w);
  for (std::size_t i = 0; i < rows; ++i)
    std::copy_n(a.values().data() + i * cols + c0, w, out.data() + i * w);
  auto node = make_node({rows, w}, std::move(out));
  TensorNode* an = a.node();
  TensorNode* on = node.get();
  return finish(node, {a.shared_node()}, [an, on, rows, cols, c0, w]() {
    an->ensure_grad();
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < w; ++j)
        an->grad[i * cols + c0 + j] += on->grad[i * w + j];
  });
}

Tensor select_row(const Tensor& a, std::size_t r) { return slice_rows(a, r, r + 1); }

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw Error("concat_cols: empty part list");
  const std::size_t rows = parts[0].shape()[0];
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.shape().size() != 2 || p.shape()[0] != rows)
      throw ShapeError("concat_cols: shape mismatch " +
                       shape_str(parts[0].shape()) + " vs " +
                       shape_str(p.shape()));
    total += p.shape()[1];
  }
  std::vector<double> out(rows * total);
  std::size_t off = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.shape()[1];
    for (std::size_t i = 0; i < rows; ++i)
      std::copy_n(p.values().data() + i * w, w, out.data() + i * total + off);
    off += w;
  }
  auto node = make_node({rows, total}, std::move(out));
  std::vector<std::shared_ptr<TensorNode>> parents;
  parents.reserve(parts.size());
  for (const auto& p : parts) parents.push_back(p.shared_node());
  std::vector<std::size_t> widths;
  for (const auto& p : parts) widths.push_back(p.shape()[1]);
  TensorNode* on = node.get();
  auto parent_raw = parents;  // copy for capture
  return finish(node, std::move(parents),
                [parent_raw, on, rows, total, widths]() {
                  std::size_t off = 0;
                  for (std::size_t k = 0; k < parent_raw.size(); ++k) {
                    TensorNode* pn = parent_raw[k].get();
                    const std::size_t w = widths[k];
                    if (pn->requires_grad) {
                      pn->ensure_grad();
                      for (std::size_t i = 0; i < rows; ++i)
                        for (std::size_t j = 0; j < w; ++j)
                          pn->grad[i * w + j] += on->grad[i * total + off + j];
                    }
                    off += w;
                  }
                });
}

// ----- backward sweep ------------------------------------------------------

void backward(const Tensor& output) {
  check_defined(output, "backward");
  if (output.size() != 1)
    throw Error("backward: output must be scalar, got shape " +
                shape_str(output.shape()));
  if (!output.requires_grad()) return;  // no parameters on the path

  // Iterative post-order DFS over the requires-grad subgraph.
  std::vector<TensorNode*> order;
  std::vector<std::pair<TensorNode*, std::size_t>> stack;
  std::unordered_map<TensorNode*, int> state;  // 0 unseen, 1 open, 2 done
  stack.emplace_back(output.node(), 0);
  state[output.node()] = 1;
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      TensorNode* p = node->parents[next++].get();
      if (p->requires_grad && state[p] == 0) {
        state[p] = 1;
        stack.emplace_back(p, 0);
      }
    } else {
      state[node] = 2;
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (TensorNode* n : order) n->ensure_grad();
  output.node()->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backward) (*it)->backward();
}

// ----- ParameterStore ------------------------------------------------------

Tensor& ParameterStore::add(const std::string& name, Tensor t) {
  if (map_.count(name)) throw Error("ParameterStore: duplicate name " + name);
  order_.push_back(name);
  return map_.emplace(name, std::move(t)).first->second;
}

Tensor& ParameterStore::at(const std::string& name) {
  auto it = map_.find(name);
  if (it == map_.end()) throw Error("ParameterStore: unknown name " + name);
  return it->second;
}

const Tensor& ParameterStore::at(const std::string& name) const {
  auto it = map_.find(name);
  if (it == map_.end()) throw Error("ParameterStore: unknown name " + name);
  return it->second;
}

bool ParameterStore::contains(const std::string& name) const {
  return map_.count(name) != 0;
}

std::size_t ParameterStore::param_count() const {
  std::size_t n = 0;
  for (const auto& name : order_) n += map_.at(name).size();
  return n;
}

void ParameterStore::zero_grads() {
  for (const auto& name : order_) map_.at(name).zero_grad();
}

ParameterStore ParameterStore::detached_copy() const {
  ParameterStore out;
  for (const auto& name : order_) {
    const Tensor& t = map_.at(name);
    out.add(name, Tensor::from_values(t.shape(), t.values(), false));
  }
  return out;
}

ParameterStore ParameterStore::clone() const {
  ParameterStore out;
  for (const auto& name : order_) {
    const Tensor& t = map_.at(name);
    out.add(name, Tensor::from_values(t.shape(), t.values(), t.requires_grad()));
  }
  return out;
}

void ParameterStore::copy_values_from(const ParameterStore& other) {
  for (const auto& name : order_) {
    Tensor& dst = map_.at(name);
    const Tensor& src = other.at(name);
    if (dst.shape() != src.shape())
      throw ShapeError("copy_values_from: shape mismatch for " + name + ": " +
                       shape_str(dst.shape()) + " vs " + shape_str(src.shape()));
    dst.mutable_values() = src.values();
  }
}

// ----- grad check ----------------------------------------------------------

GradCheckReport grad_check(const std::function<Tensor()>& loss_fn,
                           ParameterStore& params, double eps, double tol) {
  if (!(eps > 0.0)) throw Error("grad_check: eps must be positive");
  params.zero_grads();
  Tensor loss = loss_fn();
  if (!is_finite(loss.item()))
    throw Error("grad_check: non-finite loss " + std::to_string(loss.item()));
  backward(loss);

  GradCheckReport report;
  report.tol = tol;
  for (const auto& name : params.names()) {
    Tensor& p = params.at(name);
    if (!p.requires_grad()) continue;
    const std::vector<double> analytic = p.grad();
    GradCheckEntry entry{name, 0.0};
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double orig = p.values()[i];
      p.mutable_values()[i] = orig + eps;
      const double fp = loss_fn().item();
      p.mutable_values()[i] = orig - eps;
      const double fm = loss_fn().item();
      p.mutable_values()[i] = orig;
      if (!is_finite(fp) || !is_finite(fm))
        throw Error("grad_check: non-finite loss while perturbing " + name);
      const double numeric = (fp - fm) / (2.0 * eps);
      const double denom =
          std::max({std::abs(analytic[i]), std::abs(numeric), 1e-2});
      entry.max_rel_err =
          std::max(entry.max_rel_err, std::abs(analytic[i] - numeric) / denom);
    }
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.entries.push_back(std::move(entry));
  }
  report.pass = report.max_rel_err < tol;
  return report;
}

}  // namespace l2a
