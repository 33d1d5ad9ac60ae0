#pragma once

// Dense double-precision tensors with reverse-mode automatic differentiation.
// A Tensor is a cheap handle onto a shared graph node; forward ops record a
// backward rule whenever gradients are enabled and some input requires them.
// Backward rules write straight into parent gradient buffers with plain
// loops, so the tape is never itself differentiated.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "tcat/rng.hpp"

namespace tcat {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << std::to_string(s[i]);
  os << ']';
  return os.str();
}

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first needed
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;
  bool requires_grad = false;

  std::size_t numel() const { return data.size(); }
  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

namespace detail {
inline bool& grad_enabled_ref() {
  thread_local bool enabled = true;
  return enabled;
}
}  // namespace detail

inline bool grad_enabled() { return detail::grad_enabled_ref(); }

// Scoped inference mode: ops created inside record no backward rules.
struct NoGradGuard {
  bool prev;
  NoGradGuard() : prev(detail::grad_enabled_ref()) { detail::grad_enabled_ref() = false; }
  ~NoGradGuard() { detail::grad_enabled_ref() = prev; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

inline void check_finite(const char* op, const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x))
      throw std::domain_error(std::string(op) + ": non-finite value in result");
  }
}

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}

  static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false) {
    if (shape_numel(shape) != data.size())
      throw std::invalid_argument("Tensor: shape " + shape_str(shape) +
                                  " does not match data length " + std::to_string(data.size()));
    check_finite("Tensor", data);
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->data = std::move(data);
    n->requires_grad = requires_grad;
    if (requires_grad) n->ensure_grad();
    return Tensor(std::move(n));
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    std::vector<double> d(shape_numel(shape), 0.0);
    return from_data(std::move(shape), std::move(d), requires_grad);
  }

  static Tensor full(Shape shape, double value, bool requires_grad = false) {
    std::vector<double> d(shape_numel(shape), value);
    return from_data(std::move(shape), std::move(d), requires_grad);
  }

  static Tensor scalar(double value) { return from_data({1}, {value}); }

  static Tensor randn(Shape shape, Rng& rng, double stddev, bool requires_grad = true) {
    std::vector<double> d(shape_numel(shape));
    for (auto& x : d) x = rng.normal(0.0, stddev);
    return from_data(std::move(shape), std::move(d), requires_grad);
  }

  // Glorot-style init for weight matrices (fan_in x fan_out).
  static Tensor glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    double s = std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
    return randn({fan_in, fan_out}, rng, s, true);
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return check()->shape; }
  std::size_t ndim() const { return check()->shape.size(); }
  std::size_t numel() const { return check()->data.size(); }
  std::size_t dim(std::size_t i) const { return check()->shape.at(i); }

  std::size_t rows() const {
    require_2d("rows");
    return node_->shape[0];
  }
  std::size_t cols() const {
    require_2d("cols");
    return node_->shape[1];
  }

  const std::vector<double>& values() const { return check()->data; }
  std::vector<double>& mutable_values() { return check()->data; }

  double item() const {
    if (numel() != 1) throw std::invalid_argument("Tensor::item: tensor is not scalar");
    return node_->data[0];
  }

  double at(std::size_t r, std::size_t c) const {
    require_2d("at");
    if (r >= node_->shape[0] || c >= node_->shape[1])
      throw std::out_of_range("Tensor::at: index out of range");
    return node_->data[r * node_->shape[1] + c];
  }

  bool requires_grad() const { return check()->requires_grad; }

  const std::vector<double>& grad() const {
    check()->ensure_grad();
    return node_->grad;
  }

  void zero_grad() {
    check();
    if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
    else if (node_->requires_grad) node_->ensure_grad();
  }

  const std::shared_ptr<Node>& node() const { return check(); }

 private:
  const std::shared_ptr<Node>& check() const {
    if (!node_) throw std::logic_error("Tensor: undefined handle");
    return node_;
  }
  void require_2d(const char* who) const {
    if (check()->shape.size() != 2)
      throw std::invalid_argument(std::string("Tensor::") + who + ": tensor is not 2-d, shape " +
                                  shape_str(node_->shape));
  }

  std::shared_ptr<Node> node_;
};

namespace detail {

inline Tensor make_op(const char* name, Shape shape, std::vector<double> data,
                      std::vector<std::shared_ptr<Node>> parents,
                      std::function<void(Node&)> backward) {
  if (shape_numel(shape) != data.size())
    throw std::logic_error(std::string(name) + ": internal shape/data mismatch");
  check_finite(name, data);
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  bool rg = false;
  if (grad_enabled()) {
    for (const auto& p : parents) {
      if (p && p->requires_grad) {
        rg = true;
        break;
      }
    }
  }
  if (rg) {
    n->requires_grad = true;
    n->parents = std::move(parents);
    n->backward = std::move(backward);
  }
  return Tensor(std::move(n));
}

inline void accumulate(const std::shared_ptr<Node>& p, std::size_t i, double v) {
  p->grad[i] += v;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise and broadcast arithmetic

inline void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
}

inline Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  std::vector<double> out(a.numel());
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  auto pa = a.node(), pb = b.node();
  return detail::make_op("add", a.shape(), std::move(out), {pa, pb}, [pa, pb](Node& o) {
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i) pa->grad[i] += o.grad[i];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i) pb->grad[i] += o.grad[i];
    }
  });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  std::vector<double> out(a.numel());
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  auto pa = a.node(), pb = b.node();
  return detail::make_op("sub", a.shape(), std::move(out), {pa, pb}, [pa, pb](Node& o) {
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i) pa->grad[i] += o.grad[i];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i) pb->grad[i] -= o.grad[i];
    }
  });
}

// out = k * a + c, elementwise
inline Tensor affine(const Tensor& a, double k, double c) {
  std::vector<double> out(a.numel());
  const auto& av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = k * av[i] + c;
  auto pa = a.node();
  return detail::make_op("affine", a.shape(), std::move(out), {pa}, [pa, k](Node& o) {
    if (!pa->requires_grad) return;
    pa->ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i) pa->grad[i] += k * o.grad[i];
  });
}

inline Tensor scale(const Tensor& a, double k) { return affine(a, k, 0.0); }

inline Tensor hadamard(const Tensor& a, const Tensor& b) {
  require_same_shape("hadamard", a, b);
  std::vector<double> out(a.numel());
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  auto pa = a.node(), pb = b.node();
  return detail::make_op("hadamard", a.shape(), std::move(out), {pa, pb}, [pa, pb](Node& o) {
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i) pa->grad[i] += o.grad[i] * pb->data[i];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i) pb->grad[i] += o.grad[i] * pa->data[i];
    }
  });
}

// a: m x n, bias: length-n vector added to every row
inline Tensor add_row(const Tensor& a, const Tensor& bias) {
  if (a.ndim() != 2 || bias.numel() != a.cols())
    throw std::invalid_argument("add_row: need m x n input and length-n bias, got " +
                                shape_str(a.shape()) + " and " + shape_str(bias.shape()));
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(a.numel());
  const auto& av = a.values();
  const auto& bv = bias.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = av[i * n + j] + bv[j];
  auto pa = a.node(), pb = bias.node();
  return detail::make_op("add_row", a.shape(), std::move(out), {pa, pb}, [pa, pb, m, n](Node& o) {
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i) pa->grad[i] += o.grad[i];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) pb->grad[j] += o.grad[i * n + j];
    }
  });
}

// ---------------------------------------------------------------------------
// matrix products

// C = A (m x k) * B (k x n)
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.cols() != b.rows())
    throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                                shape_str(b.shape()));
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(m * n, 0.0);
  {
    const double* A = a.values().data();
    const double* B = b.values().data();
    double* C = out.data();
    for (std::size_t i = 0; i < m; ++i) {
      const double* Ai = A + i * k;
      double* Ci = C + i * n;
      for (std::size_t t = 0; t < k; ++t) {
        const double av = Ai[t];
        const double* Bt = B + t * n;
        for (std::size_t j = 0; j < n; ++j) Ci[j] += av * Bt[j];
      }
    }
  }
  auto pa = a.node(), pb = b.node();
  return detail::make_op("matmul", {m, n}, std::move(out), {pa, pb}, [pa, pb, m, k, n](Node& o) {
    const double* G = o.grad.data();
    if (pa->requires_grad) {
      pa->ensure_grad();
      const double* B = pb->data.data();
      double* dA = pa->grad.data();
      // dA[i,t] += sum_j G[i,j] * B[t,j]
      for (std::size_t i = 0; i < m; ++i) {
        const double* Gi = G + i * n;
        double* dAi = dA + i * k;
        for (std::size_t t = 0; t < k; ++t) {
          const double* Bt = B + t * n;
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += Gi[j] * Bt[j];
          dAi[t] += acc;
        }
      }
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      const double* A = pa->data.data();
      double* dB = pb->grad.data();
      // dB[t,j] += sum_i A[i,t] * G[i,j]
      for (std::size_t i = 0; i < m; ++i) {
        const double* Ai = A + i * k;
        const double* Gi = G + i * n;
        for (std::size_t t = 0; t < k; ++t) {
          const double av = Ai[t];
          double* dBt = dB + t * n;
          for (std::size_t j = 0; j < n; ++j) dBt[j] += av * Gi[j];
        }
      }
    }
  });
}

// C = A (m x k) * B^T where B is n x k; used for attention scores Q K^T.
inline Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.cols() != b.cols())
    throw std::invalid_argument("matmul_nt: incompatible shapes " + shape_str(a.shape()) +
                                " and " + shape_str(b.shape()));
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  std::vector<double> out(m * n, 0.0);
  {
    const double* A = a.values().data();
    const double* B = b.values().data();
    double* C = out.data();
    for (std::size_t i = 0; i < m; ++i) {
      const double* Ai = A + i * k;
      double* Ci = C + i * n;
      for (std::size_t j = 0; j < n; ++j) {
        const double* Bj = B + j * k;
        double acc = 0.0;
        for (std::size_t t = 0; t < k; ++t) acc += Ai[t] * Bj[t];
        Ci[j] = acc;
      }
    }
  }
  auto pa = a.node(), pb = b.node();
  return detail::make_op(
      "matmul_nt", {m, n}, std::move(out), {pa, pb}, [pa, pb, m, k, n](Node& o) {
        const double* G = o.grad.data();
        if (pa->requires_grad) {
          pa->ensure_grad();
          const double* B = pb->data.data();
          double* dA = pa->grad.data();
          // dA[i,t] += sum_j G[i,j] * B[j,t]
          for (std::size_t i = 0; i < m; ++i) {
            const double* Gi = G + i * n;
            double* dAi = dA + i * k;
            for (std::size_t j = 0; j < n; ++j) {
              const double g = Gi[j];
              const double* Bj = B + j * k;
              for (std::size_t t = 0; t < k; ++t) dAi[t] += g * Bj[t];
            }
          }
        }
        if (pb->requires_grad) {
          pb->ensure_grad();
          const double* A = pa->data.data();
          double* dB = pb->grad.data();
          // dB[j,t] += sum_i G[i,j] * A[i,t]
          for (std::size_t i = 0; i < m; ++i) {
            const double* Gi = G + i * n;
            const double* Ai = A + i * k;
            for (std::size_t j = 0; j < n; ++j) {
              const double g = Gi[j];
              double* dBj = dB + j * k;
              for (std::size_t t = 0; t < k; ++t) dBj[t] += g * Ai[t];
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// softmax

// Attention mask over an a x b score matrix; rows == 1 broadcasts.
struct AttnMask {
  std::size_t rows = 0, cols = 0;
  std::vector<std::uint8_t> allow;

  bool allowed(std::size_t r, std::size_t c) const {
    return allow[(rows == 1 ? 0 : r) * cols + c] != 0;
  }

  static AttnMask causal(std::size_t n) {
    AttnMask m;
    m.rows = m.cols = n;
    m.allow.assign(n * n, 0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j <= i; ++j) m.allow[i * n + j] = 1;
    return m;
  }

  // single broadcast row allowing the first `valid` key positions
  static AttnMask key_prefix(std::size_t cols, std::size_t valid) {
    if (valid > cols) throw std::invalid_argument("AttnMask: valid exceeds cols");
    AttnMask m;
    m.rows = 1;
    m.cols = cols;
    m.allow.assign(cols, 0);
    for (std::size_t j = 0; j < valid; ++j) m.allow[j] = 1;
    return m;
  }
};

// Rowwise softmax; masked positions act as -inf logits and come out exactly 0.
// A fully masked row is a contract violation.
inline Tensor softmax_rows(const Tensor& x, const AttnMask* mask = nullptr) {
  if (x.ndim() != 2) throw std::invalid_argument("softmax_rows: need 2-d input");
  const std::size_t m = x.rows(), n = x.cols();
  if (mask) {
    if (mask->cols != n || (mask->rows != 1 && mask->rows != m))
      throw std::invalid_argument("softmax_rows: mask shape mismatch");
  }
  std::vector<double> out(m * n, 0.0);
  const auto& xv = x.values();
  for (std::size_t i = 0; i < m; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j)
      if (!mask || mask->allowed(i, j)) mx = std::max(mx, xv[i * n + j]);
    if (!std::isfinite(mx))
      throw std::invalid_argument("softmax_rows: fully masked row " + std::to_string(i));
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (!mask || mask->allowed(i, j)) {
        double e = std::exp(xv[i * n + j] - mx);
        out[i * n + j] = e;
        z += e;
      }
    }
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= z;
  }
  auto px = x.node();
  auto yv = std::make_shared<std::vector<double>>(out);  // softmax values for backward
  return detail::make_op("softmax_rows", x.shape(), std::move(out), {px},
                         [px, yv, m, n](Node& o) {
                           if (!px->requires_grad) return;
                           px->ensure_grad();
                           const auto& y = *yv;
                           for (std::size_t i = 0; i < m; ++i) {
                             double dot = 0.0;
                             for (std::size_t j = 0; j < n; ++j)
                               dot += o.grad[i * n + j] * y[i * n + j];
                             for (std::size_t j = 0; j < n; ++j)
                               px->grad[i * n + j] += y[i * n + j] * (o.grad[i * n + j] - dot);
                           }
                         });
}

// ---------------------------------------------------------------------------
// activations

enum class Act { gelu, sigmoid };

inline double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

inline Tensor sigmoid(const Tensor& x) {
  std::vector<double> out(x.numel());
  const auto& xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid_scalar(xv[i]);
  auto px = x.node();
  auto yv = std::make_shared<std::vector<double>>(out);
  return detail::make_op("sigmoid", x.shape(), std::move(out), {px}, [px, yv](Node& o) {
    if (!px->requires_grad) return;
    px->ensure_grad();
    const auto& y = *yv;
    for (std::size_t i = 0; i < o.grad.size(); ++i)
      px->grad[i] += o.grad[i] * y[i] * (1.0 - y[i]);
  });
}

// Exact GeLU, 0.5 x (1 + erf(x / sqrt(2))).
inline Tensor gelu(const Tensor& x) {
  static constexpr double kInvSqrt2 = 0.7071067811865475244;
  static constexpr double kInvSqrt2Pi = 0.3989422804014326779;
  std::vector<double> out(x.numel());
  const auto& xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = 0.5 * xv[i] * (1.0 + std::erf(xv[i] * kInvSqrt2));
  auto px = x.node();
  return detail::make_op("gelu", x.shape(), std::move(out), {px}, [px](Node& o) {
    if (!px->requires_grad) return;
    px->ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i) {
      double v = px->data[i];
      double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
      double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
      px->grad[i] += o.grad[i] * (cdf + v * pdf);
    }
  });
}

inline Tensor activation(const Tensor& x, Act kind) {
  switch (kind) {
    case Act::gelu: return gelu(x);
    case Act::sigmoid: return sigmoid(x);
  }
  throw std::invalid_argument("activation: unknown kind");
}

// ---------------------------------------------------------------------------
// layer norm

// Rowwise layer normalization: each length-n row is standardized to mean 0,
// variance 1 (biased), then scaled by gain and shifted by bias.
inline Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                         double eps = 1e-5) {
  if (x.ndim() != 2) throw std::invalid_argument("layer_norm: need 2-d input");
  const std::size_t m = x.rows(), n = x.cols();
  if (n < 2) throw std::invalid_argument("layer_norm: row length must be >= 2");
  if (gain.numel() != n || bias.numel() != n)
    throw std::invalid_argument("layer_norm: gain/bias length mismatch");
  std::vector<double> out(m * n);
  std::vector<double> xhat(m * n);
  std::vector<double> inv_sigma(m);
  const auto& xv = x.values();
  const auto& gv = gain.values();
  const auto& bv = bias.values();
  for (std::size_t i = 0; i < m; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += xv[i * n + j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double d = xv[i * n + j] - mu;
      var += d * d;
    }
    var /= static_cast<double>(n);
    double is = 1.0 / std::sqrt(var + eps);
    inv_sigma[i] = is;
    for (std::size_t j = 0; j < n; ++j) {
      double h = (xv[i * n + j] - mu) * is;
      xhat[i * n + j] = h;
      out[i * n + j] = h * gv[j] + bv[j];
    }
  }
  auto px = x.node(), pg = gain.node(), pb = bias.node();
  auto xh = std::make_shared<std::vector<double>>(std::move(xhat));
  auto is = std::make_shared<std::vector<double>>(std::move(inv_sigma));
  return detail::make_op(
      "layer_norm", x.shape(), std::move(out), {px, pg, pb}, [px, pg, pb, xh, is, m, n](Node& o) {
        const auto& h = *xh;
        for (std::size_t i = 0; i < m; ++i) {
          if (pg->requires_grad) {
            pg->ensure_grad();
            for (std::size_t j = 0; j < n; ++j)
              pg->grad[j] += o.grad[i * n + j] * h[i * n + j];
          }
          if (pb->requires_grad) {
            pb->ensure_grad();
            for (std::size_t j = 0; j < n; ++j) pb->grad[j] += o.grad[i * n + j];
          }
          if (px->requires_grad) {
            px->ensure_grad();
            double mean_dy = 0.0, mean_dyh = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
              double dy = o.grad[i * n + j] * pg->data[j];
              mean_dy += dy;
              mean_dyh += dy * h[i * n + j];
            }
            mean_dy /= static_cast<double>(n);
            mean_dyh /= static_cast<double>(n);
            for (std::size_t j = 0; j < n; ++j) {
              double dy = o.grad[i * n + j] * pg->data[j];
              px->grad[i * n + j] += (*is)[i] * (dy - mean_dy - h[i * n + j] * mean_dyh);
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// gather / concat / slice

// Rows of `table` selected by `ids`; backward scatters gradient rows
// additively, so repeated ids accumulate.
inline Tensor gather_rows(const Tensor& table, const std::vector<int>& ids) {
  if (table.ndim() != 2) throw std::invalid_argument("gather_rows: table must be 2-d");
  const std::size_t v = table.rows(), d = table.cols();
  std::vector<double> out(ids.size() * d);
  const auto& tv = table.values();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= v)
      throw std::out_of_range("gather_rows: id " + std::to_string(ids[i]) + " out of range [0," +
                              std::to_string(v) + ")");
    std::copy_n(tv.begin() + static_cast<std::size_t>(ids[i]) * d, d, out.begin() + i * d);
  }
  auto pt = table.node();
  auto idc = std::make_shared<std::vector<int>>(ids);
  return detail::make_op("gather_rows", {ids.size(), d}, std::move(out), {pt},
                         [pt, idc, d](Node& o) {
                           if (!pt->requires_grad) return;
                           pt->ensure_grad();
                           for (std::size_t i = 0; i < idc->size(); ++i) {
                             double* dst = pt->grad.data() +
                                           static_cast<std::size_t>((*idc)[i]) * d;
                             const double* src = o.grad.data() + i * d;
                             for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
                           }
                         });
}

inline Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no parts");
  const std::size_t n = parts[0].cols();
  std::size_t m = 0;
  for (const auto& p : parts) {
    if (p.ndim() != 2 || p.cols() != n)
      throw std::invalid_argument("concat_rows: column mismatch");
    m += p.rows();
  }
  std::vector<double> out;
  out.reserve(m * n);
  std::vector<std::shared_ptr<Node>> parents;
  for (const auto& p : parts) {
    out.insert(out.end(), p.values().begin(), p.values().end());
    parents.push_back(p.node());
  }
  auto ps = parents;
  return detail::make_op("concat_rows", {m, n}, std::move(out), std::move(parents),
                         [ps](Node& o) {
                           std::size_t off = 0;
                           for (const auto& p : ps) {
                             std::size_t cnt = p->data.size();
                             if (p->requires_grad) {
                               p->ensure_grad();
                               for (std::size_t i = 0; i < cnt; ++i)
                                 p->grad[i] += o.grad[off + i];
                             }
                             off += cnt;
                           }
                         });
}

inline Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no parts");
  const std::size_t m = parts[0].rows();
  std::size_t n = 0;
  for (const auto& p : parts) {
    if (p.ndim() != 2 || p.rows() != m) throw std::invalid_argument("concat_cols: row mismatch");
    n += p.cols();
  }
  std::vector<double> out(m * n);
  std::vector<std::shared_ptr<Node>> parents;
  std::size_t off = 0;
  for (const auto& p : parts) {
    const std::size_t pc = p.cols();
    const auto& pv = p.values();
    for (std::size_t i = 0; i < m; ++i)
      std::copy_n(pv.begin() + i * pc, pc, out.begin() + i * n + off);
    off += pc;
    parents.push_back(p.node());
  }
  auto ps = parents;
  return detail::make_op("concat_cols", {m, n}, std::move(out), std::move(parents),
                         [ps, m, n](Node& o) {
                           std::size_t off2 = 0;
                           for (const auto& p : ps) {
                             std::size_t pc = p->shape[1];
                             if (p->requires_grad) {
                               p->ensure_grad();
                               for (std::size_t i = 0; i < m; ++i)
                                 for (std::size_t j = 0; j < pc; ++j)
                                   p->grad[i * pc + j] += o.grad[i * n + off2 + j];
                             }
                             off2 += pc;
                           }
                         });
}

inline Tensor slice_rows(const Tensor& x, std::size_t start, std::size_t len) {
  if (x.ndim() != 2 || start + len > x.rows())
    throw std::invalid_argument("slice_rows: range out of bounds");
  const std::size_t n = x.cols();
  std::vector<double> out(x.values().begin() + start * n, x.values().begin() + (start + len) * n);
  auto px = x.node();
  return detail::make_op("slice_rows", {len, n}, std::move(out), {px},
                         [px, start, n](Node& o) {
                           if (!px->requires_grad) return;
                           px->ensure_grad();
                           for (std::size_t i = 0; i < o.grad.size(); ++i)
                             px->grad[start * n + i] += o.grad[i];
                         });
}

inline Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t len) {
  if (x.ndim() != 2 || start + len > x.cols())
    throw std::invalid_argument("slice_cols: range out of bounds");
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<double> out(m * len);
  const auto& xv = x.values();
  for (std::size_t i = 0; i < m; ++i)
    std::copy_n(xv.begin() + i * n + start, len, out.begin() + i * len);
  auto px = x.node();
  return detail::make_op("slice_cols", {m, len}, std::move(out), {px},
                         [px, start, m, n, len](Node& o) {
                           if (!px->requires_grad) return;
                           px->ensure_grad();
                           for (std::size_t i = 0; i < m; ++i)
                             for (std::size_t j = 0; j < len; ++j)
                               px->grad[i * n + start + j] += o.grad[i * len + j];
                         });
}

// Same data, new shape (numel must match).
inline Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel())
    throw std::invalid_argument("reshape: numel mismatch " + shape_str(x.shape()) + " -> " +
                                shape_str(shape));
  std::vector<double> out = x.values();
  auto px = x.node();
  return detail::make_op("reshape", std::move(shape), std::move(out), {px}, [px](Node& o) {
    if (!px->requires_grad) return;
    px->ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i) px->grad[i] += o.grad[i];
  });
}

// ---------------------------------------------------------------------------
// reductions and losses

inline Tensor sum_all(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  auto px = x.node();
  return detail::make_op("sum_all", {1}, {s}, {px}, [px](Node& o) {
    if (!px->requires_grad) return;
    px->ensure_grad();
    for (auto& g : px->grad) g += o.grad[0];
  });
}

inline Tensor mean_all(const Tensor& x) {
  return scale(sum_all(x), 1.0 / static_cast<double>(x.numel()));
}

// Mean negative log-likelihood of `targets` under rowwise softmax of logits.
inline Tensor cross_entropy_rows(const Tensor& logits, const std::vector<int>& targets) {
  if (logits.ndim() != 2 || logits.rows() != targets.size())
    throw std::invalid_argument("cross_entropy_rows: logits rows must match target count");
  const std::size_t m = logits.rows(), n = logits.cols();
  if (m == 0) throw std::invalid_argument("cross_entropy_rows: empty batch");
  const auto& zv = logits.values();
  auto probs = std::make_shared<std::vector<double>>(m * n);
  double loss = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= n)
      throw std::out_of_range("cross_entropy_rows: target out of range");
    double mx = zv[i * n];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, zv[i * n + j]);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double e = std::exp(zv[i * n + j] - mx);
      (*probs)[i * n + j] = e;
      z += e;
    }
    for (std::size_t j = 0; j < n; ++j) (*probs)[i * n + j] /= z;
    loss += -(zv[i * n + static_cast<std::size_t>(targets[i])] - mx - std::log(z));
  }
  loss /= static_cast<double>(m);
  auto pz = logits.node();
  auto tg = std::make_shared<std::vector<int>>(targets);
  return detail::make_op("cross_entropy_rows", {1}, {loss}, {pz}, [pz, probs, tg, m, n](Node& o) {
    if (!pz->requires_grad) return;
    pz->ensure_grad();
    const double g = o.grad[0] / static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) pz->grad[i * n + j] += g * (*probs)[i * n + j];
      pz->grad[i * n + static_cast<std::size_t>((*tg)[i])] -= g;
    }
  });
}

// Mean binary cross-entropy of sigmoid(logits) against labels in [0,1].
inline Tensor bce_with_logits(const Tensor& logits, const std::vector<double>& labels) {
  if (logits.numel() != labels.size())
    throw std::invalid_argument("bce_with_logits: size mismatch");
  if (labels.empty()) throw std::invalid_argument("bce_with_logits: empty batch");
  const auto& zv = logits.values();
  double loss = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    double z = zv[i], y = labels[i];
    // max(z,0) - z*y + log(1 + exp(-|z|))
    loss += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
  }
  loss /= static_cast<double>(labels.size());
  auto pz = logits.node();
  auto lb = std::make_shared<std::vector<double>>(labels);
  return detail::make_op("bce_with_logits", {1}, {loss}, {pz}, [pz, lb](Node& o) {
    if (!pz->requires_grad) return;
    pz->ensure_grad();
    const double g = o.grad[0] / static_cast<double>(lb->size());
    for (std::size_t i = 0; i < lb->size(); ++i)
      pz->grad[i] += g * (sigmoid_scalar(pz->data[i]) - (*lb)[i]);
  });
}

// ---------------------------------------------------------------------------
// detach / dropout

// Value copy cut loose from the graph.
inline Tensor detach(const Tensor& x) {
  return Tensor::from_data(x.shape(), x.values(), false);
}

// Inverted dropout; rate 0 is the identity and consumes no randomness.
inline Tensor dropout(const Tensor& x, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout: rate must be in [0,1)");
  if (rate == 0.0) return x;
  const double keep = 1.0 - rate;
  auto mask = std::make_shared<std::vector<double>>(x.numel());
  std::vector<double> out(x.numel());
  const auto& xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) {
    (*mask)[i] = rng.bernoulli(rate) ? 0.0 : 1.0 / keep;
    out[i] = xv[i] * (*mask)[i];
  }
  auto px = x.node();
  return detail::make_op("dropout", x.shape(), std::move(out), {px}, [px, mask](Node& o) {
    if (!px->requires_grad) return;
    px->ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i) px->grad[i] += o.grad[i] * (*mask)[i];
  });
}

// ---------------------------------------------------------------------------
// backward

// Topologically ordered op records reachable from a root; parents precede
// children, each node appears exactly once.
struct GradGraph {
  std::vector<Node*> order;
};

inline GradGraph build_grad_graph(const Tensor& root) {
  GradGraph g;
  if (!root.defined() || !root.requires_grad()) return g;
  std::unordered_set<Node*> visited;
  // iterative post-order DFS
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next].get();
      ++next;
      if (p && p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      g.order.push_back(node);
      stack.pop_back();
    }
  }
  return g;
}

// Reverse-mode sweep from a scalar loss. Parameters not reachable from the
// loss keep their (zero-initialized) gradients.
inline void backward(const Tensor& loss) {
  if (loss.numel() != 1)
    throw std::invalid_argument("backward: loss must be a scalar, got shape " +
                                shape_str(loss.shape()));
  if (!loss.requires_grad()) return;  // nothing trainable feeds it
  GradGraph g = build_grad_graph(loss);
  loss.node()->ensure_grad();
  loss.node()->grad[0] += 1.0;
  for (auto it = g.order.rbegin(); it != g.order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
}

inline int argmax_row(const Tensor& x, std::size_t row) {
  const std::size_t n = x.cols();
  const auto& v = x.values();
  std::size_t best = 0;
  for (std::size_t j = 1; j < n; ++j)
    if (v[row * n + j] > v[row * n + best]) best = j;
  return static_cast<int>(best);
}

}  // namespace tcat
