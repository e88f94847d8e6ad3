#pragma once

// Dense 2-D tensors with tape-based reverse-mode differentiation.
// Scalars are 1x1, column vectors are dx1. The op set is the minimum a
// small recurrent classifier needs; each op records a backward closure
// on the thread's active Tape.

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace edukd {

struct TensorNode {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;
  std::vector<double> grad;  // empty until backward touches it
  bool requires_grad = false;
};

namespace detail {

inline void ensure_grad(TensorNode& n) {
  if (n.grad.empty()) n.grad.assign(n.data.size(), 0.0);
}

inline std::string shape_str(const TensorNode& n) {
  return std::to_string(n.rows) + "x" + std::to_string(n.cols);
}

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::size_t rows, std::size_t cols, bool requires_grad = false) {
    auto n = std::make_shared<TensorNode>();
    n->rows = rows;
    n->cols = cols;
    n->data.assign(rows * cols, 0.0);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
  }

  static Tensor from_data(std::size_t rows, std::size_t cols, std::vector<double> values,
                          bool requires_grad = false) {
    if (values.size() != rows * cols)
      throw std::invalid_argument("Tensor: data length " + std::to_string(values.size()) +
                                  " does not match shape " + std::to_string(rows) + "x" +
                                  std::to_string(cols));
    auto n = std::make_shared<TensorNode>();
    n->rows = rows;
    n->cols = cols;
    n->data = std::move(values);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
  }

  static Tensor column(std::vector<double> values, bool requires_grad = false) {
    std::size_t r = values.size();
    return from_data(r, 1, std::move(values), requires_grad);
  }

  static Tensor scalar(double v, bool requires_grad = false) {
    return from_data(1, 1, {v}, requires_grad);
  }

  bool defined() const { return node_ != nullptr; }
  std::size_t rows() const { return node_->rows; }
  std::size_t cols() const { return node_->cols; }
  std::size_t size() const { return node_->data.size(); }

  double& at(std::size_t r, std::size_t c) { return node_->data[r * node_->cols + c]; }
  double at(std::size_t r, std::size_t c) const { return node_->data[r * node_->cols + c]; }
  double& operator[](std::size_t i) { return node_->data[i]; }
  double operator[](std::size_t i) const { return node_->data[i]; }

  double item() const {
    if (size() != 1)
      throw std::invalid_argument("Tensor::item: tensor is " + detail::shape_str(*node_) +
                                  ", not a scalar");
    return node_->data[0];
  }

  const std::vector<double>& values() const { return node_->data; }
  std::vector<double>& values() { return node_->data; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool b) { node_->requires_grad = b; }

  // Gradient view; zeros if backward never reached this tensor.
  const std::vector<double>& grad() const {
    detail::ensure_grad(*node_);
    return node_->grad;
  }
  void zero_grad() {
    node_->grad.assign(node_->data.size(), 0.0);
  }

  Tensor clone() const {
    auto n = std::make_shared<TensorNode>();
    n->rows = node_->rows;
    n->cols = node_->cols;
    n->data = node_->data;
    n->requires_grad = node_->requires_grad;
    return Tensor(std::move(n));
  }

  const std::shared_ptr<TensorNode>& node() const { return node_; }

  explicit Tensor(std::shared_ptr<TensorNode> n) : node_(std::move(n)) {}

 private:
  std::shared_ptr<TensorNode> node_;
};

// Tape of executed operations for one forward computation. A run owns its
// tape exclusively; tapes are per-thread via a thread-local active pointer.
class Tape {
 public:
  Tape() : prev_(active_ref()) { active_ref() = this; }
  ~Tape() { active_ref() = prev_; }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active() { return active_ref(); }

  void push(std::function<void()> back) { back_.push_back(std::move(back)); }
  std::size_t op_count() const { return back_.size(); }

  // Reverse pass in exact reverse execution order. A tape may be consumed
  // only once; a second call without a new forward pass is an error.
  void backward(const Tensor& loss) {
    if (consumed_)
      throw std::logic_error("Tape::backward: tape already consumed; run a new forward pass");
    if (!loss.defined() || loss.size() != 1)
      throw std::invalid_argument("Tape::backward: loss must be a scalar tensor");
    if (!loss.requires_grad())
      throw std::invalid_argument("Tape::backward: loss is detached from the computation record");
    consumed_ = true;
    detail::ensure_grad(*loss.node());
    loss.node()->grad[0] += 1.0;
    for (auto it = back_.rbegin(); it != back_.rend(); ++it) (*it)();
  }

 private:
  static Tape*& active_ref() {
    thread_local Tape* t = nullptr;
    return t;
  }

  std::vector<std::function<void()>> back_;
  Tape* prev_ = nullptr;
  bool consumed_ = false;
};

namespace detail {

inline bool track(std::initializer_list<const Tensor*> inputs) {
  if (Tape::active() == nullptr) return false;
  for (const Tensor* t : inputs)
    if ((*t).requires_grad()) return true;
  return false;
}

inline Tensor make_out(std::size_t rows, std::size_t cols, std::vector<double> data, bool tracked) {
  Tensor out = Tensor::from_data(rows, cols, std::move(data), tracked);
  return out;
}

// True if this node's grad holds any signal worth propagating.
inline bool has_grad(const TensorNode& n) { return !n.grad.empty(); }

}  // namespace detail

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(op) + ": shape mismatch: " +
                                detail::shape_str(*a.node()) + " vs " +
                                detail::shape_str(*b.node()));
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows())
    throw std::invalid_argument("matmul: inner dimensions disagree: " +
                                detail::shape_str(*a.node()) + " · " +
                                detail::shape_str(*b.node()));
  std::size_t p = a.rows(), q = a.cols(), r = b.cols();
  std::vector<double> out(p * r, 0.0);
  const auto& ad = a.values();
  const auto& bd = b.values();
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t k = 0; k < q; ++k) {
      double av = ad[i * q + k];
      if (av == 0.0) continue;
      for (std::size_t j = 0; j < r; ++j) out[i * r + j] += av * bd[k * r + j];
    }
  bool tracked = detail::track({&a, &b});
  Tensor c = detail::make_out(p, r, std::move(out), tracked);
  if (tracked) {
    auto an = a.node(), bn = b.node(), cn = c.node();
    Tape::active()->push([an, bn, cn, p, q, r] {
      if (!detail::has_grad(*cn)) return;
      const auto& gc = cn->grad;
      if (an->requires_grad) {
        detail::ensure_grad(*an);
        // dA = dC · Bᵀ
        for (std::size_t i = 0; i < p; ++i)
          for (std::size_t k = 0; k < q; ++k) {
            double s = 0.0;
            for (std::size_t j = 0; j < r; ++j) s += gc[i * r + j] * bn->data[k * r + j];
            an->grad[i * q + k] += s;
          }
      }
      if (bn->requires_grad) {
        detail::ensure_grad(*bn);
        // dB = Aᵀ · dC
        for (std::size_t k = 0; k < q; ++k)
          for (std::size_t j = 0; j < r; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < p; ++i) s += an->data[i * q + k] * gc[i * r + j];
            bn->grad[k * r + j] += s;
          }
      }
    });
  }
  return c;
}

inline Tensor transpose(const Tensor& a) {
  std::size_t p = a.rows(), q = a.cols();
  std::vector<double> out(p * q);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < q; ++j) out[j * p + i] = a.at(i, j);
  bool tracked = detail::track({&a});
  Tensor c = detail::make_out(q, p, std::move(out), tracked);
  if (tracked) {
    auto an = a.node(), cn = c.node();
    Tape::active()->push([an, cn, p, q] {
      if (!detail::has_grad(*cn) || !an->requires_grad) return;
      detail::ensure_grad(*an);
      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < q; ++j) an->grad[i * q + j] += cn->grad[j * p + i];
    });
  }
  return c;
}

namespace detail {

template <class Fwd, class Back>
Tensor binary_elementwise(const Tensor& a, const Tensor& b, const char* name, Fwd f, Back back) {
  check_same_shape(a, b, name);
  std::size_t n = a.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = f(a[i], b[i]);
  bool tracked = track({&a, &b});
  Tensor c = make_out(a.rows(), a.cols(), std::move(out), tracked);
  if (tracked) {
    auto an = a.node(), bn = b.node(), cn = c.node();
    Tape::active()->push([an, bn, cn, n, back] {
      if (!has_grad(*cn)) return;
      back(*an, *bn, *cn, n);
    });
  }
  return c;
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
  return detail::binary_elementwise(
      a, b, "add", [](double x, double y) { return x + y; },
      [](TensorNode& an, TensorNode& bn, TensorNode& cn, std::size_t n) {
        if (an.requires_grad) {
          detail::ensure_grad(an);
          for (std::size_t i = 0; i < n; ++i) an.grad[i] += cn.grad[i];
        }
        if (bn.requires_grad) {
          detail::ensure_grad(bn);
          for (std::size_t i = 0; i < n; ++i) bn.grad[i] += cn.grad[i];
        }
      });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  return detail::binary_elementwise(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](TensorNode& an, TensorNode& bn, TensorNode& cn, std::size_t n) {
        if (an.requires_grad) {
          detail::ensure_grad(an);
          for (std::size_t i = 0; i < n; ++i) an.grad[i] += cn.grad[i];
        }
        if (bn.requires_grad) {
          detail::ensure_grad(bn);
          for (std::size_t i = 0; i < n; ++i) bn.grad[i] -= cn.grad[i];
        }
      });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  return detail::binary_elementwise(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](TensorNode& an, TensorNode& bn, TensorNode& cn, std::size_t n) {
        if (an.requires_grad) {
          detail::ensure_grad(an);
          for (std::size_t i = 0; i < n; ++i) an.grad[i] += cn.grad[i] * bn.data[i];
        }
        if (bn.requires_grad) {
          detail::ensure_grad(bn);
          for (std::size_t i = 0; i < n; ++i) bn.grad[i] += cn.grad[i] * an.data[i];
        }
      });
}

// Multiply a tensor by a 1x1 scalar tensor.
inline Tensor smul(const Tensor& s, const Tensor& t) {
  if (s.size() != 1)
    throw std::invalid_argument("smul: first operand must be a scalar, got " +
                                detail::shape_str(*s.node()));
  double sv = s[0];
  std::size_t n = t.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = sv * t[i];
  bool tracked = detail::track({&s, &t});
  Tensor c = detail::make_out(t.rows(), t.cols(), std::move(out), tracked);
  if (tracked) {
    auto sn = s.node(), tn = t.node(), cn = c.node();
    Tape::active()->push([sn, tn, cn, n] {
      if (!detail::has_grad(*cn)) return;
      if (sn->requires_grad) {
        detail::ensure_grad(*sn);
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += cn->grad[i] * tn->data[i];
        sn->grad[0] += acc;
      }
      if (tn->requires_grad) {
        detail::ensure_grad(*tn);
        double sv = sn->data[0];
        for (std::size_t i = 0; i < n; ++i) tn->grad[i] += cn->grad[i] * sv;
      }
    });
  }
  return c;
}

// Multiply by a plain constant.
inline Tensor scale(const Tensor& t, double c) {
  std::size_t n = t.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = c * t[i];
  bool tracked = detail::track({&t});
  Tensor o = detail::make_out(t.rows(), t.cols(), std::move(out), tracked);
  if (tracked) {
    auto tn = t.node(), on = o.node();
    Tape::active()->push([tn, on, n, c] {
      if (!detail::has_grad(*on) || !tn->requires_grad) return;
      detail::ensure_grad(*tn);
      for (std::size_t i = 0; i < n; ++i) tn->grad[i] += c * on->grad[i];
    });
  }
  return o;
}

namespace detail {

template <class Fwd, class Dout>
Tensor unary_elementwise(const Tensor& a, Fwd f, Dout d_from_out) {
  std::size_t n = a.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = f(a[i]);
  bool tracked = track({&a});
  Tensor c = make_out(a.rows(), a.cols(), std::move(out), tracked);
  if (tracked) {
    auto an = a.node(), cn = c.node();
    Tape::active()->push([an, cn, n, d_from_out] {
      if (!has_grad(*cn) || !an->requires_grad) return;
      ensure_grad(*an);
      for (std::size_t i = 0; i < n; ++i) an->grad[i] += cn->grad[i] * d_from_out(cn->data[i]);
    });
  }
  return c;
}

}  // namespace detail

inline double sigmoid_value(double x) {
  // split on sign so exp never overflows
  if (x >= 0.0) {
    double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

inline Tensor sigmoid(const Tensor& a) {
  return detail::unary_elementwise(a, [](double x) { return sigmoid_value(x); },
                                   [](double y) { return y * (1.0 - y); });
}

inline Tensor tanh(const Tensor& a) {
  return detail::unary_elementwise(a, [](double x) { return std::tanh(x); },
                                   [](double y) { return 1.0 - y * y; });
}

// Softmax over a column vector, computed with max subtraction.
inline Tensor stable_softmax(const Tensor& v) {
  if (v.size() == 0) throw std::invalid_argument("stable_softmax: empty vector");
  if (v.cols() != 1)
    throw std::invalid_argument("stable_softmax: expected a column vector, got " +
                                detail::shape_str(*v.node()));
  std::size_t n = v.size();
  double mx = v[0];
  for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, v[i]);
  std::vector<double> out(n);
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::exp(v[i] - mx);
    z += out[i];
  }
  for (std::size_t i = 0; i < n; ++i) out[i] /= z;
  bool tracked = detail::track({&v});
  Tensor s = detail::make_out(n, 1, std::move(out), tracked);
  if (tracked) {
    auto vn = v.node(), sn = s.node();
    Tape::active()->push([vn, sn, n] {
      if (!detail::has_grad(*sn) || !vn->requires_grad) return;
      detail::ensure_grad(*vn);
      // dv_i = s_i (g_i − Σ_j g_j s_j)
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += sn->grad[j] * sn->data[j];
      for (std::size_t i = 0; i < n; ++i) vn->grad[i] += sn->data[i] * (sn->grad[i] - dot);
    });
  }
  return s;
}

// Gather n scalar tensors into one nx1 column.
inline Tensor stack_scalars(const std::vector<Tensor>& scalars) {
  if (scalars.empty()) throw std::invalid_argument("stack_scalars: empty input");
  std::size_t n = scalars.size();
  std::vector<double> out(n);
  bool any_grad = false;
  for (std::size_t i = 0; i < n; ++i) {
    if (scalars[i].size() != 1)
      throw std::invalid_argument("stack_scalars: element " + std::to_string(i) +
                                  " is not a scalar");
    out[i] = scalars[i][0];
    any_grad = any_grad || scalars[i].requires_grad();
  }
  bool tracked = Tape::active() != nullptr && any_grad;
  Tensor c = detail::make_out(n, 1, std::move(out), tracked);
  if (tracked) {
    std::vector<std::shared_ptr<TensorNode>> ins;
    ins.reserve(n);
    for (const auto& s : scalars) ins.push_back(s.node());
    auto cn = c.node();
    Tape::active()->push([ins = std::move(ins), cn] {
      if (!detail::has_grad(*cn)) return;
      for (std::size_t i = 0; i < ins.size(); ++i) {
        if (!ins[i]->requires_grad) continue;
        detail::ensure_grad(*ins[i]);
        ins[i]->grad[0] += cn->grad[i];
      }
    });
  }
  return c;
}

// Pick element i of a column vector as a 1x1 tensor.
inline Tensor index(const Tensor& v, std::size_t i) {
  if (i >= v.size())
    throw std::invalid_argument("index: position " + std::to_string(i) + " out of range for " +
                                detail::shape_str(*v.node()));
  bool tracked = detail::track({&v});
  Tensor c = detail::make_out(1, 1, {v[i]}, tracked);
  if (tracked) {
    auto vn = v.node(), cn = c.node();
    Tape::active()->push([vn, cn, i] {
      if (!detail::has_grad(*cn) || !vn->requires_grad) return;
      detail::ensure_grad(*vn);
      vn->grad[i] += cn->grad[0];
    });
  }
  return c;
}

// Concatenate two column vectors.
inline Tensor concat(const Tensor& a, const Tensor& b) {
  if (a.cols() != 1 || b.cols() != 1)
    throw std::invalid_argument("concat: expected column vectors, got " +
                                detail::shape_str(*a.node()) + " and " +
                                detail::shape_str(*b.node()));
  std::size_t p = a.size(), q = b.size();
  std::vector<double> out(p + q);
  for (std::size_t i = 0; i < p; ++i) out[i] = a[i];
  for (std::size_t i = 0; i < q; ++i) out[p + i] = b[i];
  bool tracked = detail::track({&a, &b});
  Tensor c = detail::make_out(p + q, 1, std::move(out), tracked);
  if (tracked) {
    auto an = a.node(), bn = b.node(), cn = c.node();
    Tape::active()->push([an, bn, cn, p, q] {
      if (!detail::has_grad(*cn)) return;
      if (an->requires_grad) {
        detail::ensure_grad(*an);
        for (std::size_t i = 0; i < p; ++i) an->grad[i] += cn->grad[i];
      }
      if (bn->requires_grad) {
        detail::ensure_grad(*bn);
        for (std::size_t i = 0; i < q; ++i) bn->grad[i] += cn->grad[p + i];
      }
    });
  }
  return c;
}

// Mean of squared differences over all elements.
inline Tensor mse(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mse");
  std::size_t n = a.size();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double d = a[i] - b[i];
    acc += d * d;
  }
  acc /= static_cast<double>(n);
  bool tracked = detail::track({&a, &b});
  Tensor c = detail::make_out(1, 1, {acc}, tracked);
  if (tracked) {
    auto an = a.node(), bn = b.node(), cn = c.node();
    Tape::active()->push([an, bn, cn, n] {
      if (!detail::has_grad(*cn)) return;
      double g = cn->grad[0] * 2.0 / static_cast<double>(n);
      if (an->requires_grad) {
        detail::ensure_grad(*an);
        for (std::size_t i = 0; i < n; ++i) an->grad[i] += g * (an->data[i] - bn->data[i]);
      }
      if (bn->requires_grad) {
        detail::ensure_grad(*bn);
        for (std::size_t i = 0; i < n; ++i) bn->grad[i] -= g * (an->data[i] - bn->data[i]);
      }
    });
  }
  return c;
}

// −Σ target_c · log softmax(logits)_c. The target is a probability
// distribution (one-hot or a teacher's softmaxed logits) and is treated
// as a constant; gradients flow into the logits only.
inline Tensor cross_entropy(const Tensor& logits, const Tensor& target) {
  check_same_shape(logits, target, "cross_entropy");
  std::size_t n = logits.size();
  if (n == 0) throw std::invalid_argument("cross_entropy: empty input");
  double tsum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (target[i] < 0.0)
      throw std::invalid_argument("cross_entropy: target has a negative component");
    tsum += target[i];
  }
  if (std::abs(tsum - 1.0) > 1e-6)
    throw std::invalid_argument("cross_entropy: target sums to " + std::to_string(tsum) +
                                ", not 1");
  double mx = logits[0];
  for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, logits[i]);
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) z += std::exp(logits[i] - mx);
  double logz = std::log(z) + mx;
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) loss -= target[i] * (logits[i] - logz);
  bool tracked = detail::track({&logits});
  Tensor c = detail::make_out(1, 1, {loss}, tracked);
  if (tracked) {
    auto ln = logits.node(), tn = target.node(), cn = c.node();
    Tape::active()->push([ln, tn, cn, n, mx, logz] {
      if (!detail::has_grad(*cn) || !ln->requires_grad) return;
      detail::ensure_grad(*ln);
      double g = cn->grad[0];
      for (std::size_t i = 0; i < n; ++i) {
        double p = std::exp(ln->data[i] - logz);
        ln->grad[i] += g * (p - tn->data[i]);
      }
      (void)mx;
    });
  }
  return c;
}

inline void zero_grads(const std::vector<Tensor>& params) {
  for (const auto& p : params) p.node()->grad.assign(p.size(), 0.0);
}

}  // namespace edukd
