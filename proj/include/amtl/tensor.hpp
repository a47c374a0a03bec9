#ifndef AMTL_TENSOR_HPP
#define AMTL_TENSOR_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace amtl {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  out += "]";
  return out;
}

[[noreturn]] inline void shape_error(const std::string& op, const Shape& a, const Shape& b) {
  throw std::invalid_argument(op + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

template <typename S>
class Tensor;

// One backward-graph record: operation tag, parent handles, and the closure
// that scatters the output gradient into the parents.
template <typename S>
struct TensorNode {
  const char* op = "";
  std::vector<Tensor<S>> parents;
  std::function<void(const std::vector<S>&)> backprop;
  bool consumed = false;
};

template <typename S>
struct TensorImpl {
  Shape shape;
  std::vector<S> values;
  std::vector<S> grad;  // allocated lazily; zeros until something accumulates
  bool requires_grad = false;
  std::shared_ptr<TensorNode<S>> node;
};

// Dense row-major tensor handle with reverse-mode autodiff. Element type is
// selectable: float for training, double for finite-difference checks.
template <typename S>
class Tensor {
 public:
  using Scalar = S;

  Tensor() = default;

  Tensor(std::vector<S> values, Shape shape, bool requires_grad = false) {
    if (shape_numel(shape) != values.size()) {
      throw std::invalid_argument("Tensor: shape " + shape_str(shape) + " does not match " +
                                  std::to_string(values.size()) + " values");
    }
    for (std::size_t d : shape) {
      if (d == 0) throw std::invalid_argument("Tensor: zero extent in shape " + shape_str(shape));
    }
    impl_ = std::make_shared<TensorImpl<S>>();
    impl_->shape = std::move(shape);
    impl_->values = std::move(values);
    impl_->requires_grad = requires_grad;
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return Tensor(std::vector<S>(shape_numel(shape), S(0)), std::move(shape), requires_grad);
  }

  static Tensor full(Shape shape, S value, bool requires_grad = false) {
    return Tensor(std::vector<S>(shape_numel(shape), value), std::move(shape), requires_grad);
  }

  static Tensor scalar(S value) { return Tensor({value}, Shape{1}); }

  bool defined() const { return impl_ != nullptr; }

  const Shape& shape() const { return checked()->shape; }
  std::size_t size() const { return checked()->values.size(); }
  std::size_t dim(std::size_t i) const { return checked()->shape.at(i); }
  std::size_t rank() const { return checked()->shape.size(); }

  const std::vector<S>& values() const { return checked()->values; }
  std::vector<S>& values() { return checked()->values; }
  const S* data() const { return checked()->values.data(); }
  S* data() { return checked()->values.data(); }

  S item() const {
    if (size() != 1) throw std::invalid_argument("item: tensor " + shape_str(shape()) + " is not scalar");
    return values()[0];
  }

  bool requires_grad() const { return checked()->requires_grad; }
  Tensor& set_requires_grad(bool b) {
    checked()->requires_grad = b;
    return *this;
  }

  bool has_grad() const { return defined() && !impl_->grad.empty(); }

  // Zero-filled until gradients accumulate; a parameter untouched by backward
  // therefore reads as an all-zero gradient.
  std::vector<S>& grad() {
    ensure_grad();
    return impl_->grad;
  }
  const std::vector<S>& grad() const {
    const_cast<Tensor*>(this)->ensure_grad();
    return impl_->grad;
  }

  void zero_grad() {
    if (defined() && !impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), S(0));
  }

  void accumulate_grad(const std::vector<S>& g) {
    ensure_grad();
    if (g.size() != impl_->grad.size()) throw std::invalid_argument("accumulate_grad: size mismatch");
    for (std::size_t i = 0; i < g.size(); ++i) impl_->grad[i] += g[i];
  }

  // Same values, cut from the graph; gradients do not flow past a detach.
  Tensor detach() const {
    Tensor out(checked()->values, impl_->shape, false);
    return out;
  }

  bool has_node() const { return defined() && impl_->node != nullptr; }
  const char* op() const { return has_node() ? impl_->node->op : "leaf"; }

  // Reverse-mode sweep from a scalar loss. Each reachable parameter receives
  // d(loss)/d(parameter), accumulated into grad(). A graph may only be swept
  // once; rebuild the forward pass before calling backward again.
  void backward() {
    if (!defined()) throw std::invalid_argument("backward: undefined tensor");
    if (size() != 1) {
      throw std::invalid_argument("backward: loss must be scalar, got shape " + shape_str(shape()));
    }
    if (!impl_->node) {
      ensure_grad();
      impl_->grad[0] += S(1);
      return;
    }
    std::vector<TensorImpl<S>*> order = topo_order();
    ensure_grad();
    impl_->grad[0] += S(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      TensorImpl<S>* t = *it;
      if (t->grad.empty()) t->grad.assign(t->values.size(), S(0));
      t->node->consumed = true;
      t->node->backprop(t->grad);
    }
  }

  TensorImpl<S>* impl() const { return impl_.get(); }

  void set_node(std::shared_ptr<TensorNode<S>> node) { checked()->node = std::move(node); }

 private:
  TensorImpl<S>* checked() const {
    if (!impl_) throw std::invalid_argument("Tensor: use of undefined tensor");
    return impl_.get();
  }

  void ensure_grad() {
    TensorImpl<S>* t = checked();
    if (t->grad.empty()) t->grad.assign(t->values.size(), S(0));
  }

  // Post-order over graph nodes; reversed it yields consumers before
  // producers, so every node's output gradient is complete when its
  // backprop closure runs.
  std::vector<TensorImpl<S>*> topo_order() const {
    std::vector<TensorImpl<S>*> order;
    std::unordered_set<TensorImpl<S>*> seen;
    struct Frame {
      TensorImpl<S>* t;
      std::size_t next;
    };
    std::vector<Frame> stack;
    seen.insert(impl_.get());
    stack.push_back({impl_.get(), 0});
    while (!stack.empty()) {
      Frame& f = stack.back();
      if (f.t->node->consumed) {
        throw std::runtime_error(std::string("backward: node '") + f.t->node->op +
                                 "' already consumed by an earlier backward; rebuild the graph");
      }
      auto& parents = f.t->node->parents;
      if (f.next < parents.size()) {
        TensorImpl<S>* p = parents[f.next++].impl();
        if (p && p->node && !seen.count(p)) {
          seen.insert(p);
          stack.push_back({p, 0});
        }
      } else {
        order.push_back(f.t);
        stack.pop_back();
      }
    }
    return order;
  }

  std::shared_ptr<TensorImpl<S>> impl_;
};

namespace detail {

template <typename S>
bool needs_grad(const Tensor<S>& t) {
  return t.defined() && (t.requires_grad() || t.has_node());
}

template <typename S>
bool any_needs_grad(const std::vector<Tensor<S>>& ts) {
  for (const auto& t : ts)
    if (needs_grad(t)) return true;
  return false;
}

// Attaches a graph node unless every parent is a plain constant, so labels,
// masks and other constants never grow the tape.
template <typename S>
Tensor<S> make_op(const char* op, std::vector<S> values, Shape shape, std::vector<Tensor<S>> parents,
                  std::function<void(const std::vector<S>&)> backprop) {
  Tensor<S> out(std::move(values), std::move(shape));
  if (any_needs_grad(parents)) {
    auto node = std::make_shared<TensorNode<S>>();
    node->op = op;
    node->parents = std::move(parents);
    node->backprop = std::move(backprop);
    out.set_node(std::move(node));
  }
  return out;
}

template <typename S>
void add_into(Tensor<S>& t, const std::vector<S>& g) {
  if (needs_grad(t)) t.accumulate_grad(g);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise arithmetic. Broadcasting is restricted to the scalar case so
// every gradient rule stays auditable.
// ---------------------------------------------------------------------------

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
  const bool a_scalar = a.size() == 1 && b.size() != 1;
  const bool b_scalar = b.size() == 1 && a.size() != 1;
  if (!a_scalar && !b_scalar && a.shape() != b.shape()) shape_error("add", a.shape(), b.shape());
  const Tensor<S>& big = a_scalar ? b : a;
  std::vector<S> out(big.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (a_scalar ? a.values()[0] : a.values()[i]) + (b_scalar ? b.values()[0] : b.values()[i]);
  }
  return detail::make_op<S>(
      "add", std::move(out), big.shape(), {a, b},
      [a = a, b = b, a_scalar, b_scalar](const std::vector<S>& g) mutable {
        if (detail::needs_grad(a)) {
          if (a_scalar) {
            S s = 0;
            for (S v : g) s += v;
            a.grad()[0] += s;
          } else {
            for (std::size_t i = 0; i < g.size(); ++i) a.grad()[i] += g[i];
          }
        }
        if (detail::needs_grad(b)) {
          if (b_scalar) {
            S s = 0;
            for (S v : g) s += v;
            b.grad()[0] += s;
          } else {
            for (std::size_t i = 0; i < g.size(); ++i) b.grad()[i] += g[i];
          }
        }
      });
}

template <typename S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b) {
  const bool a_scalar = a.size() == 1 && b.size() != 1;
  const bool b_scalar = b.size() == 1 && a.size() != 1;
  if (!a_scalar && !b_scalar && a.shape() != b.shape()) shape_error("sub", a.shape(), b.shape());
  const Tensor<S>& big = a_scalar ? b : a;
  std::vector<S> out(big.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (a_scalar ? a.values()[0] : a.values()[i]) - (b_scalar ? b.values()[0] : b.values()[i]);
  }
  return detail::make_op<S>(
      "sub", std::move(out), big.shape(), {a, b},
      [a = a, b = b, a_scalar, b_scalar](const std::vector<S>& g) mutable {
        if (detail::needs_grad(a)) {
          if (a_scalar) {
            S s = 0;
            for (S v : g) s += v;
            a.grad()[0] += s;
          } else {
            for (std::size_t i = 0; i < g.size(); ++i) a.grad()[i] += g[i];
          }
        }
        if (detail::needs_grad(b)) {
          if (b_scalar) {
            S s = 0;
            for (S v : g) s += v;
            b.grad()[0] -= s;
          } else {
            for (std::size_t i = 0; i < g.size(); ++i) b.grad()[i] -= g[i];
          }
        }
      });
}

template <typename S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
  const bool a_scalar = a.size() == 1 && b.size() != 1;
  const bool b_scalar = b.size() == 1 && a.size() != 1;
  if (!a_scalar && !b_scalar && a.shape() != b.shape()) shape_error("mul", a.shape(), b.shape());
  const Tensor<S>& big = a_scalar ? b : a;
  std::vector<S> out(big.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (a_scalar ? a.values()[0] : a.values()[i]) * (b_scalar ? b.values()[0] : b.values()[i]);
  }
  return detail::make_op<S>(
      "mul", std::move(out), big.shape(), {a, b},
      [a = a, b = b, a_scalar, b_scalar](const std::vector<S>& g) mutable {
        if (detail::needs_grad(a)) {
          if (a_scalar) {
            S s = 0;
            for (std::size_t i = 0; i < g.size(); ++i) s += g[i] * b.values()[i];
            a.grad()[0] += s;
          } else {
            for (std::size_t i = 0; i < g.size(); ++i)
              a.grad()[i] += g[i] * (b_scalar ? b.values()[0] : b.values()[i]);
          }
        }
        if (detail::needs_grad(b)) {
          if (b_scalar) {
            S s = 0;
            for (std::size_t i = 0; i < g.size(); ++i) s += g[i] * a.values()[i];
            b.grad()[0] += s;
          } else {
            for (std::size_t i = 0; i < g.size(); ++i)
              b.grad()[i] += g[i] * (a_scalar ? a.values()[0] : a.values()[i]);
          }
        }
      });
}

template <typename S>
Tensor<S> scale(const Tensor<S>& a, S c) {
  std::vector<S> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * c;
  return detail::make_op<S>("scale", std::move(out), a.shape(), {a},
                            [a = a, c](const std::vector<S>& g) mutable {
                              if (!detail::needs_grad(a)) return;
                              for (std::size_t i = 0; i < g.size(); ++i) a.grad()[i] += c * g[i];
                            });
}

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

template <typename S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) shape_error("matmul", a.shape(), b.shape());
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<S> out(m * n, S(0));
  const S* av = a.data();
  const S* bv = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const S aip = av[i * k + p];
      const S* brow = bv + p * n;
      S* orow = out.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
  return detail::make_op<S>(
      "matmul", std::move(out), Shape{m, n}, {a, b}, [a = a, b = b, m, k, n](const std::vector<S>& g) mutable {
        if (detail::needs_grad(a)) {
          auto& ga = a.grad();
          const S* bv = b.data();
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
              S s = 0;
              const S* grow = g.data() + i * n;
              const S* brow = bv + p * n;
              for (std::size_t j = 0; j < n; ++j) s += grow[j] * brow[j];
              ga[i * k + p] += s;
            }
          }
        }
        if (detail::needs_grad(b)) {
          auto& gb = b.grad();
          const S* av = a.data();
          for (std::size_t p = 0; p < k; ++p) {
            for (std::size_t i = 0; i < m; ++i) {
              const S aip = av[i * k + p];
              const S* grow = g.data() + i * n;
              S* gbrow = gb.data() + p * n;
              for (std::size_t j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
            }
          }
        }
      });
}

template <typename S>
Tensor<S> matvec(const Tensor<S>& a, const Tensor<S>& x) {
  if (a.rank() != 2 || x.rank() != 1 || a.dim(1) != x.dim(0)) shape_error("matvec", a.shape(), x.shape());
  const std::size_t m = a.dim(0), k = a.dim(1);
  std::vector<S> out(m, S(0));
  const S* av = a.data();
  const S* xv = x.data();
  for (std::size_t i = 0; i < m; ++i) {
    const S* arow = av + i * k;
    S s = 0;
    for (std::size_t p = 0; p < k; ++p) s += arow[p] * xv[p];
    out[i] = s;
  }
  return detail::make_op<S>("matvec", std::move(out), Shape{m}, {a, x},
                            [a = a, x = x, m, k](const std::vector<S>& g) mutable {
                              if (detail::needs_grad(a)) {
                                auto& ga = a.grad();
                                const S* xv = x.data();
                                for (std::size_t i = 0; i < m; ++i) {
                                  const S gi = g[i];
                                  if (gi == S(0)) continue;
                                  S* garow = ga.data() + i * k;
                                  for (std::size_t p = 0; p < k; ++p) garow[p] += gi * xv[p];
                                }
                              }
                              if (detail::needs_grad(x)) {
                                auto& gx = x.grad();
                                const S* av = a.data();
                                for (std::size_t i = 0; i < m; ++i) {
                                  const S gi = g[i];
                                  if (gi == S(0)) continue;
                                  const S* arow = av + i * k;
                                  for (std::size_t p = 0; p < k; ++p) gx[p] += gi * arow[p];
                                }
                              }
                            });
}

template <typename S>
Tensor<S> transpose(const Tensor<S>& a) {
  if (a.rank() != 2) throw std::invalid_argument("transpose: expected rank-2, got " + shape_str(a.shape()));
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<S> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a.values()[i * n + j];
  return detail::make_op<S>("transpose", std::move(out), Shape{n, m}, {a},
                            [a = a, m, n](const std::vector<S>& g) mutable {
                              if (!detail::needs_grad(a)) return;
                              auto& ga = a.grad();
                              for (std::size_t i = 0; i < m; ++i)
                                for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
                            });
}

template <typename S>
Tensor<S> reshape(const Tensor<S>& a, Shape shape) {
  if (shape_numel(shape) != a.size()) shape_error("reshape", a.shape(), shape);
  return detail::make_op<S>("reshape", a.values(), std::move(shape), {a},
                            [a = a](const std::vector<S>& g) mutable {
                              if (!detail::needs_grad(a)) return;
                              auto& ga = a.grad();
                              for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                            });
}

// ---------------------------------------------------------------------------
// Concatenation / slicing / stacking
// ---------------------------------------------------------------------------

template <typename S>
Tensor<S> concat(const std::vector<Tensor<S>>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rank() != 1) throw std::invalid_argument("concat: expected rank-1 parts, got " + shape_str(p.shape()));
    total += p.size();
  }
  std::vector<S> out;
  out.reserve(total);
  for (const auto& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
  return detail::make_op<S>("concat", std::move(out), Shape{total}, parts,
                            [parts = parts](const std::vector<S>& g) mutable {
                              std::size_t off = 0;
                              for (auto& p : parts) {
                                if (detail::needs_grad(p)) {
                                  auto& gp = p.grad();
                                  for (std::size_t i = 0; i < p.size(); ++i) gp[i] += g[off + i];
                                }
                                off += p.size();
                              }
                            });
}

template <typename S>
Tensor<S> slice(const Tensor<S>& a, std::size_t lo, std::size_t hi) {
  if (a.rank() != 1 || lo >= hi || hi > a.size()) {
    throw std::invalid_argument("slice: range [" + std::to_string(lo) + "," + std::to_string(hi) +
                                ") invalid for shape " + shape_str(a.shape()));
  }
  std::vector<S> out(a.values().begin() + lo, a.values().begin() + hi);
  return detail::make_op<S>("slice", std::move(out), Shape{hi - lo}, {a},
                            [a = a, lo](const std::vector<S>& g) mutable {
                              if (!detail::needs_grad(a)) return;
                              auto& ga = a.grad();
                              for (std::size_t i = 0; i < g.size(); ++i) ga[lo + i] += g[i];
                            });
}

template <typename S>
Tensor<S> row(const Tensor<S>& a, std::size_t i) {
  if (a.rank() != 2 || i >= a.dim(0)) {
    throw std::invalid_argument("row: index " + std::to_string(i) + " invalid for shape " + shape_str(a.shape()));
  }
  const std::size_t n = a.dim(1);
  std::vector<S> out(a.values().begin() + i * n, a.values().begin() + (i + 1) * n);
  return detail::make_op<S>("row", std::move(out), Shape{n}, {a},
                            [a = a, i, n](const std::vector<S>& g) mutable {
                              if (!detail::needs_grad(a)) return;
                              auto& ga = a.grad();
                              for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j];
                            });
}

template <typename S>
Tensor<S> slice_rows(const Tensor<S>& a, std::size_t r0, std::size_t r1) {
  if (a.rank() != 2 || r0 >= r1 || r1 > a.dim(0)) {
    throw std::invalid_argument("slice_rows: range [" + std::to_string(r0) + "," + std::to_string(r1) +
                                ") invalid for shape " + shape_str(a.shape()));
  }
  const std::size_t n = a.dim(1);
  std::vector<S> out(a.values().begin() + r0 * n, a.values().begin() + r1 * n);
  return detail::make_op<S>("slice_rows", std::move(out), Shape{r1 - r0, n}, {a},
                            [a = a, r0, n](const std::vector<S>& g) mutable {
                              if (!detail::needs_grad(a)) return;
                              auto& ga = a.grad();
                              for (std::size_t i = 0; i < g.size(); ++i) ga[r0 * n + i] += g[i];
                            });
}

template <typename S>
Tensor<S> stack_rows(const std::vector<Tensor<S>>& rows) {
  if (rows.empty()) throw std::invalid_argument("stack_rows: no inputs");
  const std::size_t d = rows.front().size();
  for (const auto& r : rows) {
    if (r.rank() != 1 || r.size() != d) shape_error("stack_rows", rows.front().shape(), r.shape());
  }
  std::vector<S> out;
  out.reserve(rows.size() * d);
  for (const auto& r : rows) out.insert(out.end(), r.values().begin(), r.values().end());
  return detail::make_op<S>("stack_rows", std::move(out), Shape{rows.size(), d}, rows,
                            [rows = rows, d](const std::vector<S>& g) mutable {
                              for (std::size_t i = 0; i < rows.size(); ++i) {
                                if (!detail::needs_grad(rows[i])) continue;
                                auto& gr = rows[i].grad();
                                for (std::size_t j = 0; j < d; ++j) gr[j] += g[i * d + j];
                              }
                            });
}

template <typename S>
Tensor<S> concat_rows(const std::vector<Tensor<S>>& blocks) {
  if (blocks.empty()) throw std::invalid_argument("concat_rows: no inputs");
  const std::size_t d = blocks.front().dim(1);
  std::size_t total = 0;
  for (const auto& b : blocks) {
    if (b.rank() != 2 || b.dim(1) != d) shape_error("concat_rows", blocks.front().shape(), b.shape());
    total += b.dim(0);
  }
  std::vector<S> out;
  out.reserve(total * d);
  for (const auto& b : blocks) out.insert(out.end(), b.values().begin(), b.values().end());
  return detail::make_op<S>("concat_rows", std::move(out), Shape{total, d}, blocks,
                            [blocks = blocks](const std::vector<S>& g) mutable {
                              std::size_t off = 0;
                              for (auto& b : blocks) {
                                if (detail::needs_grad(b)) {
                                  auto& gb = b.grad();
                                  for (std::size_t i = 0; i < b.size(); ++i) gb[i] += g[off + i];
                                }
                                off += b.size();
                              }
                            });
}

// Row lookup by integer ids; gradient accumulates only on the selected rows.
template <typename S>
Tensor<S> gather_rows(const Tensor<S>& table, const std::vector<std::size_t>& ids) {
  if (table.rank() != 2) throw std::invalid_argument("gather_rows: table must be rank-2");
  if (ids.empty()) throw std::invalid_argument("gather_rows: empty id list");
  const std::size_t v = table.dim(0), d = table.dim(1);
  for (std::size_t id : ids) {
    if (id >= v) {
      throw std::invalid_argument("gather_rows: id " + std::to_string(id) + " out of range for table with " +
                                  std::to_string(v) + " rows");
    }
  }
  std::vector<S> out(ids.size() * d);
  for (std::size_t t = 0; t < ids.size(); ++t) {
    const S* src = table.data() + ids[t] * d;
    std::copy(src, src + d, out.begin() + t * d);
  }
  return detail::make_op<S>("gather_rows", std::move(out), Shape{ids.size(), d}, {table},
                            [table = table, ids, d](const std::vector<S>& g) mutable {
                              if (!detail::needs_grad(table)) return;
                              auto& gt = table.grad();
                              for (std::size_t t = 0; t < ids.size(); ++t) {
                                S* dst = gt.data() + ids[t] * d;
                                const S* src = g.data() + t * d;
                                for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
                              }
                            });
}

// ---------------------------------------------------------------------------
// Nonlinearities and reductions
// ---------------------------------------------------------------------------

template <typename S>
Tensor<S> sigmoid(const Tensor<S>& a) {
  std::vector<S> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const S x = a.values()[i];
    out[i] = x >= S(0) ? S(1) / (S(1) + std::exp(-x)) : std::exp(x) / (S(1) + std::exp(x));
  }
  Shape shape = a.shape();
  Tensor<S> result = detail::make_op<S>("sigmoid", out, std::move(shape), {a},
                                        [a = a, out](const std::vector<S>& g) mutable {
                                          if (!detail::needs_grad(a)) return;
                                          auto& ga = a.grad();
                                          for (std::size_t i = 0; i < g.size(); ++i)
                                            ga[i] += g[i] * out[i] * (S(1) - out[i]);
                                        });
  return result;
}

template <typename S>
Tensor<S> tanh(const Tensor<S>& a) {
  std::vector<S> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(a.values()[i]);
  Shape shape = a.shape();
  return detail::make_op<S>("tanh", out, std::move(shape), {a},
                            [a = a, out](const std::vector<S>& g) mutable {
                              if (!detail::needs_grad(a)) return;
                              auto& ga = a.grad();
                              for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (S(1) - out[i] * out[i]);
                            });
}

// Row-wise softmax: rank-1 tensors are one row, rank-2 rows are independent.
template <typename S>
Tensor<S> softmax_rows(const Tensor<S>& a) {
  if (a.rank() != 1 && a.rank() != 2) {
    throw std::invalid_argument("softmax_rows: expected rank-1 or rank-2, got " + shape_str(a.shape()));
  }
  const std::size_t rows = a.rank() == 2 ? a.dim(0) : 1;
  const std::size_t cols = a.rank() == 2 ? a.dim(1) : a.dim(0);
  std::vector<S> out(a.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const S* in = a.data() + r * cols;
    S* o = out.data() + r * cols;
    S mx = in[0];
    for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, in[j]);
    S denom = 0;
    for (std::size_t j = 0; j < cols; ++j) {
      o[j] = std::exp(in[j] - mx);
      denom += o[j];
    }
    for (std::size_t j = 0; j < cols; ++j) o[j] /= denom;
  }
  Shape shape = a.shape();
  return detail::make_op<S>("softmax", out, std::move(shape), {a},
                            [a = a, out, rows, cols](const std::vector<S>& g) mutable {
                              if (!detail::needs_grad(a)) return;
                              auto& ga = a.grad();
                              for (std::size_t r = 0; r < rows; ++r) {
                                const S* y = out.data() + r * cols;
                                const S* gr = g.data() + r * cols;
                                S dot = 0;
                                for (std::size_t j = 0; j < cols; ++j) dot += gr[j] * y[j];
                                for (std::size_t j = 0; j < cols; ++j) ga[r * cols + j] += y[j] * (gr[j] - dot);
                              }
                            });
}

template <typename S>
Tensor<S> sum(const Tensor<S>& a) {
  S s = 0;
  for (S v : a.values()) s += v;
  return detail::make_op<S>("sum", {s}, Shape{1}, {a}, [a = a](const std::vector<S>& g) mutable {
    if (!detail::needs_grad(a)) return;
    auto& ga = a.grad();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0];
  });
}

template <typename S>
Tensor<S> mean(const Tensor<S>& a) {
  S s = 0;
  for (S v : a.values()) s += v;
  const S inv = S(1) / static_cast<S>(a.size());
  return detail::make_op<S>("mean", {s * inv}, Shape{1}, {a}, [a = a, inv](const std::vector<S>& g) mutable {
    if (!detail::needs_grad(a)) return;
    auto& ga = a.grad();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0] * inv;
  });
}

// Column means of a [n,d] matrix.
template <typename S>
Tensor<S> mean_rows(const Tensor<S>& a) {
  if (a.rank() != 2) throw std::invalid_argument("mean_rows: expected rank-2, got " + shape_str(a.shape()));
  const std::size_t n = a.dim(0), d = a.dim(1);
  const S inv = S(1) / static_cast<S>(n);
  std::vector<S> out(d, S(0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out[j] += a.values()[i * d + j];
  for (std::size_t j = 0; j < d; ++j) out[j] *= inv;
  return detail::make_op<S>("mean_rows", std::move(out), Shape{d}, {a},
                            [a = a, n, d, inv](const std::vector<S>& g) mutable {
                              if (!detail::needs_grad(a)) return;
                              auto& ga = a.grad();
                              for (std::size_t i = 0; i < n; ++i)
                                for (std::size_t j = 0; j < d; ++j) ga[i * d + j] += g[j] * inv;
                            });
}

template <typename S>
Tensor<S> frobenius_norm_sq(const Tensor<S>& a) {
  S s = 0;
  for (S v : a.values()) s += v * v;
  return detail::make_op<S>("frobenius_norm_sq", {s}, Shape{1}, {a},
                            [a = a](const std::vector<S>& g) mutable {
                              if (!detail::needs_grad(a)) return;
                              auto& ga = a.grad();
                              for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += S(2) * g[0] * a.values()[i];
                            });
}

// Adds a row vector to every row of a matrix.
template <typename S>
Tensor<S> add_rowvec(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.rank() != 2 || b.rank() != 1 || a.dim(1) != b.dim(0)) shape_error("add_rowvec", a.shape(), b.shape());
  const std::size_t n = a.dim(0), d = a.dim(1);
  std::vector<S> out(a.values());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] += b.values()[j];
  return detail::make_op<S>("add_rowvec", std::move(out), a.shape(), {a, b},
                            [a = a, b = b, n, d](const std::vector<S>& g) mutable {
                              if (detail::needs_grad(a)) {
                                auto& ga = a.grad();
                                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                              }
                              if (detail::needs_grad(b)) {
                                auto& gb = b.grad();
                                for (std::size_t i = 0; i < n; ++i)
                                  for (std::size_t j = 0; j < d; ++j) gb[j] += g[i * d + j];
                              }
                            });
}

// ---------------------------------------------------------------------------
// Gradient reversal: identity forward, incoming gradient is multiplied by
// -scale on the way down. This is what turns discriminator minimization into
// encoder maximization in a single backward pass.
// ---------------------------------------------------------------------------

template <typename S>
Tensor<S> grad_reverse(const Tensor<S>& a, S scale) {
  if (!(scale >= S(0))) throw std::invalid_argument("grad_reverse: scale must be nonnegative");
  return detail::make_op<S>("grad_reverse", a.values(), a.shape(), {a},
                            [a = a, scale](const std::vector<S>& g) mutable {
                              if (!detail::needs_grad(a)) return;
                              auto& ga = a.grad();
                              for (std::size_t i = 0; i < g.size(); ++i) ga[i] -= scale * g[i];
                            });
}

}  // namespace amtl

#endif  // AMTL_TENSOR_HPP
