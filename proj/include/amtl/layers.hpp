#ifndef AMTL_LAYERS_HPP
#define AMTL_LAYERS_HPP

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "amtl/rng.hpp"
#include "amtl/tensor.hpp"

namespace amtl {

template <typename S>
using ParamList = std::vector<std::pair<std::string, Tensor<S>>>;

// ---------------------------------------------------------------------------
// Parameter initialization
// ---------------------------------------------------------------------------

namespace init {

template <typename S>
void uniform(Tensor<S>& t, double bound, Rng& rng) {
  for (auto& v : t.values()) v = static_cast<S>(rng.uniform(-bound, bound));
}

// Orthonormalizes each stacked [n,n] block of a [k*n, n] matrix via
// Gram-Schmidt on Gaussian draws.
template <typename S>
void orthogonal_blocks(Tensor<S>& t, std::size_t n, Rng& rng) {
  const std::size_t rows = t.dim(0);
  if (t.dim(1) != n || rows % n != 0) {
    throw std::invalid_argument("orthogonal_blocks: shape " + shape_str(t.shape()) +
                                " is not a stack of square blocks");
  }
  std::vector<double> block(n * n);
  for (std::size_t b = 0; b < rows / n; ++b) {
    for (auto& v : block) v = rng.normal();
    for (std::size_t i = 0; i < n; ++i) {
      double* ri = block.data() + i * n;
      for (std::size_t j = 0; j < i; ++j) {
        const double* rj = block.data() + j * n;
        double dot = 0;
        for (std::size_t k = 0; k < n; ++k) dot += ri[k] * rj[k];
        for (std::size_t k = 0; k < n; ++k) ri[k] -= dot * rj[k];
      }
      double norm = 0;
      for (std::size_t k = 0; k < n; ++k) norm += ri[k] * ri[k];
      norm = std::sqrt(norm);
      if (norm < 1e-12) {
        // Degenerate draw; fall back to a unit basis row.
        for (std::size_t k = 0; k < n; ++k) ri[k] = (k == i % n) ? 1.0 : 0.0;
      } else {
        for (std::size_t k = 0; k < n; ++k) ri[k] /= norm;
      }
    }
    for (std::size_t i = 0; i < n * n; ++i) t.values()[b * n * n + i] = static_cast<S>(block[i]);
  }
}

}  // namespace init

// ---------------------------------------------------------------------------
// Embedding
// ---------------------------------------------------------------------------

// Trainable lookup table; row 0 is the padding row.
template <typename S>
struct EmbeddingTable {
  std::size_t vocab_size = 0;
  std::size_t dim = 0;
  std::size_t max_sequence_length = 64;
  Tensor<S> weights;  // [vocab, dim]

  static EmbeddingTable create(std::size_t vocab_size, std::size_t dim, std::size_t max_len, Rng rng) {
    EmbeddingTable t;
    t.vocab_size = vocab_size;
    t.dim = dim;
    t.max_sequence_length = max_len;
    t.weights = Tensor<S>::zeros({vocab_size, dim}, true);
    init::uniform(t.weights, 0.1, rng);
    // padding row stays zero at init
    for (std::size_t j = 0; j < dim; ++j) t.weights.values()[j] = S(0);
    return t;
  }

  void collect(const std::string& prefix, ParamList<S>& out) const { out.emplace_back(prefix + ".weights", weights); }
};

template <typename S>
Tensor<S> embed(const std::vector<std::size_t>& tokens, const EmbeddingTable<S>& table) {
  if (tokens.empty()) throw std::invalid_argument("embed: empty token sequence");
  if (tokens.size() > table.max_sequence_length) {
    throw std::invalid_argument("embed: sequence length " + std::to_string(tokens.size()) +
                                " exceeds maximum " + std::to_string(table.max_sequence_length));
  }
  for (std::size_t id : tokens) {
    if (id >= table.vocab_size) {
      throw std::invalid_argument("embed: token id " + std::to_string(id) + " out of range for vocabulary of " +
                                  std::to_string(table.vocab_size));
    }
  }
  return gather_rows(table.weights, tokens);
}

// ---------------------------------------------------------------------------
// Bidirectional LSTM
// ---------------------------------------------------------------------------

template <typename S>
struct LstmCell {
  std::size_t in_dim = 0;
  std::size_t hidden = 0;
  Tensor<S> w_x;   // [4h, in], gate order i,f,g,o
  Tensor<S> w_h;   // [4h, h]
  Tensor<S> bias;  // [4h], forget gate initialized to 1

  static LstmCell create(std::size_t in_dim, std::size_t hidden, Rng rng) {
    LstmCell c;
    c.in_dim = in_dim;
    c.hidden = hidden;
    c.w_x = Tensor<S>::zeros({4 * hidden, in_dim}, true);
    c.w_h = Tensor<S>::zeros({4 * hidden, hidden}, true);
    c.bias = Tensor<S>::zeros({4 * hidden}, true);
    init::uniform(c.w_x, 1.0 / std::sqrt(static_cast<double>(hidden)), rng);
    init::orthogonal_blocks(c.w_h, hidden, rng);
    for (std::size_t i = hidden; i < 2 * hidden; ++i) c.bias.values()[i] = S(1);
    return c;
  }

  void collect(const std::string& prefix, ParamList<S>& out) const {
    out.emplace_back(prefix + ".w_x", w_x);
    out.emplace_back(prefix + ".w_h", w_h);
    out.emplace_back(prefix + ".bias", bias);
  }
};

template <typename S>
struct BiLstmLayer {
  std::size_t in_dim = 0;
  std::size_t hidden = 0;
  LstmCell<S> fwd;
  LstmCell<S> bwd;

  static BiLstmLayer create(std::size_t in_dim, std::size_t hidden, Rng rng_fwd, Rng rng_bwd) {
    BiLstmLayer l;
    l.in_dim = in_dim;
    l.hidden = hidden;
    l.fwd = LstmCell<S>::create(in_dim, hidden, rng_fwd);
    l.bwd = LstmCell<S>::create(in_dim, hidden, rng_bwd);
    return l;
  }

  void collect(const std::string& prefix, ParamList<S>& out) const {
    fwd.collect(prefix + ".fwd", out);
    bwd.collect(prefix + ".bwd", out);
  }
};

namespace detail {

template <typename S>
std::vector<Tensor<S>> lstm_scan(const LstmCell<S>& cell, const std::vector<Tensor<S>>& inputs) {
  const std::size_t h = cell.hidden;
  Tensor<S> hidden = Tensor<S>::zeros({h});
  Tensor<S> cell_state = Tensor<S>::zeros({h});
  std::vector<Tensor<S>> states;
  states.reserve(inputs.size());
  for (const auto& x : inputs) {
    Tensor<S> z = add(add(matvec(cell.w_x, x), matvec(cell.w_h, hidden)), cell.bias);
    Tensor<S> gate_i = sigmoid(slice(z, 0, h));
    Tensor<S> gate_f = sigmoid(slice(z, h, 2 * h));
    Tensor<S> gate_g = tanh(slice(z, 2 * h, 3 * h));
    Tensor<S> gate_o = sigmoid(slice(z, 3 * h, 4 * h));
    cell_state = add(mul(gate_f, cell_state), mul(gate_i, gate_g));
    hidden = mul(gate_o, tanh(cell_state));
    states.push_back(hidden);
  }
  return states;
}

}  // namespace detail

// [T, in] -> [T, 2h]; the first h features at step t summarize x[0..t], the
// last h summarize x[t..T-1].
template <typename S>
Tensor<S> bilstm_forward(const Tensor<S>& x, const BiLstmLayer<S>& layer) {
  if (x.rank() != 2 || x.dim(1) != layer.in_dim) {
    shape_error("bilstm_forward", x.shape(), Shape{0, layer.in_dim});
  }
  const std::size_t steps = x.dim(0);
  std::vector<Tensor<S>> rows;
  rows.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) rows.push_back(row(x, t));

  std::vector<Tensor<S>> forward_states = detail::lstm_scan(layer.fwd, rows);
  std::vector<Tensor<S>> reversed(rows.rbegin(), rows.rend());
  std::vector<Tensor<S>> backward_states = detail::lstm_scan(layer.bwd, reversed);

  std::vector<Tensor<S>> out_rows;
  out_rows.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    out_rows.push_back(concat<S>({forward_states[t], backward_states[steps - 1 - t]}));
  }
  return stack_rows(out_rows);
}

// ---------------------------------------------------------------------------
// Capsule primitives
// ---------------------------------------------------------------------------

// squash(s) = (|s|^2 / (1+|s|^2)) * s/|s| = s * |s|/(1+|s|^2), applied per
// row. Norm-preserving in direction, output norm < 1, squash(0) = 0.
template <typename S>
Tensor<S> squash_rows(const Tensor<S>& a) {
  if (a.rank() != 1 && a.rank() != 2) {
    throw std::invalid_argument("squash_rows: expected rank-1 or rank-2, got " + shape_str(a.shape()));
  }
  const std::size_t rows = a.rank() == 2 ? a.dim(0) : 1;
  const std::size_t d = a.rank() == 2 ? a.dim(1) : a.dim(0);
  std::vector<S> out(a.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const S* s = a.data() + r * d;
    S* o = out.data() + r * d;
    S nsq = 0;
    for (std::size_t k = 0; k < d; ++k) nsq += s[k] * s[k];
    const S n = std::sqrt(nsq);
    const S q = n / (S(1) + nsq);
    for (std::size_t k = 0; k < d; ++k) o[k] = s[k] * q;
  }
  Shape shape = a.shape();
  return detail::make_op<S>(
      "squash", out, std::move(shape), {a}, [a = a, rows, d](const std::vector<S>& g) mutable {
        if (!detail::needs_grad(a)) return;
        auto& ga = a.grad();
        for (std::size_t r = 0; r < rows; ++r) {
          const S* s = a.data() + r * d;
          const S* gr = g.data() + r * d;
          S nsq = 0;
          for (std::size_t k = 0; k < d; ++k) nsq += s[k] * s[k];
          const S n = std::sqrt(nsq);
          const S denom = S(1) + nsq;
          const S q = n / denom;
          S dot = 0;
          for (std::size_t k = 0; k < d; ++k) dot += gr[k] * s[k];
          // dv/ds = q I + (q'/n) s s^T with q' = (1-n^2)/(1+n^2)^2; the
          // second term vanishes in the n->0 limit.
          const S coef = n > S(1e-30) ? (S(1) - nsq) / (denom * denom * n) : S(0);
          for (std::size_t k = 0; k < d; ++k) ga[r * d + k] += q * gr[k] + coef * dot * s[k];
        }
      });
}

// Child-to-parent predictions u_hat[i,j] = W_j * u_i with one transform per
// parent, shared across children. u: [N,Din], w: [M,Dout,Din] -> [N,M,Dout].
template <typename S>
Tensor<S> capsule_predict_shared(const Tensor<S>& u, const Tensor<S>& w) {
  if (u.rank() != 2 || w.rank() != 3 || w.dim(2) != u.dim(1)) shape_error("capsule_predict_shared", u.shape(), w.shape());
  const std::size_t n = u.dim(0), din = u.dim(1), m = w.dim(0), dout = w.dim(1);
  std::vector<S> out(n * m * dout, S(0));
  for (std::size_t i = 0; i < n; ++i) {
    const S* ui = u.data() + i * din;
    for (std::size_t j = 0; j < m; ++j) {
      const S* wj = w.data() + j * dout * din;
      S* o = out.data() + (i * m + j) * dout;
      for (std::size_t a = 0; a < dout; ++a) {
        S s = 0;
        for (std::size_t b = 0; b < din; ++b) s += wj[a * din + b] * ui[b];
        o[a] = s;
      }
    }
  }
  return detail::make_op<S>("capsule_predict_shared", std::move(out), Shape{n, m, dout}, {u, w},
                            [u = u, w = w, n, din, m, dout](const std::vector<S>& g) mutable {
                              if (detail::needs_grad(w)) {
                                auto& gw = w.grad();
                                for (std::size_t i = 0; i < n; ++i) {
                                  const S* ui = u.data() + i * din;
                                  for (std::size_t j = 0; j < m; ++j) {
                                    const S* go = g.data() + (i * m + j) * dout;
                                    S* gwj = gw.data() + j * dout * din;
                                    for (std::size_t a = 0; a < dout; ++a)
                                      for (std::size_t b = 0; b < din; ++b) gwj[a * din + b] += go[a] * ui[b];
                                  }
                                }
                              }
                              if (detail::needs_grad(u)) {
                                auto& gu = u.grad();
                                for (std::size_t i = 0; i < n; ++i) {
                                  S* gui = gu.data() + i * din;
                                  for (std::size_t j = 0; j < m; ++j) {
                                    const S* go = g.data() + (i * m + j) * dout;
                                    const S* wj = w.data() + j * dout * din;
                                    for (std::size_t a = 0; a < dout; ++a)
                                      for (std::size_t b = 0; b < din; ++b) gui[b] += go[a] * wj[a * din + b];
                                  }
                                }
                              }
                            });
}

// Per-pair transforms u_hat[i,j] = W_ij * u_i. w: [Nmax,M,Dout,Din] with the
// runtime child count N <= Nmax; only the first N blocks participate.
template <typename S>
Tensor<S> capsule_predict_pairwise(const Tensor<S>& u, const Tensor<S>& w) {
  if (u.rank() != 2 || w.rank() != 4 || w.dim(3) != u.dim(1)) shape_error("capsule_predict_pairwise", u.shape(), w.shape());
  const std::size_t n = u.dim(0), din = u.dim(1), m = w.dim(1), dout = w.dim(2);
  if (n > w.dim(0)) {
    throw std::invalid_argument("capsule_predict_pairwise: " + std::to_string(n) +
                                " children exceed transform capacity " + std::to_string(w.dim(0)));
  }
  std::vector<S> out(n * m * dout, S(0));
  for (std::size_t i = 0; i < n; ++i) {
    const S* ui = u.data() + i * din;
    for (std::size_t j = 0; j < m; ++j) {
      const S* wij = w.data() + ((i * m + j) * dout) * din;
      S* o = out.data() + (i * m + j) * dout;
      for (std::size_t a = 0; a < dout; ++a) {
        S s = 0;
        for (std::size_t b = 0; b < din; ++b) s += wij[a * din + b] * ui[b];
        o[a] = s;
      }
    }
  }
  return detail::make_op<S>("capsule_predict_pairwise", std::move(out), Shape{n, m, dout}, {u, w},
                            [u = u, w = w, n, din, m, dout](const std::vector<S>& g) mutable {
                              if (detail::needs_grad(w)) {
                                auto& gw = w.grad();
                                for (std::size_t i = 0; i < n; ++i) {
                                  const S* ui = u.data() + i * din;
                                  for (std::size_t j = 0; j < m; ++j) {
                                    const S* go = g.data() + (i * m + j) * dout;
                                    S* gwij = gw.data() + ((i * m + j) * dout) * din;
                                    for (std::size_t a = 0; a < dout; ++a)
                                      for (std::size_t b = 0; b < din; ++b) gwij[a * din + b] += go[a] * ui[b];
                                  }
                                }
                              }
                              if (detail::needs_grad(u)) {
                                auto& gu = u.grad();
                                for (std::size_t i = 0; i < n; ++i) {
                                  S* gui = gu.data() + i * din;
                                  for (std::size_t j = 0; j < m; ++j) {
                                    const S* go = g.data() + (i * m + j) * dout;
                                    const S* wij = w.data() + ((i * m + j) * dout) * din;
                                    for (std::size_t a = 0; a < dout; ++a)
                                      for (std::size_t b = 0; b < din; ++b) gui[b] += go[a] * wij[a * din + b];
                                  }
                                }
                              }
                            });
}

// s[j] = sum_i c[i,j] * u_hat[i,j]; c: [N,M], u_hat: [N,M,D] -> [M,D].
template <typename S>
Tensor<S> weighted_parent_sum(const Tensor<S>& c, const Tensor<S>& uhat) {
  if (c.rank() != 2 || uhat.rank() != 3 || c.dim(0) != uhat.dim(0) || c.dim(1) != uhat.dim(1)) {
    shape_error("weighted_parent_sum", c.shape(), uhat.shape());
  }
  const std::size_t n = c.dim(0), m = c.dim(1), d = uhat.dim(2);
  std::vector<S> out(m * d, S(0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const S cij = c.values()[i * m + j];
      const S* uh = uhat.data() + (i * m + j) * d;
      S* o = out.data() + j * d;
      for (std::size_t k = 0; k < d; ++k) o[k] += cij * uh[k];
    }
  }
  return detail::make_op<S>("weighted_parent_sum", std::move(out), Shape{m, d}, {c, uhat},
                            [c = c, uhat = uhat, n, m, d](const std::vector<S>& g) mutable {
                              if (detail::needs_grad(c)) {
                                auto& gc = c.grad();
                                for (std::size_t i = 0; i < n; ++i)
                                  for (std::size_t j = 0; j < m; ++j) {
                                    const S* uh = uhat.data() + (i * m + j) * d;
                                    const S* gj = g.data() + j * d;
                                    S s = 0;
                                    for (std::size_t k = 0; k < d; ++k) s += gj[k] * uh[k];
                                    gc[i * m + j] += s;
                                  }
                              }
                              if (detail::needs_grad(uhat)) {
                                auto& gu = uhat.grad();
                                for (std::size_t i = 0; i < n; ++i)
                                  for (std::size_t j = 0; j < m; ++j) {
                                    const S cij = c.values()[i * m + j];
                                    const S* gj = g.data() + j * d;
                                    S* gij = gu.data() + (i * m + j) * d;
                                    for (std::size_t k = 0; k < d; ++k) gij[k] += cij * gj[k];
                                  }
                              }
                            });
}

// a[i,j] = <u_hat[i,j], v[j]>; u_hat: [N,M,D], v: [M,D] -> [N,M].
template <typename S>
Tensor<S> agreement(const Tensor<S>& uhat, const Tensor<S>& v) {
  if (uhat.rank() != 3 || v.rank() != 2 || uhat.dim(1) != v.dim(0) || uhat.dim(2) != v.dim(1)) {
    shape_error("agreement", uhat.shape(), v.shape());
  }
  const std::size_t n = uhat.dim(0), m = uhat.dim(1), d = uhat.dim(2);
  std::vector<S> out(n * m, S(0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const S* uh = uhat.data() + (i * m + j) * d;
      const S* vj = v.data() + j * d;
      S s = 0;
      for (std::size_t k = 0; k < d; ++k) s += uh[k] * vj[k];
      out[i * m + j] = s;
    }
  return detail::make_op<S>("agreement", std::move(out), Shape{n, m}, {uhat, v},
                            [uhat = uhat, v = v, n, m, d](const std::vector<S>& g) mutable {
                              if (detail::needs_grad(uhat)) {
                                auto& gu = uhat.grad();
                                for (std::size_t i = 0; i < n; ++i)
                                  for (std::size_t j = 0; j < m; ++j) {
                                    const S gij = g[i * m + j];
                                    const S* vj = v.data() + j * d;
                                    S* gij_out = gu.data() + (i * m + j) * d;
                                    for (std::size_t k = 0; k < d; ++k) gij_out[k] += gij * vj[k];
                                  }
                              }
                              if (detail::needs_grad(v)) {
                                auto& gv = v.grad();
                                for (std::size_t i = 0; i < n; ++i)
                                  for (std::size_t j = 0; j < m; ++j) {
                                    const S gij = g[i * m + j];
                                    const S* uh = uhat.data() + (i * m + j) * d;
                                    for (std::size_t k = 0; k < d; ++k) gv[j * d + k] += gij * uh[k];
                                  }
                              }
                            });
}

// ---------------------------------------------------------------------------
// Routing by agreement
// ---------------------------------------------------------------------------

template <typename S>
struct RoutingTrace {
  std::vector<Tensor<S>> coupling;  // c at each iteration, rows sum to 1
};

// Iterative agreement routing over precomputed predictions u_hat [N,M,D]:
// logits start at zero, c = softmax over parents, parents are squashed
// weighted sums, logits accumulate <u_hat, v>. Returns the final parents.
template <typename S>
Tensor<S> route_by_agreement(const Tensor<S>& uhat, std::size_t iterations, RoutingTrace<S>* trace = nullptr) {
  if (uhat.rank() != 3) throw std::invalid_argument("route_by_agreement: expected [N,M,D] predictions");
  if (iterations == 0) throw std::invalid_argument("route_by_agreement: iterations must be >= 1");
  const std::size_t n = uhat.dim(0), m = uhat.dim(1);
  Tensor<S> logits = Tensor<S>::zeros({n, m});
  Tensor<S> parents;
  for (std::size_t it = 0; it < iterations; ++it) {
    Tensor<S> coupling = softmax_rows(logits);
    if (trace) trace->coupling.push_back(coupling);
    parents = squash_rows(weighted_parent_sum(coupling, uhat));
    if (it + 1 < iterations) logits = add(logits, agreement(uhat, parents));
  }
  return parents;
}

// ---------------------------------------------------------------------------
// Capsule layers
// ---------------------------------------------------------------------------

struct CapsuleStackConfig {
  std::size_t primary_filters = 8;
  std::size_t primary_kernel = 3;
  std::size_t conv_filters = 4;
  std::size_t conv_kernel = 3;
  std::size_t capsule_dim = 4;
  std::size_t routing_iterations = 3;
  std::size_t dense_out = 1;

  // Shortest sequence that still yields one convolutional-capsule window.
  std::size_t min_sequence_length() const { return primary_kernel + conv_kernel - 1; }
};

// 1-D convolution over the sequence producing primary capsules: kernel
// window -> primary_filters capsules of capsule_dim each, squashed.
template <typename S>
struct PrimaryCapsuleLayer {
  CapsuleStackConfig cfg;
  std::size_t in_dim = 0;
  Tensor<S> conv_w;  // [filters*dim, kernel*in_dim]
  Tensor<S> conv_b;  // [filters*dim]

  static PrimaryCapsuleLayer create(const CapsuleStackConfig& cfg, std::size_t in_dim, Rng rng) {
    PrimaryCapsuleLayer l;
    l.cfg = cfg;
    l.in_dim = in_dim;
    const std::size_t out_ch = cfg.primary_filters * cfg.capsule_dim;
    const std::size_t fan_in = cfg.primary_kernel * in_dim;
    l.conv_w = Tensor<S>::zeros({out_ch, fan_in}, true);
    l.conv_b = Tensor<S>::zeros({out_ch}, true);
    init::uniform(l.conv_w, 1.0 / std::sqrt(static_cast<double>(fan_in)), rng);
    return l;
  }

  void collect(const std::string& prefix, ParamList<S>& out) const {
    out.emplace_back(prefix + ".conv_w", conv_w);
    out.emplace_back(prefix + ".conv_b", conv_b);
  }
};

// x: [T, in] -> capsules [(T-kernel+1)*filters, dim]. Windows that lie
// entirely in right-padding (start >= valid_len) are zeroed before squash.
template <typename S>
Tensor<S> primary_capsules(const Tensor<S>& x, const PrimaryCapsuleLayer<S>& layer, std::size_t valid_len = 0) {
  const CapsuleStackConfig& cfg = layer.cfg;
  if (x.rank() != 2 || x.dim(1) != layer.in_dim) shape_error("primary_capsules", x.shape(), Shape{0, layer.in_dim});
  const std::size_t steps = x.dim(0);
  if (steps < cfg.primary_kernel) {
    throw std::invalid_argument("primary_capsules: sequence length " + std::to_string(steps) +
                                " is below kernel " + std::to_string(cfg.primary_kernel) +
                                "; pad the input to at least the kernel length");
  }
  if (valid_len == 0 || valid_len > steps) valid_len = steps;
  const std::size_t positions = steps - cfg.primary_kernel + 1;
  const std::size_t out_ch = cfg.primary_filters * cfg.capsule_dim;

  std::vector<Tensor<S>> windows;
  windows.reserve(positions);
  for (std::size_t p = 0; p < positions; ++p) {
    std::vector<Tensor<S>> span;
    span.reserve(cfg.primary_kernel);
    for (std::size_t k = 0; k < cfg.primary_kernel; ++k) span.push_back(row(x, p + k));
    windows.push_back(concat<S>(span));
  }
  Tensor<S> window_matrix = stack_rows(windows);                               // [P, kernel*in]
  Tensor<S> conv = add_rowvec(matmul(window_matrix, transpose(layer.conv_w)), layer.conv_b);  // [P, out_ch]

  bool any_masked = false;
  std::vector<S> mask(positions * out_ch, S(1));
  for (std::size_t p = 0; p < positions; ++p) {
    if (p >= valid_len) {
      any_masked = true;
      std::fill(mask.begin() + p * out_ch, mask.begin() + (p + 1) * out_ch, S(0));
    }
  }
  if (any_masked) conv = mul(conv, Tensor<S>(std::move(mask), Shape{positions, out_ch}));

  Tensor<S> capsules = reshape(conv, Shape{positions * cfg.primary_filters, cfg.capsule_dim});
  return squash_rows(capsules);
}

// Windowed routing: children in each kernel window of capsule positions are
// routed to conv_filters parent capsules; transforms are per parent and
// shared across children and window positions.
template <typename S>
struct ConvCapsuleLayer {
  CapsuleStackConfig cfg;
  Tensor<S> w;  // [conv_filters, dim, dim]

  static ConvCapsuleLayer create(const CapsuleStackConfig& cfg, Rng rng) {
    ConvCapsuleLayer l;
    l.cfg = cfg;
    l.w = Tensor<S>::zeros({cfg.conv_filters, cfg.capsule_dim, cfg.capsule_dim}, true);
    init::uniform(l.w, 1.0 / std::sqrt(static_cast<double>(cfg.capsule_dim)), rng);
    return l;
  }

  void collect(const std::string& prefix, ParamList<S>& out) const { out.emplace_back(prefix + ".w", w); }
};

template <typename S>
Tensor<S> conv_capsules(const Tensor<S>& children, const ConvCapsuleLayer<S>& layer) {
  const CapsuleStackConfig& cfg = layer.cfg;
  if (children.rank() != 2 || children.dim(1) != cfg.capsule_dim) {
    shape_error("conv_capsules", children.shape(), Shape{0, cfg.capsule_dim});
  }
  const std::size_t total = children.dim(0);
  if (total % cfg.primary_filters != 0) {
    throw std::invalid_argument("conv_capsules: child count " + std::to_string(total) +
                                " is not a whole number of positions of " + std::to_string(cfg.primary_filters));
  }
  const std::size_t positions = total / cfg.primary_filters;
  if (positions < cfg.conv_kernel) {
    throw std::invalid_argument("conv_capsules: " + std::to_string(positions) + " capsule positions is below kernel " +
                                std::to_string(cfg.conv_kernel) + "; pad the input sequence");
  }
  const std::size_t out_positions = positions - cfg.conv_kernel + 1;
  std::vector<Tensor<S>> outputs;
  outputs.reserve(out_positions);
  for (std::size_t p = 0; p < out_positions; ++p) {
    Tensor<S> window = slice_rows(children, p * cfg.primary_filters, (p + cfg.conv_kernel) * cfg.primary_filters);
    Tensor<S> uhat = capsule_predict_shared(window, layer.w);
    outputs.push_back(route_by_agreement(uhat, cfg.routing_iterations));
  }
  return concat_rows(outputs);
}

// Flattens every incoming capsule into one child list and routes to
// dense_out parents with unshared per-pair transforms.
template <typename S>
struct DenseCapsuleLayer {
  CapsuleStackConfig cfg;
  std::size_t max_children = 0;
  Tensor<S> w;  // [max_children, dense_out, dim, dim]

  static DenseCapsuleLayer create(const CapsuleStackConfig& cfg, std::size_t max_children, Rng rng) {
    DenseCapsuleLayer l;
    l.cfg = cfg;
    l.max_children = max_children;
    l.w = Tensor<S>::zeros({max_children, cfg.dense_out, cfg.capsule_dim, cfg.capsule_dim}, true);
    init::uniform(l.w, 1.0 / std::sqrt(static_cast<double>(cfg.capsule_dim)), rng);
    return l;
  }

  void collect(const std::string& prefix, ParamList<S>& out) const { out.emplace_back(prefix + ".w", w); }
};

template <typename S>
Tensor<S> dense_capsules(const Tensor<S>& children, const DenseCapsuleLayer<S>& layer,
                         RoutingTrace<S>* trace = nullptr) {
  Tensor<S> uhat = capsule_predict_pairwise(children, layer.w);
  return route_by_agreement(uhat, layer.cfg.routing_iterations, trace);
}

// ---------------------------------------------------------------------------
// Dense head and dropout
// ---------------------------------------------------------------------------

enum class Activation { kSigmoid, kLinear };

template <typename S>
struct DenseHead {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  Activation activation = Activation::kLinear;
  Tensor<S> w;  // [out, in]
  Tensor<S> b;  // [out]

  static DenseHead create(std::size_t in_dim, std::size_t out_dim, Activation act, Rng rng) {
    DenseHead h;
    h.in_dim = in_dim;
    h.out_dim = out_dim;
    h.activation = act;
    h.w = Tensor<S>::zeros({out_dim, in_dim}, true);
    h.b = Tensor<S>::zeros({out_dim}, true);
    init::uniform(h.w, 1.0 / std::sqrt(static_cast<double>(in_dim)), rng);
    return h;
  }

  void collect(const std::string& prefix, ParamList<S>& out) const {
    out.emplace_back(prefix + ".w", w);
    out.emplace_back(prefix + ".b", b);
  }
};

template <typename S>
Tensor<S> dense_head(const Tensor<S>& x, const DenseHead<S>& head) {
  if (x.rank() != 1 || x.dim(0) != head.in_dim) shape_error("dense_head", x.shape(), Shape{head.in_dim});
  Tensor<S> z = add(matvec(head.w, x), head.b);
  return head.activation == Activation::kSigmoid ? sigmoid(z) : z;
}

// Inverted dropout: zero with probability rate and scale survivors by
// 1/(1-rate) while training; identity at inference.
template <typename S>
Tensor<S> dropout(const Tensor<S>& x, double rate, bool training, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw std::invalid_argument("dropout: rate " + std::to_string(rate) + " outside [0,1)");
  }
  if (!training || rate == 0.0) return x;
  const S keep_scale = static_cast<S>(1.0 / (1.0 - rate));
  std::vector<S> mask(x.size());
  for (auto& v : mask) v = rng.uniform() < rate ? S(0) : keep_scale;
  return mul(x, Tensor<S>(std::move(mask), x.shape()));
}

}  // namespace amtl

#endif  // AMTL_LAYERS_HPP
