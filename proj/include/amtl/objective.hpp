#ifndef AMTL_OBJECTIVE_HPP
#define AMTL_OBJECTIVE_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "amtl/layers.hpp"
#include "amtl/tensor.hpp"

namespace amtl {

// ---------------------------------------------------------------------------
// Loss terms
// ---------------------------------------------------------------------------

inline constexpr double kProbClip = 1e-7;

// Mean binary cross-entropy; probabilities are clipped to [1e-7, 1-1e-7]
// before the log so a saturated sigmoid cannot produce infinities.
template <typename S>
Tensor<S> bce_loss(const Tensor<S>& probs, const std::vector<S>& labels) {
  if (probs.rank() != 1 || probs.size() != labels.size()) {
    throw std::invalid_argument("bce_loss: " + std::to_string(labels.size()) + " labels for probs " +
                                shape_str(probs.shape()));
  }
  for (S y : labels) {
    if (y != S(0) && y != S(1)) {
      throw std::invalid_argument("bce_loss: label " + std::to_string(static_cast<double>(y)) +
                                  " outside {0,1}");
    }
  }
  const std::size_t n = labels.size();
  const S lo = static_cast<S>(kProbClip), hi = static_cast<S>(1.0 - kProbClip);
  S total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const S p = std::min(hi, std::max(lo, probs.values()[i]));
    total += -(labels[i] * std::log(p) + (S(1) - labels[i]) * std::log(S(1) - p));
  }
  const S inv = S(1) / static_cast<S>(n);
  return detail::make_op<S>("bce_loss", {total * inv}, Shape{1}, {probs},
                            [probs = probs, labels, lo, hi, inv](const std::vector<S>& g) mutable {
                              if (!detail::needs_grad(probs)) return;
                              auto& gp = probs.grad();
                              for (std::size_t i = 0; i < labels.size(); ++i) {
                                const S raw = probs.values()[i];
                                if (raw < lo || raw > hi) continue;  // clipped region is flat
                                gp[i] += g[0] * inv * (raw - labels[i]) / (raw * (S(1) - raw));
                              }
                            });
}

// Mean squared error over a batch of predictions.
template <typename S>
Tensor<S> mse_loss(const Tensor<S>& preds, const std::vector<S>& targets) {
  if (preds.rank() != 1 || preds.size() != targets.size()) {
    throw std::invalid_argument("mse_loss: " + std::to_string(targets.size()) + " targets for preds " +
                                shape_str(preds.shape()));
  }
  for (S t : targets) {
    if (!std::isfinite(static_cast<double>(t))) throw std::invalid_argument("mse_loss: non-finite target");
  }
  const std::size_t n = targets.size();
  S total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const S d = preds.values()[i] - targets[i];
    total += d * d;
  }
  const S inv = S(1) / static_cast<S>(n);
  return detail::make_op<S>("mse_loss", {total * inv}, Shape{1}, {preds},
                            [preds = preds, targets, inv](const std::vector<S>& g) mutable {
                              if (!detail::needs_grad(preds)) return;
                              auto& gp = preds.grad();
                              for (std::size_t i = 0; i < targets.size(); ++i) {
                                gp[i] += g[0] * inv * S(2) * (preds.values()[i] - targets[i]);
                              }
                            });
}

// Mean multi-class cross-entropy with a fused, numerically stable
// log-softmax. class_ids are 0-based.
template <typename S>
Tensor<S> softmax_cross_entropy(const Tensor<S>& logits, const std::vector<std::size_t>& class_ids) {
  if (logits.rank() != 2 || logits.dim(0) != class_ids.size()) {
    throw std::invalid_argument("softmax_cross_entropy: " + std::to_string(class_ids.size()) +
                                " labels for logits " + shape_str(logits.shape()));
  }
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  for (std::size_t id : class_ids) {
    if (id >= c) {
      throw std::invalid_argument("softmax_cross_entropy: class id " + std::to_string(id) +
                                  " outside 0.." + std::to_string(c - 1));
    }
  }
  std::vector<S> soft(n * c);
  S total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const S* z = logits.data() + i * c;
    S* p = soft.data() + i * c;
    S mx = z[0];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, z[j]);
    S denom = 0;
    for (std::size_t j = 0; j < c; ++j) {
      p[j] = std::exp(z[j] - mx);
      denom += p[j];
    }
    for (std::size_t j = 0; j < c; ++j) p[j] /= denom;
    total += std::log(denom) + mx - z[class_ids[i]];
  }
  const S inv = S(1) / static_cast<S>(n);
  return detail::make_op<S>("softmax_cross_entropy", {total * inv}, Shape{1}, {logits},
                            [logits = logits, class_ids, soft, inv, c](const std::vector<S>& g) mutable {
                              if (!detail::needs_grad(logits)) return;
                              auto& gl = logits.grad();
                              for (std::size_t i = 0; i < class_ids.size(); ++i) {
                                for (std::size_t j = 0; j < c; ++j) {
                                  const S delta = j == class_ids[i] ? S(1) : S(0);
                                  gl[i * c + j] += g[0] * inv * (soft[i * c + j] - delta);
                                }
                              }
                            });
}

// Discriminator objective: 5-way cross-entropy over branch identity, averaged
// over every (sample, branch) pair. Branch labels are 1..5.
template <typename S>
Tensor<S> adversarial_loss(const Tensor<S>& branch_logits, const std::vector<int>& branch_labels) {
  std::vector<std::size_t> ids;
  ids.reserve(branch_labels.size());
  for (int k : branch_labels) {
    if (k < 1 || k > 5) throw std::invalid_argument("adversarial_loss: branch label " + std::to_string(k) + " outside 1..5");
    ids.push_back(static_cast<std::size_t>(k - 1));
  }
  if (branch_logits.rank() != 2 || branch_logits.dim(1) != 5) {
    throw std::invalid_argument("adversarial_loss: logits must be [n,5], got " + shape_str(branch_logits.shape()));
  }
  return softmax_cross_entropy(branch_logits, ids);
}

// Weighted sum of the four per-task losses.
template <typename S>
Tensor<S> task_loss(const std::array<Tensor<S>, 4>& losses, const std::array<double, 4>& weights) {
  for (double w : weights) {
    if (!(w > 0)) throw std::invalid_argument("task_loss: task weights must be positive");
  }
  Tensor<S> total = scale(losses[0], static_cast<S>(weights[0]));
  for (std::size_t i = 1; i < 4; ++i) total = add(total, scale(losses[i], static_cast<S>(weights[i])));
  return total;
}

// Sum over branches of the squared Frobenius norm of S_k^T H_k, where S_k
// stacks the shared vectors of the branch's samples and H_k the private ones.
template <typename S>
Tensor<S> orthogonality_loss(const std::vector<std::pair<Tensor<S>, Tensor<S>>>& branch_pairs) {
  if (branch_pairs.empty()) throw std::invalid_argument("orthogonality_loss: no branch pairs");
  Tensor<S> total;
  for (const auto& [shared, priv] : branch_pairs) {
    if (shared.rank() != 2 || priv.rank() != 2 || shared.dim(0) != priv.dim(0)) {
      shape_error("orthogonality_loss", shared.shape(), priv.shape());
    }
    Tensor<S> term = frobenius_norm_sq(matmul(transpose(shared), priv));
    total = total.defined() ? add(total, term) : term;
  }
  return total;
}

// ---------------------------------------------------------------------------
// Loss report
// ---------------------------------------------------------------------------

struct LossReport {
  std::array<double, 4> per_task{};  // L1..L4
  double tasks = 0;
  double adversarial = 0;   // discriminator cross-entropy, nonnegative
  double orthogonality = 0;
  double total = 0;
  double lambda = 0;
  double gamma = 0;
};

// Recombines the scalar pieces; total is computed exactly as
// tasks + lambda*adversarial + gamma*orthogonality.
inline LossReport total_loss(const std::array<double, 4>& per_task, const std::array<double, 4>& weights,
                             double adversarial, double orthogonality, double lambda, double gamma) {
  LossReport r;
  r.per_task = per_task;
  r.tasks = 0;
  for (std::size_t i = 0; i < 4; ++i) r.tasks += weights[i] * per_task[i];
  r.adversarial = adversarial;
  r.orthogonality = orthogonality;
  r.lambda = lambda;
  r.gamma = gamma;
  r.total = r.tasks + lambda * adversarial + gamma * orthogonality;
  return r;
}

inline nlohmann::json to_json(const LossReport& r) {
  return nlohmann::json{{"L1", r.per_task[0]},   {"L2", r.per_task[1]}, {"L3", r.per_task[2]},
                        {"L4", r.per_task[3]},   {"L_tasks", r.tasks},  {"L_adv", r.adversarial},
                        {"L_diff", r.orthogonality}, {"L_total", r.total},  {"lambda", r.lambda},
                        {"gamma", r.gamma}};
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename S>
class AdamOptimizer {
 public:
  explicit AdamOptimizer(ParamList<S> params, AdamConfig cfg = {}) : cfg_(cfg) {
    slots_.reserve(params.size());
    for (auto& [name, p] : params) {
      Slot slot;
      slot.name = name;
      slot.param = p;
      slot.m.assign(p.size(), S(0));
      slot.v.assign(p.size(), S(0));
      slots_.push_back(std::move(slot));
    }
  }

  // One update with bias correction; gradients are cleared afterwards.
  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (auto& slot : slots_) {
      if (!slot.param.has_grad()) {
        throw std::runtime_error("adam_step: missing gradient for parameter '" + slot.name + "'");
      }
      auto& values = slot.param.values();
      auto& grad = slot.param.grad();
      for (std::size_t i = 0; i < values.size(); ++i) {
        const double g = static_cast<double>(grad[i]);
        const double m = cfg_.beta1 * static_cast<double>(slot.m[i]) + (1.0 - cfg_.beta1) * g;
        const double v = cfg_.beta2 * static_cast<double>(slot.v[i]) + (1.0 - cfg_.beta2) * g * g;
        slot.m[i] = static_cast<S>(m);
        slot.v[i] = static_cast<S>(v);
        const double mhat = m / bc1;
        const double vhat = v / bc2;
        values[i] = static_cast<S>(static_cast<double>(values[i]) - cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps));
      }
      slot.param.zero_grad();
    }
  }

  std::int64_t step_count() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  struct Slot {
    std::string name;
    Tensor<S> param;
    std::vector<S> m, v;
  };
  AdamConfig cfg_;
  std::vector<Slot> slots_;
  std::int64_t t_ = 0;
};

}  // namespace amtl

#endif  // AMTL_OBJECTIVE_HPP
