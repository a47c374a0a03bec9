#ifndef AMTL_GRADCHECK_HPP
#define AMTL_GRADCHECK_HPP

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "amtl/tensor.hpp"

namespace amtl {

struct GradCheckReport {
  std::string op_name;
  double max_relative_error = 0.0;
  std::vector<std::pair<std::string, double>> per_parameter;
};

using NamedParams = std::vector<std::pair<std::string, Tensor<double>>>;

// Central finite differences against reverse-mode gradients. The callable
// must rebuild the forward graph from the given parameters on every call and
// be deterministic; run at double precision only.
inline GradCheckReport finite_difference_check(const std::string& op_name,
                                               const std::function<Tensor<double>()>& f, NamedParams params,
                                               double epsilon = 1e-5) {
  if (!(epsilon >= 1e-7 && epsilon <= 1e-4)) {
    throw std::invalid_argument("finite_difference_check: epsilon " + std::to_string(epsilon) +
                                " outside [1e-7, 1e-4]");
  }
  for (auto& [name, p] : params) {
    p.set_requires_grad(true);
    p.zero_grad();
    for (double v : p.values()) {
      if (!std::isfinite(v)) {
        throw std::invalid_argument("finite_difference_check: non-finite value in parameter '" + name + "'");
      }
    }
  }

  Tensor<double> loss = f();
  loss.backward();

  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (auto& [name, p] : params) {
    for (double v : p.grad()) {
      if (!std::isfinite(v)) {
        throw std::invalid_argument("finite_difference_check: non-finite analytic gradient for '" + name + "'");
      }
    }
    analytic.push_back(p.grad());
  }

  GradCheckReport report;
  report.op_name = op_name;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& [name, p] = params[pi];
    double worst = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double saved = p.values()[i];
      p.values()[i] = saved + epsilon;
      const double up = f().item();
      p.values()[i] = saved - epsilon;
      const double down = f().item();
      p.values()[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw std::invalid_argument("finite_difference_check: non-finite loss while perturbing '" + name + "'");
      }
      const double fd = (up - down) / (2.0 * epsilon);
      const double ad = analytic[pi][i];
      const double rel = std::abs(ad - fd) / std::max({1.0, std::abs(ad), std::abs(fd)});
      worst = std::max(worst, rel);
    }
    report.per_parameter.emplace_back(name, worst);
    report.max_relative_error = std::max(report.max_relative_error, worst);
  }
  return report;
}

}  // namespace amtl

#endif  // AMTL_GRADCHECK_HPP
