#include "amtl/pca.hpp"

#include <algorithm>
#include <stdexcept>

#include <Eigen/Dense>

namespace amtl {

PcaResult pca_project(const std::vector<double>& data, std::size_t n, std::size_t d, std::size_t target_dim) {
  if (n < 2) throw std::invalid_argument("pca_project: need at least 2 rows, got " + std::to_string(n));
  if (d == 0 || data.size() != n * d) {
    throw std::invalid_argument("pca_project: data size " + std::to_string(data.size()) +
                                " does not match " + std::to_string(n) + "x" + std::to_string(d));
  }
  std::size_t k = target_dim == 0 ? std::min<std::size_t>(100, std::min(n, d)) : std::min(target_dim, d);

  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> x(data.data(),
                                                                                             static_cast<long>(n),
                                                                                             static_cast<long>(d));
  Eigen::RowVectorXd mean = x.colwise().mean();
  Eigen::MatrixXd centered = x.rowwise() - mean;
  Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw std::runtime_error("pca_project: eigendecomposition failed");

  // Eigen returns ascending eigenvalues; take the top k in descending order.
  PcaResult r;
  r.n = n;
  r.in_dim = d;
  r.out_dim = k;
  r.mean.assign(mean.data(), mean.data() + d);
  r.components.resize(k * d);
  r.explained_variance.resize(k);
  Eigen::MatrixXd axes(static_cast<long>(d), static_cast<long>(k));
  for (std::size_t c = 0; c < k; ++c) {
    const long src = static_cast<long>(d - 1 - c);
    Eigen::VectorXd axis = solver.eigenvectors().col(src);
    long max_idx = 0;
    axis.cwiseAbs().maxCoeff(&max_idx);
    if (axis(max_idx) < 0) axis = -axis;
    axes.col(static_cast<long>(c)) = axis;
    r.explained_variance[c] = std::max(0.0, solver.eigenvalues()(src));
    for (std::size_t j = 0; j < d; ++j) r.components[c * d + j] = axis(static_cast<long>(j));
  }
  Eigen::MatrixXd projected = centered * axes;  // [n, k]
  r.projected.resize(n * k);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < k; ++c) r.projected[i * k + c] = projected(static_cast<long>(i), static_cast<long>(c));
  return r;
}

}  // namespace amtl
