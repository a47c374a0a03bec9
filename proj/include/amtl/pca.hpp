#ifndef AMTL_PCA_HPP
#define AMTL_PCA_HPP

#include <cstddef>
#include <vector>

namespace amtl {

struct PcaResult {
  std::size_t n = 0;
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::vector<double> projected;           // [n, out_dim] row-major
  std::vector<double> components;          // [out_dim, in_dim], rows are principal axes
  std::vector<double> explained_variance;  // nonincreasing, one per component
  std::vector<double> mean;                // [in_dim]
};

// Mean-centered projection onto the top principal components of the sample
// covariance. target_dim 0 selects min(100, d, n); requests are capped at d.
// Sign convention: the largest-magnitude loading of each component is
// positive.
PcaResult pca_project(const std::vector<double>& data, std::size_t n, std::size_t d, std::size_t target_dim = 0);

}  // namespace amtl

#endif  // AMTL_PCA_HPP
