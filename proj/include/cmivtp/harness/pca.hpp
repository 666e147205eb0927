#pragma once

#include <array>
#include <string>
#include <vector>

namespace cmivtp::harness {

struct PcaResult {
  std::vector<std::array<double, 2>> projection;  // N x 2
  std::array<std::vector<double>, 2> components;  // unit vectors, first nonzero loading positive
  std::array<double, 2> variances{};              // eigenvalues of the sample covariance
  std::string warning;                            // set for rank-0 input
};

inline constexpr double kPcaTolerance = 1e-9;
inline constexpr std::size_t kPcaMaxIter = 500;

/// Centres the rows, finds the top two covariance eigenvectors by power
/// iteration with deflation and projects onto them. Rows must share one
/// length; N >= 2.
PcaResult pca_project(const std::vector<std::vector<double>>& rows);

}  // namespace cmivtp::harness
