#include "cmivtp/harness/pca.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "cmivtp/error.hpp"

namespace cmivtp::harness {

namespace {

void fix_sign(Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) > 1e-12) {
      if (v[i] < 0) v = -v;
      return;
    }
  }
}

// Dominant eigenvector of a symmetric PSD matrix. A few rounds of squaring
// (C <- C^2 / |C^2|) separate close eigenvalues quickly; plain power
// iteration on C then polishes the vector to the tolerance.
Eigen::VectorXd dominant(const Eigen::MatrixXd& c) {
  const Eigen::Index n = c.rows();
  Eigen::MatrixXd m = c / c.norm();
  for (int i = 0; i < 6; ++i) {
    m = m * m;
    const double s = m.norm();
    if (!(s > 0.0)) break;
    m /= s;
  }
  Eigen::Index col = 0;
  m.colwise().norm().maxCoeff(&col);
  Eigen::VectorXd v = m.col(col);
  if (!(v.norm() > 0.0)) v = Eigen::VectorXd::Ones(n);
  v.normalize();
  for (std::size_t it = 0; it < kPcaMaxIter; ++it) {
    Eigen::VectorXd next = c * v;
    const double s = next.norm();
    if (!(s > 0.0)) break;
    next /= s;
    if (next.dot(v) < 0) next = -next;
    const double change = (next - v).norm();
    v = next;
    if (change < kPcaTolerance) break;
  }
  return v;
}

}  // namespace

PcaResult pca_project(const std::vector<std::vector<double>>& rows) {
  if (rows.size() < 2) throw DimensionError("pca_project needs at least two rows");
  const std::size_t n = rows.size(), j = rows[0].size();
  if (j == 0) throw DimensionError("pca_project: empty rows");
  Eigen::MatrixXd x(n, j);
  for (std::size_t r = 0; r < n; ++r) {
    if (rows[r].size() != j) throw DimensionError("pca_project: row " + std::to_string(r) + " has the wrong length");
    for (std::size_t c = 0; c < j; ++c) x(r, c) = rows[r][c];
  }
  x.rowwise() -= x.colwise().mean();
  Eigen::MatrixXd cov = x.transpose() * x / static_cast<double>(n - 1);

  PcaResult out;
  out.projection.assign(n, {0.0, 0.0});
  const double scale = cov.norm();
  if (!(scale > 0.0)) {
    out.warning = "pca_project: all rows are identical (rank 0); projection is zero";
    for (auto& c : out.components) c.assign(j, 0.0);
    return out;
  }
  for (int k = 0; k < 2; ++k) {
    Eigen::VectorXd v(j);
    double lambda = 0.0;
    if (j > static_cast<std::size_t>(k) && cov.norm() > 1e-14 * scale) {
      v = dominant(cov);
      lambda = v.dot(cov * v);
      cov -= lambda * v * v.transpose();
      fix_sign(v);
    } else {
      v.setZero();  // fewer informative directions than components
    }
    out.components[k].assign(v.data(), v.data() + j);
    out.variances[k] = lambda;
    const Eigen::VectorXd p = x * v;
    for (std::size_t r = 0; r < n; ++r) out.projection[r][k] = p[static_cast<Eigen::Index>(r)];
  }
  return out;
}

}  // namespace cmivtp::harness
