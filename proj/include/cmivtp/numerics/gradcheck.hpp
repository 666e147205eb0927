#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cmivtp/numerics/rng.hpp"
#include "cmivtp/numerics/tensor.hpp"

namespace cmivtp::num {

/// Fingerprint of the branch decisions (ReLU signs, clamp regions, argmin
/// winners) taken while it is active. Two evaluations with different
/// fingerprints lie on different smooth pieces of a piecewise function.
class BranchTrace {
 public:
  BranchTrace();
  ~BranchTrace();
  BranchTrace(const BranchTrace&) = delete;
  BranchTrace& operator=(const BranchTrace&) = delete;

  std::uint64_t signature() const { return hash_; }
  void reset() { hash_ = 0; }

  static bool active();
  static void note(std::uint64_t value);

 private:
  BranchTrace* previous_;
  std::uint64_t hash_ = 0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
  std::size_t skipped_kinks = 0;  // probes whose +-h points straddle a branch change
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

inline double relative_error(double a, double b, double floor = 1e-8) {
  const double denom = std::max({std::abs(a), std::abs(b), floor});
  return std::abs(a - b) / denom;
}

/// Denominator floor for a check of f around the value f0. Central
/// differences resolve a gradient only to about eps * |f0| / h, so gradients
/// much smaller than 1e-6 * |f0| are compared against that floor instead.
inline double gradient_floor(double f0) { return std::max(1e-8, 1e-6 * std::abs(f0)); }

/// Central-difference check of d f / d params against one taped backward.
///
/// f must rebuild its graph from the current parameter values on every call
/// and be deterministic; it is evaluated twice up front and a mismatch
/// throws NumericError. With max_coords_per_param > 0 only that many
/// coordinates per tensor are probed, picked by `pick` (all when null).
/// A probe whose f(x+h) or f(x-h) takes different branches than f(x) is
/// skipped, counted in skipped_kinks, and replaced by the next candidate.
GradCheckReport check_gradients(const std::function<Tensor()>& f, std::vector<Tensor> params,
                                double h = 1e-5, std::size_t max_coords_per_param = 0,
                                Rng* pick = nullptr);

/// Single-input form: max relative error of d f(x) / dx.
double finite_diff_check(const std::function<Tensor(const Tensor&)>& f, Tensor x, double h = 1e-5);

}  // namespace cmivtp::num
