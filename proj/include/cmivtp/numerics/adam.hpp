#pragma once

#include <cstdint>
#include <vector>

#include "cmivtp/numerics/tensor.hpp"

namespace cmivtp::num {

struct AdamHyper {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t step = 0;

  static AdamState for_params(const std::vector<Tensor>& params);
};

/// One bias-corrected Adam update using each parameter's accumulated
/// gradient (a parameter without a gradient buffer counts as zero).
void adam_step(std::vector<Tensor>& params, AdamState& state, const AdamHyper& hyper);

void zero_grads(std::vector<Tensor>& params);

}  // namespace cmivtp::num
