#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cmivtp/numerics/ops.hpp"
#include "cmivtp/numerics/rng.hpp"

namespace cmivtp::model {

using num::Tensor;

/// y = x W + b with W stored [in x out]; b may be undefined.
struct Linear {
  Tensor w;
  Tensor b;
  Tensor operator()(const Tensor& x) const {
    if (b.defined()) return num::linear(x, w, b);
    if (x.rank() == 1) return num::reshape(num::matmul(num::reshape(x, {1, x.size()}), w), {w.dim(1)});
    return num::matmul(x, w);
  }
  std::size_t in() const { return w.dim(0); }
  std::size_t out() const { return w.dim(1); }
};

/// Named parameter registry. Creation order is the checkpoint order.
/// Weights are drawn uniform in +-1/sqrt(fan_in) from a seeded stream.
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed) : rng_(seed) {}

  Tensor uniform(const std::string& name, num::Shape shape, double bound);
  Tensor constant(const std::string& name, num::Shape shape, double value);
  Linear linear(const std::string& name, std::size_t in, std::size_t out, double gain = 1.0);
  Linear linear_no_bias(const std::string& name, std::size_t in, std::size_t out);

  const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }
  std::vector<Tensor> tensors() const;
  Tensor find(const std::string& name) const;  // undefined when absent
  std::size_t scalar_count() const;

 private:
  Tensor add(const std::string& name, Tensor t);

  num::Rng rng_;
  std::vector<std::pair<std::string, Tensor>> entries_;
};

}  // namespace cmivtp::model
