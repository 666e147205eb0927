#include "cmivtp/model/params.hpp"

#include <cmath>

#include "cmivtp/error.hpp"

namespace cmivtp::model {

Tensor ParamStore::add(const std::string& name, Tensor t) {
  if (find(name).defined()) throw ConfigError("duplicate parameter name '" + name + "'");
  entries_.emplace_back(name, t);
  return t;
}

Tensor ParamStore::uniform(const std::string& name, num::Shape shape, double bound) {
  std::vector<double> v(num::numel(shape));
  for (auto& x : v) x = rng_.uniform(-bound, bound);
  return add(name, Tensor::parameter(std::move(shape), std::move(v)));
}

Tensor ParamStore::constant(const std::string& name, num::Shape shape, double value) {
  std::vector<double> v(num::numel(shape), value);
  return add(name, Tensor::parameter(std::move(shape), std::move(v)));
}

Linear ParamStore::linear(const std::string& name, std::size_t in, std::size_t out, double gain) {
  const double bound = gain / std::sqrt(static_cast<double>(in));
  Linear l;
  l.w = uniform(name + ".w", {in, out}, bound);
  l.b = uniform(name + ".b", {out}, bound);
  return l;
}

Linear ParamStore::linear_no_bias(const std::string& name, std::size_t in, std::size_t out) {
  Linear l;
  l.w = uniform(name + ".w", {in, out}, 1.0 / std::sqrt(static_cast<double>(in)));
  return l;
}

std::vector<Tensor> ParamStore::tensors() const {
  std::vector<Tensor> out;
  out.reserve(entries_.size());
  for (const auto& [n, t] : entries_) out.push_back(t);
  return out;
}

Tensor ParamStore::find(const std::string& name) const {
  for (const auto& [n, t] : entries_)
    if (n == name) return t;
  return {};
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : entries_) n += t.size();
  return n;
}

}  // namespace cmivtp::model
