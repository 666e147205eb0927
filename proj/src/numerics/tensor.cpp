#include "cmivtp/numerics/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cmivtp/error.hpp"

namespace cmivtp::num {

namespace {
thread_local Tape* g_active_tape = nullptr;
}

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::span<double> TensorImpl::grad_buffer() {
  if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  return grad;
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  auto impl = std::make_shared<TensorImpl>();
  impl->data.assign(numel(shape), value);
  impl->shape = std::move(shape);
  return Tensor(std::move(impl));
}

Tensor Tensor::from(Shape shape, std::vector<double> values) {
  if (numel(shape) != values.size()) {
    throw DimensionError("tensor of shape " + shape_str(shape) + " needs " +
                         std::to_string(numel(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  Tensor t = from(std::move(shape), std::move(values));
  t.impl_->requires_grad = true;
  return t;
}

const Shape& Tensor::shape() const { return impl_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= impl_->shape.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " +
                         shape_str(impl_->shape));
  }
  return impl_->shape[axis];
}

std::size_t Tensor::size() const { return impl_->data.size(); }

std::span<const double> Tensor::data() const { return impl_->data; }
std::span<double> Tensor::mutable_data() { return impl_->data; }
std::span<const double> Tensor::grad() const { return impl_->grad; }

double Tensor::item() const {
  if (size() != 1) throw DimensionError("item() on tensor of shape " + shape_str(shape()));
  return impl_->data[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  if (index.size() != rank()) throw DimensionError("index rank mismatch for " + shape_str(shape()));
  std::size_t flat = 0;
  std::size_t i = 0;
  for (auto ix : index) {
    if (ix >= impl_->shape[i]) throw DimensionError("index out of range for " + shape_str(shape()));
    flat = flat * impl_->shape[i] + ix;
    ++i;
  }
  return impl_->data[flat];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }
void Tensor::set_requires_grad(bool flag) { impl_->requires_grad = flag; }
std::optional<std::size_t> Tensor::node_id() const { return impl_->node_id; }

void Tensor::zero_grad() {
  std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

void Tensor::backward() const {
  if (!impl_->node_id || impl_->tape == nullptr) {
    throw Error("backward() on a tensor that was not recorded on a tape");
  }
  const_cast<Tape*>(static_cast<const Tape*>(impl_->tape))->backward(*this);
}

Tensor Tensor::clone() const {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = impl_->shape;
  impl->data = impl_->data;
  return Tensor(std::move(impl));
}

void check_finite(const Tensor& t, const std::string& what) {
  for (double v : t.data()) {
    if (!std::isfinite(v)) throw NumericError("non-finite value in " + what);
  }
}

std::size_t Tape::record(const std::shared_ptr<TensorImpl>& output, BackwardFn fn) {
  const std::size_t id = entries_.size();
  output->node_id = id;
  output->tape = this;
  entries_.push_back({output, std::move(fn)});
  return id;
}

void Tape::backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw DimensionError("backward() needs a scalar loss, got shape " + shape_str(loss.shape()));
  }
  const auto& impl = loss.impl();
  if (!impl->node_id || impl->tape != this || *impl->node_id >= entries_.size() ||
      entries_[*impl->node_id].output != impl) {
    throw Error("loss was not recorded on this tape");
  }
  // Interior gradients are rebuilt on every pass; leaves keep accumulating.
  for (auto& e : entries_) {
    e.output->grad.assign(e.output->data.size(), 0.0);
  }
  impl->grad[0] = 1.0;
  for (std::size_t i = *impl->node_id + 1; i-- > 0;) {
    entries_[i].backward(*entries_[i].output);
  }
}

void Tape::clear() {
  for (auto& e : entries_) {
    e.output->node_id.reset();
    e.output->tape = nullptr;
  }
  entries_.clear();
}

Tape* active_tape() { return g_active_tape; }

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

NoGradScope::NoGradScope() : previous_(g_active_tape) { g_active_tape = nullptr; }
NoGradScope::~NoGradScope() { g_active_tape = previous_; }

}  // namespace cmivtp::num
