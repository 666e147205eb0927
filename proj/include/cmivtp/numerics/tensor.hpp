#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cmivtp::num {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Storage shared between Tensor handles. Ops capture these in their
// backward closures, so a handle can go out of scope while the tape lives.
struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until a gradient is accumulated
  bool requires_grad = false;
  std::optional<std::size_t> node_id;
  const void* tape = nullptr;

  std::span<double> grad_buffer();  // allocates zeros on first use
};

class Tape;

/// Dense row-major float64 array with optional reverse-mode gradient.
///
/// Tensor is a cheap handle: copies alias the same storage. Use clone()
/// for a detached deep copy.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor from(Shape shape, std::vector<double> values);
  static Tensor scalar(double value);
  /// A leaf that accumulates gradients.
  static Tensor parameter(Shape shape, std::vector<double> values);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const;

  std::span<const double> data() const;
  std::span<double> mutable_data();
  std::span<const double> grad() const;  // empty when no gradient yet
  double item() const;
  double at(std::initializer_list<std::size_t> index) const;

  bool requires_grad() const;
  void set_requires_grad(bool flag);
  std::optional<std::size_t> node_id() const;
  bool is_leaf() const { return !node_id().has_value(); }

  void zero_grad();
  /// Reverse pass from this scalar over the tape that recorded it.
  void backward() const;

  Tensor clone() const;  // detached copy of the values
  Tensor detach() const { return clone(); }

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

 private:
  std::shared_ptr<TensorImpl> impl_;
};

// Throws NumericError naming `what` if any entry is NaN or infinite.
void check_finite(const Tensor& t, const std::string& what);

/// Ordered record of primitive operations; backward runs it in reverse.
class Tape {
 public:
  using BackwardFn = std::function<void(const TensorImpl& out)>;

  Tape() = default;
  ~Tape() { clear(); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  std::size_t record(const std::shared_ptr<TensorImpl>& output, BackwardFn fn);
  void backward(const Tensor& loss);
  void clear();
  std::size_t size() const { return entries_.size(); }

 private:
  struct Entry {
    std::shared_ptr<TensorImpl> output;
    BackwardFn backward;
  };
  std::vector<Entry> entries_;
};

// The tape ops record onto for the current thread, or nullptr.
Tape* active_tape();

class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

// Suspends recording (forward-only evaluation).
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape* previous_;
};

}  // namespace cmivtp::num
