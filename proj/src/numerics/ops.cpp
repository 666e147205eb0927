#include "cmivtp/numerics/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <memory>
#include <utility>

#include "cmivtp/error.hpp"
#include "cmivtp/numerics/gradcheck.hpp"

namespace cmivtp::num {

namespace {

using ImplPtr = std::shared_ptr<TensorImpl>;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

bool wants_grad(std::initializer_list<const Tensor*> inputs) {
  if (active_tape() == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t->defined() && t->requires_grad()) return true;
  }
  return false;
}

// Wraps a computed value; records `fn` when `grad` is set.
Tensor emit(Shape shape, std::vector<double> values, bool grad, Tape::BackwardFn fn) {
  Tensor out = Tensor::from(std::move(shape), std::move(values));
  if (grad) {
    out.set_requires_grad(true);
    active_tape()->record(out.impl(), std::move(fn));
  }
  return out;
}

// Gradient buffer of an input, or empty when it does not need one.
std::span<double> sink(const ImplPtr& p) {
  if (!p || !p->requires_grad) return {};
  return p->grad_buffer();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

// outer x axis x inner decomposition used by axis-wise ops.
struct AxisSplit {
  std::size_t outer = 1;
  std::size_t len = 1;
  std::size_t inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.len = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

template <class Fwd, class Deriv>
Tensor unary(const Tensor& x, Fwd fwd, Deriv deriv) {
  std::vector<double> out(x.size());
  auto xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(xd[i]);
  const bool g = wants_grad({&x});
  ImplPtr xi = x.impl();
  return emit(x.shape(), std::move(out), g, [xi, deriv](const TensorImpl& o) {
    auto gx = sink(xi);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += o.grad[i] * deriv(xi->data[i], o.data[i]);
  });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  const auto m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n);
  MapMat(out.data(), m, n).noalias() =
      ConstMapMat(a.data().data(), m, k) * ConstMapMat(b.data().data(), k, n);
  const bool g = wants_grad({&a, &b});
  ImplPtr ai = a.impl(), bi = b.impl();
  return emit({m, n}, std::move(out), g, [ai, bi, m, k, n](const TensorImpl& o) {
    ConstMapMat go(o.grad.data(), m, n);
    if (auto ga = sink(ai); !ga.empty()) {
      MapMat(ga.data(), m, k).noalias() += go * ConstMapMat(bi->data.data(), k, n).transpose();
    }
    if (auto gb = sink(bi); !gb.empty()) {
      MapMat(gb.data(), k, n).noalias() += ConstMapMat(ai->data.data(), m, k).transpose() * go;
    }
  });
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw DimensionError("transpose: expected rank 2, got " + shape_str(a.shape()));
  const auto m = a.dim(0), n = a.dim(1);
  std::vector<double> out(m * n);
  auto ad = a.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = ad[i * n + j];
  const bool g = wants_grad({&a});
  ImplPtr ai = a.impl();
  return emit({n, m}, std::move(out), g, [ai, m, n](const TensorImpl& o) {
    auto ga = sink(ai);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += o.grad[j * m + i];
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  const bool g = wants_grad({&a, &b});
  ImplPtr ai = a.impl(), bi = b.impl();
  return emit(a.shape(), std::move(out), g, [ai, bi](const TensorImpl& o) {
    for (auto& p : {ai, bi}) {
      auto gp = sink(p);
      for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += o.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  const bool g = wants_grad({&a, &b});
  ImplPtr ai = a.impl(), bi = b.impl();
  return emit(a.shape(), std::move(out), g, [ai, bi](const TensorImpl& o) {
    auto ga = sink(ai);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += o.grad[i];
    auto gb = sink(bi);
    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= o.grad[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  const bool g = wants_grad({&a, &b});
  ImplPtr ai = a.impl(), bi = b.impl();
  return emit(a.shape(), std::move(out), g, [ai, bi](const TensorImpl& o) {
    auto ga = sink(ai);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += o.grad[i] * bi->data[i];
    auto gb = sink(bi);
    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += o.grad[i] * ai->data[i];
  });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(a, [factor](double v) { return v * factor; },
               [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double value) {
  return unary(a, [value](double v) { return v + value; }, [](double, double) { return 1.0; });
}

Tensor scale_by(const Tensor& x, const Tensor& s) {
  if (s.size() != 1) throw DimensionError("scale_by: factor must hold one value, got " + shape_str(s.shape()));
  const double f = s.data()[0];
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] * f;
  const bool g = wants_grad({&x, &s});
  ImplPtr xi = x.impl(), si = s.impl();
  return emit(x.shape(), std::move(out), g, [xi, si](const TensorImpl& o) {
    const double f = si->data[0];
    auto gx = sink(xi);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += o.grad[i] * f;
    if (auto gs = sink(si); !gs.empty()) {
      double acc = 0.0;
      for (std::size_t i = 0; i < o.grad.size(); ++i) acc += o.grad[i] * xi->data[i];
      gs[0] += acc;
    }
  });
}

Tensor add_bias(const Tensor& x, const Tensor& b) {
  const std::size_t n = b.size();
  if (x.rank() == 0 || x.shape().back() != n) {
    throw DimensionError("add_bias: bias " + shape_str(b.shape()) + " does not match last dim of " +
                         shape_str(x.shape()));
  }
  std::vector<double> out(x.size());
  auto xd = x.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[i] + bd[i % n];
  const bool g = wants_grad({&x, &b});
  ImplPtr xi = x.impl(), bi = b.impl();
  return emit(x.shape(), std::move(out), g, [xi, bi, n](const TensorImpl& o) {
    auto gx = sink(xi);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += o.grad[i];
    auto gb = sink(bi);
    if (!gb.empty())
      for (std::size_t i = 0; i < o.grad.size(); ++i) gb[i % n] += o.grad[i];
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.rank() == 1) {
    Tensor row = reshape(x, {1, x.dim(0)});
    Tensor y = add_bias(matmul(row, w), b);
    return reshape(y, {y.dim(1)});
  }
  return add_bias(matmul(x, w), b);
}

Tensor relu(const Tensor& x) {
  if (BranchTrace::active()) {
    std::uint64_t word = 0;
    auto xd = x.data();
    for (std::size_t i = 0; i < xd.size(); ++i) {
      word = (word << 1) | (xd[i] > 0.0 ? 1u : 0u);
      if (i % 64 == 63 || i + 1 == xd.size()) {
        BranchTrace::note(word);
        word = 0;
      }
    }
  }
  return unary(x, [](double v) { return v > 0.0 ? v : 0.0; },
               [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
  return unary(x, [](double v) { return std::tanh(v); },
               [](double, double y) { return 1.0 - y * y; });
}

Tensor exp(const Tensor& x) {
  return unary(x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor expm1(const Tensor& x) {
  return unary(x, [](double v) { return std::expm1(v); }, [](double, double y) { return y + 1.0; });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  if (BranchTrace::active()) {
    for (double v : x.data()) BranchTrace::note(v < lo ? 1 : (v > hi ? 2 : 0));
  }
  return unary(x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
               [lo, hi](double v, double) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  const AxisSplit s = split_at(x.shape(), axis);
  std::vector<double> out(x.size());
  auto xd = x.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.len * s.inner + in;
      double mx = xd[base];
      for (std::size_t j = 1; j < s.len; ++j) mx = std::max(mx, xd[base + j * s.inner]);
      double total = 0.0;
      for (std::size_t j = 0; j < s.len; ++j) {
        const double e = std::exp(xd[base + j * s.inner] - mx);
        out[base + j * s.inner] = e;
        total += e;
      }
      for (std::size_t j = 0; j < s.len; ++j) out[base + j * s.inner] /= total;
    }
  }
  const bool g = wants_grad({&x});
  ImplPtr xi = x.impl();
  return emit(x.shape(), std::move(out), g, [xi, s](const TensorImpl& o) {
    auto gx = sink(xi);
    for (std::size_t a = 0; a < s.outer; ++a) {
      for (std::size_t in = 0; in < s.inner; ++in) {
        const std::size_t base = a * s.len * s.inner + in;
        double dot = 0.0;
        for (std::size_t j = 0; j < s.len; ++j) {
          const std::size_t i = base + j * s.inner;
          dot += o.grad[i] * o.data[i];
        }
        for (std::size_t j = 0; j < s.len; ++j) {
          const std::size_t i = base + j * s.inner;
          gx[i] += o.data[i] * (o.grad[i] - dot);
        }
      }
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  if (x.rank() == 0 || x.shape().back() == 0) throw DimensionError("layer_norm: empty feature axis");
  const std::size_t d = x.shape().back();
  if (gain.size() != d || bias.size() != d) {
    throw DimensionError("layer_norm: gain/bias " + shape_str(gain.shape()) + "/" +
                         shape_str(bias.shape()) + " do not match feature dim " + std::to_string(d));
  }
  const std::size_t rows = x.size() / d;
  std::vector<double> out(x.size());
  std::vector<double> xhat(x.size());
  std::vector<double> inv_std(rows);
  auto xd = x.data();
  auto gd = gain.data();
  auto bd = bias.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xd.data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[r] = is;
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (row[j] - mu) * is;
      xhat[r * d + j] = h;
      out[r * d + j] = h * gd[j] + bd[j];
    }
  }
  const bool g = wants_grad({&x, &gain, &bias});
  ImplPtr xi = x.impl(), gi = gain.impl(), bi = bias.impl();
  return emit(x.shape(), std::move(out), g,
              [xi, gi, bi, d, rows, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                  const TensorImpl& o) {
                auto gx = sink(xi);
                auto gg = sink(gi);
                auto gb = sink(bi);
                std::vector<double> dh(d);
                for (std::size_t r = 0; r < rows; ++r) {
                  double mean_dh = 0.0, mean_dh_h = 0.0;
                  for (std::size_t j = 0; j < d; ++j) {
                    const std::size_t i = r * d + j;
                    if (!gg.empty()) gg[j] += o.grad[i] * xhat[i];
                    if (!gb.empty()) gb[j] += o.grad[i];
                    dh[j] = o.grad[i] * gi->data[j];
                    mean_dh += dh[j];
                    mean_dh_h += dh[j] * xhat[i];
                  }
                  if (gx.empty()) continue;
                  mean_dh /= static_cast<double>(d);
                  mean_dh_h /= static_cast<double>(d);
                  for (std::size_t j = 0; j < d; ++j) {
                    const std::size_t i = r * d + j;
                    gx[i] += inv_std[r] * (dh[j] - mean_dh - xhat[i] * mean_dh_h);
                  }
                }
              });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  const Shape& ref = parts.front().shape();
  if (axis >= ref.size()) throw DimensionError("concat: axis out of range for " + shape_str(ref));
  Shape out_shape = ref;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    if (p.rank() != ref.size()) throw DimensionError("concat: rank mismatch " + shape_str(p.shape()));
    for (std::size_t i = 0; i < ref.size(); ++i) {
      if (i != axis && p.shape()[i] != ref[i]) {
        throw DimensionError("concat: shape mismatch " + shape_str(ref) + " vs " + shape_str(p.shape()));
      }
    }
    out_shape[axis] += p.shape()[axis];
  }
  const AxisSplit s = split_at(out_shape, axis);
  std::vector<double> out(numel(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const std::size_t plen = p.shape()[axis];
    auto pd = p.data();
    for (std::size_t o = 0; o < s.outer; ++o) {
      std::copy_n(pd.data() + o * plen * s.inner, plen * s.inner,
                  out.data() + (o * s.len + off) * s.inner);
    }
    off += plen;
  }
  bool g = false;
  for (const auto& p : parts) g = g || wants_grad({&p});
  std::vector<ImplPtr> impls;
  for (const auto& p : parts) impls.push_back(p.impl());
  return emit(std::move(out_shape), std::move(out), g,
              [impls, offsets, s, axis](const TensorImpl& o) {
                for (std::size_t k = 0; k < impls.size(); ++k) {
                  auto gp = sink(impls[k]);
                  if (gp.empty()) continue;
                  const std::size_t plen = impls[k]->shape[axis];
                  for (std::size_t a = 0; a < s.outer; ++a) {
                    const double* src = o.grad.data() + (a * s.len + offsets[k]) * s.inner;
                    double* dst = gp.data() + a * plen * s.inner;
                    for (std::size_t i = 0; i < plen * s.inner; ++i) dst[i] += src[i];
                  }
                }
              });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length) {
  const AxisSplit s = split_at(x.shape(), axis);
  if (start + length > s.len || length == 0) {
    throw DimensionError("slice: [" + std::to_string(start) + ", " + std::to_string(start + length) +
                         ") out of range for axis " + std::to_string(axis) + " of " +
                         shape_str(x.shape()));
  }
  Shape out_shape = x.shape();
  out_shape[axis] = length;
  std::vector<double> out(numel(out_shape));
  auto xd = x.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(xd.data() + (o * s.len + start) * s.inner, length * s.inner,
                out.data() + o * length * s.inner);
  }
  const bool g = wants_grad({&x});
  ImplPtr xi = x.impl();
  return emit(std::move(out_shape), std::move(out), g, [xi, s, start, length](const TensorImpl& o) {
    auto gx = sink(xi);
    for (std::size_t a = 0; a < s.outer; ++a) {
      const double* src = o.grad.data() + a * length * s.inner;
      double* dst = gx.data() + (a * s.len + start) * s.inner;
      for (std::size_t i = 0; i < length * s.inner; ++i) dst[i] += src[i];
    }
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.size()) {
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  const bool g = wants_grad({&x});
  ImplPtr xi = x.impl();
  return emit(std::move(shape), std::move(out), g, [xi](const TensorImpl& o) {
    auto gx = sink(xi);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += o.grad[i];
  });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  const bool g = wants_grad({&x});
  ImplPtr xi = x.impl();
  return emit({1}, {total}, g, [xi](const TensorImpl& o) {
    auto gx = sink(xi);
    for (auto& v : gx) v += o.grad[0];
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.size())); }

Tensor mean_axis(const Tensor& x, std::size_t axis) {
  const AxisSplit s = split_at(x.shape(), axis);
  Shape out_shape;
  for (std::size_t i = 0; i < x.rank(); ++i)
    if (i != axis) out_shape.push_back(x.shape()[i]);
  if (out_shape.empty()) out_shape.push_back(1);
  std::vector<double> out(s.outer * s.inner, 0.0);
  auto xd = x.data();
  const double inv = 1.0 / static_cast<double>(s.len);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t j = 0; j < s.len; ++j)
      for (std::size_t in = 0; in < s.inner; ++in)
        out[o * s.inner + in] += xd[(o * s.len + j) * s.inner + in];
  for (auto& v : out) v *= inv;
  const bool g = wants_grad({&x});
  ImplPtr xi = x.impl();
  return emit(std::move(out_shape), std::move(out), g, [xi, s, inv](const TensorImpl& o) {
    auto gx = sink(xi);
    for (std::size_t a = 0; a < s.outer; ++a)
      for (std::size_t j = 0; j < s.len; ++j)
        for (std::size_t in = 0; in < s.inner; ++in)
          gx[(a * s.len + j) * s.inner + in] += o.grad[a * s.inner + in] * inv;
  });
}

Tensor row_norms(const Tensor& x) {
  if (x.rank() != 2) throw DimensionError("row_norms: expected rank 2, got " + shape_str(x.shape()));
  const auto rows = x.dim(0), cols = x.dim(1);
  std::vector<double> out(rows);
  auto xd = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += xd[r * cols + c] * xd[r * cols + c];
    out[r] = std::sqrt(acc);
  }
  const bool g = wants_grad({&x});
  ImplPtr xi = x.impl();
  return emit({rows}, std::move(out), g, [xi, rows, cols](const TensorImpl& o) {
    auto gx = sink(xi);
    for (std::size_t r = 0; r < rows; ++r) {
      const double n = o.data[r];
      if (n == 0.0) continue;
      for (std::size_t c = 0; c < cols; ++c)
        gx[r * cols + c] += o.grad[r] * xi->data[r * cols + c] / n;
    }
  });
}

Tensor global_avg_pool(const Tensor& x) {
  if (x.rank() != 3) throw DimensionError("global_avg_pool: expected [C x H x W], got " + shape_str(x.shape()));
  return mean_axis(reshape(x, {x.dim(0), x.dim(1) * x.dim(2)}), 1);
}

}  // namespace cmivtp::num
