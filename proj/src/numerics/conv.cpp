#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "cmivtp/error.hpp"
#include "cmivtp/numerics/ops.hpp"

namespace cmivtp::num {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

struct ConvGeom {
  std::size_t c_in, h, w, c_out, kh, kw, stride, pad, ho, wo;
  std::size_t patch() const { return c_in * kh * kw; }
  std::size_t pixels() const { return ho * wo; }
};

// Column matrix [c_in*kh*kw x ho*wo]; out-of-bounds taps read zero.
std::vector<double> im2col(const double* x, const ConvGeom& g) {
  std::vector<double> col(g.patch() * g.pixels(), 0.0);
  for (std::size_t c = 0; c < g.c_in; ++c) {
    for (std::size_t ky = 0; ky < g.kh; ++ky) {
      for (std::size_t kx = 0; kx < g.kw; ++kx) {
        double* row = col.data() + ((c * g.kh + ky) * g.kw + kx) * g.pixels();
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
          if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
          const double* src = x + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
            if (ix < 0 || ix >= static_cast<long>(g.w)) continue;
            row[oy * g.wo + ox] = src[ix];
          }
        }
      }
    }
  }
  return col;
}

void col2im_add(const double* col, const ConvGeom& g, double* dx) {
  for (std::size_t c = 0; c < g.c_in; ++c) {
    for (std::size_t ky = 0; ky < g.kh; ++ky) {
      for (std::size_t kx = 0; kx < g.kw; ++kx) {
        const double* row = col + ((c * g.kh + ky) * g.kw + kx) * g.pixels();
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
          if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
          double* dst = dx + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
            if (ix < 0 || ix >= static_cast<long>(g.w)) continue;
            dst[ix] += row[oy * g.wo + ox];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& k, const Tensor& bias, std::size_t stride,
              std::size_t padding) {
  if (x.rank() != 3 || k.rank() != 4 || k.dim(1) != x.dim(0)) {
    throw DimensionError("conv2d: input " + shape_str(x.shape()) + " incompatible with kernel " +
                         shape_str(k.shape()));
  }
  if (stride == 0) throw DimensionError("conv2d: stride must be positive");
  ConvGeom g{x.dim(0), x.dim(1), x.dim(2), k.dim(0), k.dim(2), k.dim(3), stride, padding, 0, 0};
  if (g.kh > g.h + 2 * g.pad || g.kw > g.w + 2 * g.pad) {
    throw DimensionError("conv2d: kernel " + shape_str(k.shape()) + " larger than padded input " +
                         shape_str(x.shape()) + " (padding " + std::to_string(padding) + ")");
  }
  if (bias.defined() && bias.size() != g.c_out) {
    throw DimensionError("conv2d: bias " + shape_str(bias.shape()) + " does not match " +
                         std::to_string(g.c_out) + " output channels");
  }
  g.ho = (g.h + 2 * g.pad - g.kh) / g.stride + 1;
  g.wo = (g.w + 2 * g.pad - g.kw) / g.stride + 1;

  std::vector<double> col = im2col(x.data().data(), g);
  std::vector<double> out(g.c_out * g.pixels());
  MapMat om(out.data(), g.c_out, g.pixels());
  om.noalias() = ConstMapMat(k.data().data(), g.c_out, g.patch()) *
                 ConstMapMat(col.data(), g.patch(), g.pixels());
  if (bias.defined()) {
    for (std::size_t c = 0; c < g.c_out; ++c) om.row(c).array() += bias.data()[c];
  }

  const bool want = active_tape() != nullptr &&
                    (x.requires_grad() || k.requires_grad() || (bias.defined() && bias.requires_grad()));
  Tensor result = Tensor::from({g.c_out, g.ho, g.wo}, std::move(out));
  if (!want) return result;
  result.set_requires_grad(true);
  auto xi = x.impl();
  auto ki = k.impl();
  auto bi = bias.defined() ? bias.impl() : nullptr;
  active_tape()->record(result.impl(), [xi, ki, bi, g, col = std::move(col)](const TensorImpl& o) {
    ConstMapMat go(o.grad.data(), g.c_out, g.pixels());
    if (ki->requires_grad) {
      MapMat(ki->grad_buffer().data(), g.c_out, g.patch()).noalias() +=
          go * ConstMapMat(col.data(), g.patch(), g.pixels()).transpose();
    }
    if (bi && bi->requires_grad) {
      auto gb = bi->grad_buffer();
      for (std::size_t c = 0; c < g.c_out; ++c) gb[c] += go.row(c).sum();
    }
    if (xi->requires_grad) {
      std::vector<double> dcol(g.patch() * g.pixels());
      MapMat(dcol.data(), g.patch(), g.pixels()).noalias() =
          ConstMapMat(ki->data.data(), g.c_out, g.patch()).transpose() * go;
      col2im_add(dcol.data(), g, xi->grad_buffer().data());
    }
  });
  return result;
}

namespace {

// Bilinear tap weights at continuous feature coordinate (y, x), where
// feature (i, j) sits at (i + 0.5, j + 0.5).
struct Bilinear {
  std::size_t y0, y1, x0, x1;
  double wy0, wy1, wx0, wx1;
};

Bilinear bilinear_at(double y, double x, std::size_t h, std::size_t w) {
  double u = std::clamp(y - 0.5, 0.0, static_cast<double>(h - 1));
  double v = std::clamp(x - 0.5, 0.0, static_cast<double>(w - 1));
  Bilinear b{};
  b.y0 = static_cast<std::size_t>(std::floor(u));
  b.x0 = static_cast<std::size_t>(std::floor(v));
  b.y1 = std::min(b.y0 + 1, h - 1);
  b.x1 = std::min(b.x0 + 1, w - 1);
  const double fy = u - static_cast<double>(b.y0);
  const double fx = v - static_cast<double>(b.x0);
  b.wy0 = 1.0 - fy;
  b.wy1 = fy;
  b.wx0 = 1.0 - fx;
  b.wx1 = fx;
  return b;
}

}  // namespace

Tensor roi_align(const Tensor& fmap, const RoiBox& box, std::size_t out, double spatial_scale,
                 RoiDiagnostics* diag) {
  if (fmap.rank() != 3) throw DimensionError("roi_align: expected [C x H x W], got " + shape_str(fmap.shape()));
  if (out == 0) throw DimensionError("roi_align: output size must be positive");
  const std::size_t c_n = fmap.dim(0), h = fmap.dim(1), w = fmap.dim(2);
  const double fh = static_cast<double>(h), fw = static_cast<double>(w);
  double x0 = std::clamp(box.x_min * spatial_scale, 0.0, fw);
  double x1 = std::clamp(box.x_max * spatial_scale, 0.0, fw);
  double y0 = std::clamp(box.y_min * spatial_scale, 0.0, fh);
  double y1 = std::clamp(box.y_max * spatial_scale, 0.0, fh);

  // Sample points and their weights, shared by every channel.
  struct Tap {
    std::size_t cell;
    Bilinear b;
    double weight;
  };
  std::vector<Tap> taps;
  const bool degenerate = !(x1 > x0) || !(y1 > y0);
  if (degenerate) {
    if (diag) ++diag->degenerate_boxes;
    const Bilinear b = bilinear_at(0.5 * (y0 + y1), 0.5 * (x0 + x1), h, w);
    for (std::size_t cell = 0; cell < out * out; ++cell) taps.push_back({cell, b, 1.0});
  } else {
    const double bin_h = (y1 - y0) / static_cast<double>(out);
    const double bin_w = (x1 - x0) / static_cast<double>(out);
    for (std::size_t py = 0; py < out; ++py) {
      for (std::size_t px = 0; px < out; ++px) {
        for (int sy = 0; sy < 2; ++sy) {
          for (int sx = 0; sx < 2; ++sx) {
            const double yy = y0 + (static_cast<double>(py) + 0.25 + 0.5 * sy) * bin_h;
            const double xx = x0 + (static_cast<double>(px) + 0.25 + 0.5 * sx) * bin_w;
            taps.push_back({py * out + px, bilinear_at(yy, xx, h, w), 0.25});
          }
        }
      }
    }
  }

  std::vector<double> result(c_n * out * out, 0.0);
  auto fd = fmap.data();
  for (std::size_t c = 0; c < c_n; ++c) {
    const double* plane = fd.data() + c * h * w;
    double* dst = result.data() + c * out * out;
    for (const Tap& t : taps) {
      const Bilinear& b = t.b;
      const double v = b.wy0 * (b.wx0 * plane[b.y0 * w + b.x0] + b.wx1 * plane[b.y0 * w + b.x1]) +
                       b.wy1 * (b.wx0 * plane[b.y1 * w + b.x0] + b.wx1 * plane[b.y1 * w + b.x1]);
      dst[t.cell] += t.weight * v;
    }
  }

  Tensor res = Tensor::from({c_n, out, out}, std::move(result));
  if (active_tape() == nullptr || !fmap.requires_grad()) return res;
  res.set_requires_grad(true);
  auto fi = fmap.impl();
  active_tape()->record(res.impl(), [fi, taps = std::move(taps), c_n, h, w, out](const TensorImpl& o) {
    auto g = fi->grad_buffer();
    for (std::size_t c = 0; c < c_n; ++c) {
      double* plane = g.data() + c * h * w;
      const double* go = o.grad.data() + c * out * out;
      for (const Tap& t : taps) {
        const Bilinear& b = t.b;
        const double gv = t.weight * go[t.cell];
        plane[b.y0 * w + b.x0] += gv * b.wy0 * b.wx0;
        plane[b.y0 * w + b.x1] += gv * b.wy0 * b.wx1;
        plane[b.y1 * w + b.x0] += gv * b.wy1 * b.wx0;
        plane[b.y1 * w + b.x1] += gv * b.wy1 * b.wx1;
      }
    }
  });
  return res;
}

}  // namespace cmivtp::num
