#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "cmivtp/numerics/tensor.hpp"

// Differentiable primitives. Every op records itself on the active tape
// when at least one input requires a gradient.
namespace cmivtp::num {

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);
// x * s where s holds a single value; gradient flows into both.
Tensor scale_by(const Tensor& x, const Tensor& s);
// Adds b (length = last dim of x) to every row of x.
Tensor add_bias(const Tensor& x, const Tensor& b);
// x[m x k] * w[k x n] + b[n]; a rank-1 x is treated as one row and a rank-1
// result is returned.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor expm1(const Tensor& x);  // exp(x) - 1, accurate near 0
Tensor clamp(const Tensor& x, double lo, double hi);

/// Softmax along `axis`, max-subtracted.
Tensor softmax(const Tensor& x, std::size_t axis);

inline constexpr double kLayerNormEps = 1e-5;
/// Normalizes each row over the last axis, then applies gain and bias.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = kLayerNormEps);

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length);
Tensor reshape(const Tensor& x, Shape shape);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor mean_axis(const Tensor& x, std::size_t axis);

// Euclidean norm of every row of a rank-2 tensor. The gradient at a zero
// row is taken as zero.
Tensor row_norms(const Tensor& x);

/// 2-D cross-correlation (no kernel flip).
///   x: [C_in x H x W], k: [C_out x C_in x kh x kw], bias: [C_out] or undefined.
///   H' = floor((H + 2*padding - kh) / stride) + 1.
Tensor conv2d(const Tensor& x, const Tensor& k, const Tensor& bias, std::size_t stride,
              std::size_t padding);

// [C x H x W] -> [C]
Tensor global_avg_pool(const Tensor& x);

struct RoiBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;
};

struct RoiDiagnostics {
  std::size_t degenerate_boxes = 0;
};

/// RoI-Align over fmap [C x H x W].
///
/// The box (input-image coordinates) is multiplied by spatial_scale and
/// clamped to [0, W] x [0, H]; feature value i sits at coordinate i + 0.5.
/// The box is split into out x out cells and each cell averages 2x2
/// bilinear samples taken at its quarter points, (0.25, 0.75) of the cell
/// along each axis. Samples are clamped to the centers of the border pixels.
/// A box with zero area after clamping yields the bilinear sample at its
/// center in every cell and bumps diag->degenerate_boxes.
Tensor roi_align(const Tensor& fmap, const RoiBox& box, std::size_t out, double spatial_scale,
                 RoiDiagnostics* diag = nullptr);

}  // namespace cmivtp::num
