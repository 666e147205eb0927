#pragma once

#include <array>

#include "cmivtp/data/types.hpp"

namespace cmivtp::data {

/// Row-major 3x3 projective map from planar geo coordinates to pixels.
struct Homography {
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  double determinant() const;
  bool invertible() const;
  Homography inverse() const;
  /// Throws ProjectionError when the point maps to |w| < 1e-12.
  Point2 apply(const Point2& p) const;
};

Track project_geo_to_pixels(const Track& points, const Homography& h);

}  // namespace cmivtp::data
