#include "cmivtp/data/homography.hpp"

#include <cmath>

namespace cmivtp::data {

double Homography::determinant() const {
  return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
         m[2] * (m[3] * m[7] - m[4] * m[6]);
}

bool Homography::invertible() const { return std::abs(determinant()) > 1e-9; }

Homography Homography::inverse() const {
  const double det = determinant();
  if (!(std::abs(det) > 1e-9)) throw ProjectionError("homography is singular (|det| <= 1e-9)");
  Homography r;
  r.m = {(m[4] * m[8] - m[5] * m[7]) / det, (m[2] * m[7] - m[1] * m[8]) / det,
         (m[1] * m[5] - m[2] * m[4]) / det, (m[5] * m[6] - m[3] * m[8]) / det,
         (m[0] * m[8] - m[2] * m[6]) / det, (m[2] * m[3] - m[0] * m[5]) / det,
         (m[3] * m[7] - m[4] * m[6]) / det, (m[1] * m[6] - m[0] * m[7]) / det,
         (m[0] * m[4] - m[1] * m[3]) / det};
  return r;
}

Point2 Homography::apply(const Point2& p) const {
  const double w = m[6] * p.x + m[7] * p.y + m[8];
  if (std::abs(w) < 1e-12) {
    throw ProjectionError("point (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                          ") maps to the line at infinity");
  }
  return {(m[0] * p.x + m[1] * p.y + m[2]) / w, (m[3] * p.x + m[4] * p.y + m[5]) / w};
}

Track project_geo_to_pixels(const Track& points, const Homography& h) {
  if (!h.invertible()) throw ProjectionError("homography is singular (|det| <= 1e-9)");
  Track out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(h.apply(p));
  return out;
}

}  // namespace cmivtp::data
