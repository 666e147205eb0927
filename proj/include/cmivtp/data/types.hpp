#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "cmivtp/error.hpp"

namespace cmivtp::data {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

using Track = std::vector<Point2>;

/// AIS positions in normalized planar units with per-step availability.
struct AisTrajectory {
  Track points;
  std::vector<bool> available;
  friend bool operator==(const AisTrajectory&, const AisTrajectory&) = default;

  bool fully_available() const;
  bool any_available() const;
};

/// Pixel midpoints of the vessel's bounding box.
struct CctvTrajectory {
  Track points;
  friend bool operator==(const CctvTrajectory&, const CctvTrajectory&) = default;
};

struct BBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;
  friend bool operator==(const BBox&, const BBox&) = default;
};

/// 3 x H x W raster: 0 waterway mask, 1 other-vessel occupancy, 2 target
/// marker. Stored as float32, which is also the on-disk precision.
struct SceneFrame {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> raster;
  BBox bbox;
  friend bool operator==(const SceneFrame&, const SceneFrame&) = default;

  float at(std::size_t channel, std::size_t row, std::size_t col) const {
    return raster[(channel * height + row) * width + col];
  }
};

inline constexpr std::size_t kSceneChannels = 3;

enum class Density { low, medium, high };

const char* to_string(Density d);
Density density_from_string(const std::string& s);

struct VesselSample {
  std::string vessel_id;
  Density density = Density::medium;
  bool is_dark = false;
  AisTrajectory obs_ais;
  CctvTrajectory obs_cctv;
  std::vector<SceneFrame> scenes;
  Track fut_ais;
  Track fut_cctv;
  friend bool operator==(const VesselSample&, const VesselSample&) = default;

  std::size_t t_obs() const { return obs_ais.points.size(); }
  std::size_t t_fut() const { return fut_ais.size(); }
};

/// Contiguous observed/future split: observed = track[0, t_obs), future =
/// track[t_obs, t_obs + t_fut). Anything after that is ignored.
template <class T>
std::pair<std::vector<T>, std::vector<T>> split_window(const std::vector<T>& track, std::size_t t_obs,
                                                       std::size_t t_fut) {
  if (track.size() < t_obs + t_fut) {
    throw WindowError("track of length " + std::to_string(track.size()) + " cannot hold T_obs=" +
                      std::to_string(t_obs) + " + T_fut=" + std::to_string(t_fut));
  }
  return {std::vector<T>(track.begin(), track.begin() + static_cast<std::ptrdiff_t>(t_obs)),
          std::vector<T>(track.begin() + static_cast<std::ptrdiff_t>(t_obs),
                         track.begin() + static_cast<std::ptrdiff_t>(t_obs + t_fut))};
}

}  // namespace cmivtp::data
