#pragma once

#include <cstdint>
#include <vector>

#include "cmivtp/config.hpp"
#include "cmivtp/data/homography.hpp"
#include "cmivtp/data/types.hpp"

namespace cmivtp::data {

enum class CenterlineKind { straight, sinusoid, arc };

/// Synthetic waterway scenario. Coordinates live in the unit square.
struct WaterwayConfig {
  CenterlineKind centerline = CenterlineKind::sinusoid;
  double amplitude = 0.18;  // sinusoid lateral amplitude
  double period = 0.9;      // sinusoid wavelength along x
  double arc_radius = 0.6;  // arc centerline radius
  double half_width = 0.05;

  std::size_t vessel_count = 16;  // per clip
  std::size_t clips = 4;
  bool mixed_density = false;  // cycle clips through low/medium/high counts
  Density density = Density::medium;

  double speed_min = 0.008;  // arc length per step
  double speed_max = 0.016;
  bool two_way = true;
  double maneuver_prob = 0.15;
  double maneuver_amplitude = 0.7;  // fraction of half_width

  Homography homography{{560, 60, 40, -40, 380, 60, 0, 0.1, 1}};
  double ais_noise = 0.0005;
  double pixel_noise = 0.5;

  std::size_t t_obs = 8;
  std::size_t t_fut = 36;
  std::size_t raster_size = 64;
  double frame_width = 640;
  double frame_height = 480;

  static WaterwayConfig from_kv(const KeyValues& kv);
  void validate() const;
};

struct GeneratedVessel {
  VesselSample sample;
  bool maneuvering = false;
  Track true_track;  // noiseless geo positions over the whole window
};

/// Vessels advance along the centerline with per-vessel speed and lateral
/// offset; a maneuvering minority performs an S-shaped avoidance turn.
/// Deterministic for a given (config, seed).
std::vector<GeneratedVessel> generate_scenario_detailed(const WaterwayConfig& cfg, std::uint64_t seed);
std::vector<VesselSample> generate_scenario(const WaterwayConfig& cfg, std::uint64_t seed);

/// Centerline polyline the generator uses (for tests and plotting).
Track centerline_polyline(const WaterwayConfig& cfg, std::size_t samples = 400);

/// Marks exactly floor(rho * N) vessels dark. Candidates are sorted by
/// vessel_id before a seeded shuffle, so the choice does not depend on the
/// input order. Only availability flags and is_dark change.
std::vector<VesselSample> apply_dark_vessels(std::vector<VesselSample> samples, double rho,
                                             std::uint64_t seed);

}  // namespace cmivtp::data
