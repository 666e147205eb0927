#pragma once

#include <vector>

#include "cmivtp/data/types.hpp"

namespace cmivtp::metrics {

using data::Track;

struct AdeFde {
  double ade = 0.0;
  double fde = 0.0;
};

AdeFde ade_fde(const Track& pred, const Track& gt);

/// minADE and minFDE over modes, each minimized independently.
AdeFde min_ade_fde(const std::vector<Track>& modes, const Track& gt);

/// Mean pairwise ADE over distinct mode pairs; 0 for a single mode.
double diversity(const std::vector<Track>& modes);

/// Extrapolates the mean velocity of the last min(3, T_obs - 1) steps.
Track constant_velocity(const Track& observed, std::size_t t_fut);

Track truncate(const Track& t, std::size_t n);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

/// Sample standard deviation; 0 for fewer than two values.
MeanStd mean_std(const std::vector<double>& v);

}  // namespace cmivtp::metrics
