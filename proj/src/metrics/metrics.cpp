#include "cmivtp/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cmivtp/error.hpp"

namespace cmivtp::metrics {

AdeFde ade_fde(const Track& pred, const Track& gt) {
  if (pred.size() != gt.size() || gt.empty()) {
    throw DimensionError("ade_fde: prediction length " + std::to_string(pred.size()) + " vs ground truth " +
                         std::to_string(gt.size()));
  }
  AdeFde r;
  for (std::size_t t = 0; t < gt.size(); ++t) {
    const double e = std::hypot(pred[t].x - gt[t].x, pred[t].y - gt[t].y);
    r.ade += e;
    r.fde = e;
  }
  r.ade /= static_cast<double>(gt.size());
  return r;
}

AdeFde min_ade_fde(const std::vector<Track>& modes, const Track& gt) {
  if (modes.empty()) throw DimensionError("min_ade_fde: no modes");
  AdeFde best{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  for (const auto& m : modes) {
    const AdeFde e = ade_fde(m, gt);
    best.ade = std::min(best.ade, e.ade);
    best.fde = std::min(best.fde, e.fde);
  }
  return best;
}

double diversity(const std::vector<Track>& modes) {
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < modes.size(); ++i) {
    for (std::size_t j = i + 1; j < modes.size(); ++j) {
      total += ade_fde(modes[i], modes[j]).ade;
      ++pairs;
    }
  }
  return pairs == 0 ? 0.0 : total / static_cast<double>(pairs);
}

Track constant_velocity(const Track& observed, std::size_t t_fut) {
  if (observed.size() < 2) throw WindowError("constant_velocity: need at least 2 observed steps");
  const std::size_t n = std::min<std::size_t>(3, observed.size() - 1);
  const data::Point2& last = observed.back();
  const data::Point2& first = observed[observed.size() - 1 - n];
  const double vx = (last.x - first.x) / static_cast<double>(n);
  const double vy = (last.y - first.y) / static_cast<double>(n);
  Track out;
  for (std::size_t t = 1; t <= t_fut; ++t) {
    out.push_back({last.x + vx * static_cast<double>(t), last.y + vy * static_cast<double>(t)});
  }
  return out;
}

Track truncate(const Track& t, std::size_t n) {
  if (n > t.size()) throw WindowError("cannot truncate a track of length " + std::to_string(t.size()) + " to " + std::to_string(n));
  return Track(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(n));
}

MeanStd mean_std(const std::vector<double>& v) {
  MeanStd r;
  if (v.empty()) return r;
  for (double x : v) r.mean += x;
  r.mean /= static_cast<double>(v.size());
  if (v.size() < 2) return r;
  double ss = 0.0;
  for (double x : v) ss += (x - r.mean) * (x - r.mean);
  r.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  return r;
}

}  // namespace cmivtp::metrics
