#include "cmivtp/data/generator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <numbers>
#include <numeric>

#include "cmivtp/numerics/rng.hpp"

namespace cmivtp::data {

namespace {

using num::Rng;

CenterlineKind centerline_from_string(const std::string& s) {
  if (s == "straight") return CenterlineKind::straight;
  if (s == "sinusoid") return CenterlineKind::sinusoid;
  if (s == "arc") return CenterlineKind::arc;
  throw ConfigError("unknown centerline '" + s + "' (straight|sinusoid|arc)");
}

Point2 centerline_at(const WaterwayConfig& cfg, double s) {
  switch (cfg.centerline) {
    case CenterlineKind::straight:
      return {0.05 + 0.9 * s, 0.5};
    case CenterlineKind::sinusoid: {
      const double x = 0.05 + 0.9 * s;
      return {x, 0.5 + cfg.amplitude * std::sin(2.0 * std::numbers::pi * (x - 0.05) / cfg.period)};
    }
    case CenterlineKind::arc: {
      const double r = cfg.arc_radius;
      const double alpha = std::asin(0.45 / r);
      const double theta = std::numbers::pi / 2 + alpha - 2.0 * alpha * s;
      const double cy = 0.7 - r;
      return {0.5 + r * std::cos(theta), cy + r * std::sin(theta)};
    }
  }
  return {};
}

// Arc-length parameterized centerline.
class Centerline {
 public:
  Centerline(const WaterwayConfig& cfg, std::size_t samples) {
    for (std::size_t i = 0; i < samples; ++i) {
      pts_.push_back(centerline_at(cfg, static_cast<double>(i) / static_cast<double>(samples - 1)));
    }
    cum_.push_back(0.0);
    for (std::size_t i = 1; i < pts_.size(); ++i) {
      cum_.push_back(cum_.back() + std::hypot(pts_[i].x - pts_[i - 1].x, pts_[i].y - pts_[i - 1].y));
    }
  }

  double length() const { return cum_.back(); }
  const Track& points() const { return pts_; }

  // Position at arc length s shifted by `lateral` along the left normal.
  Point2 at(double s, double lateral) const {
    s = std::clamp(s, 0.0, length());
    const auto ub = std::upper_bound(cum_.begin(), cum_.end(), s) - cum_.begin();
    const std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(std::max<std::ptrdiff_t>(ub - 1, 0)),
                                                cum_.size() - 2);
    const double seg = cum_[i + 1] - cum_[i];
    const double f = seg > 0 ? (s - cum_[i]) / seg : 0.0;
    const Point2& a = pts_[i];
    const Point2& b = pts_[i + 1];
    const double tx = (b.x - a.x) / seg, ty = (b.y - a.y) / seg;
    return {a.x + f * (b.x - a.x) - ty * lateral, a.y + f * (b.y - a.y) + tx * lateral};
  }

  double distance(const Point2& p) const {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < pts_.size(); ++i) {
      const Point2& a = pts_[i];
      const Point2& b = pts_[i + 1];
      const double dx = b.x - a.x, dy = b.y - a.y;
      const double len2 = dx * dx + dy * dy;
      double u = len2 > 0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
      u = std::clamp(u, 0.0, 1.0);
      best = std::min(best, std::hypot(p.x - (a.x + u * dx), p.y - (a.y + u * dy)));
    }
    return best;
  }

 private:
  Track pts_;
  std::vector<double> cum_;
};

struct Motion {
  Track truth;
  bool maneuvering = false;
};

Motion simulate_vessel(const WaterwayConfig& cfg, const Centerline& line, Rng& rng) {
  const std::size_t n = cfg.t_obs + cfg.t_fut;
  const bool forward = !cfg.two_way || rng.bernoulli(0.5);
  const double speed = rng.uniform(cfg.speed_min, cfg.speed_max);
  const double lateral0 = rng.uniform(-0.5, 0.5) * cfg.half_width;
  const double span = speed * static_cast<double>(n - 1);
  const double room = std::max(0.0, line.length() - span);
  const double s_start = rng.uniform(0.0, room);
  // Maneuver parameters are always drawn so the stream layout is fixed.
  const bool maneuver = rng.bernoulli(cfg.maneuver_prob);
  const double lo = std::max(0.0, static_cast<double>(cfg.t_obs) - 3.0);
  const double hi = static_cast<double>(cfg.t_obs) + static_cast<double>(cfg.t_fut) / 3.0;
  const double onset = std::floor(rng.uniform(lo, hi + 1.0));
  const double duration = std::floor(rng.uniform(8.0, 15.0));
  const double side = rng.bernoulli(0.5) ? 1.0 : -1.0;
  const double swing = side * cfg.maneuver_amplitude * cfg.half_width;

  Motion m;
  m.maneuvering = maneuver;
  for (std::size_t t = 0; t < n; ++t) {
    const double tt = static_cast<double>(t);
    const double travelled = speed * tt;
    const double s = forward ? s_start + travelled : s_start + span - travelled;
    double lateral = lateral0;
    if (maneuver && tt >= onset && tt <= onset + duration) {
      lateral += swing * std::sin(std::numbers::pi * (tt - onset) / duration);
    }
    // The left normal flips with the heading; keep the lane on the same side.
    m.truth.push_back(line.at(s, forward ? lateral : -lateral));
  }
  return m;
}

std::vector<float> waterway_mask(const WaterwayConfig& cfg, const Centerline& line, const Homography& inv) {
  const std::size_t rs = cfg.raster_size;
  std::vector<float> mask(rs * rs, 0.0f);
  for (std::size_t r = 0; r < rs; ++r) {
    for (std::size_t c = 0; c < rs; ++c) {
      const Point2 px{(static_cast<double>(c) + 0.5) * cfg.frame_width / static_cast<double>(rs),
                      (static_cast<double>(r) + 0.5) * cfg.frame_height / static_cast<double>(rs)};
      const Point2 geo = inv.apply(px);
      if (line.distance(geo) <= cfg.half_width) mask[r * rs + c] = 1.0f;
    }
  }
  return mask;
}

Point2 pixel_to_raster(const WaterwayConfig& cfg, const Point2& px) {
  const double rs = static_cast<double>(cfg.raster_size);
  return {px.x * rs / cfg.frame_width, px.y * rs / cfg.frame_height};
}

void splat(std::vector<float>& plane, std::size_t rs, const Point2& p) {
  const long cx = static_cast<long>(std::floor(p.x));
  const long cy = static_cast<long>(std::floor(p.y));
  for (long dy = -1; dy <= 1; ++dy) {
    for (long dx = -1; dx <= 1; ++dx) {
      const long x = cx + dx, y = cy + dy;
      if (x < 0 || y < 0 || x >= static_cast<long>(rs) || y >= static_cast<long>(rs)) continue;
      plane[static_cast<std::size_t>(y) * rs + static_cast<std::size_t>(x)] = 1.0f;
    }
  }
}

constexpr double kBoxHalf = 2.5;  // raster pixels

}  // namespace

WaterwayConfig WaterwayConfig::from_kv(const KeyValues& kv) {
  WaterwayConfig c;
  c.centerline = centerline_from_string(kv.get_string("centerline", "sinusoid"));
  c.amplitude = kv.get_double("amplitude", c.amplitude);
  c.period = kv.get_double("period", c.period);
  c.arc_radius = kv.get_double("arc_radius", c.arc_radius);
  c.half_width = kv.get_double("half_width", c.half_width);
  c.vessel_count = static_cast<std::size_t>(kv.get_int("vessel_count", static_cast<long long>(c.vessel_count)));
  c.clips = static_cast<std::size_t>(kv.get_int("clips", static_cast<long long>(c.clips)));
  c.mixed_density = kv.get_bool("mixed_density", c.mixed_density);
  c.density = density_from_string(kv.get_string("density", to_string(c.density)));
  c.speed_min = kv.get_double("speed_min", c.speed_min);
  c.speed_max = kv.get_double("speed_max", c.speed_max);
  c.two_way = kv.get_bool("two_way", c.two_way);
  c.maneuver_prob = kv.get_double("maneuver_prob", c.maneuver_prob);
  c.maneuver_amplitude = kv.get_double("maneuver_amplitude", c.maneuver_amplitude);
  if (kv.has("homography")) {
    std::string s = kv.get_string("homography", "");
    std::replace(s.begin(), s.end(), ',', ' ');
    std::istringstream is(s);
    for (auto& v : c.homography.m) {
      if (!(is >> v)) throw ConfigError("homography needs 9 comma-separated numbers");
    }
  }
  c.ais_noise = kv.get_double("ais_noise", c.ais_noise);
  c.pixel_noise = kv.get_double("pixel_noise", c.pixel_noise);
  c.t_obs = static_cast<std::size_t>(kv.get_int("t_obs", static_cast<long long>(c.t_obs)));
  c.t_fut = static_cast<std::size_t>(kv.get_int("t_fut", static_cast<long long>(c.t_fut)));
  c.raster_size = static_cast<std::size_t>(kv.get_int("raster_size", static_cast<long long>(c.raster_size)));
  c.frame_width = kv.get_double("frame_width", c.frame_width);
  c.frame_height = kv.get_double("frame_height", c.frame_height);
  c.validate();
  return c;
}

void WaterwayConfig::validate() const {
  if (!(half_width > 0)) throw ConfigError("half_width must be > 0");
  if (!homography.invertible()) throw ConfigError("homography must be invertible (|det| > 1e-9)");
  if (vessel_count == 0 || clips == 0) throw ConfigError("vessel_count and clips must be positive");
  if (!(speed_min > 0) || speed_max < speed_min) throw ConfigError("need 0 < speed_min <= speed_max");
  if (maneuver_prob < 0 || maneuver_prob > 1) throw ConfigError("maneuver_prob must be in [0, 1]");
  if (t_obs < 1 || t_fut < 1) throw ConfigError("t_obs and t_fut must be positive");
  if (raster_size < 8) throw ConfigError("raster_size must be >= 8");
  if (centerline == CenterlineKind::arc && arc_radius < 0.45) throw ConfigError("arc_radius must be >= 0.45");
  if (ais_noise < 0 || pixel_noise < 0) throw ConfigError("noise levels must be >= 0");
}

Track centerline_polyline(const WaterwayConfig& cfg, std::size_t samples) {
  return Centerline(cfg, samples).points();
}

std::vector<GeneratedVessel> generate_scenario_detailed(const WaterwayConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const Centerline line(cfg, 2001);
  const Centerline coarse(cfg, 400);
  const Homography inv = cfg.homography.inverse();
  const std::vector<float> mask = waterway_mask(cfg, coarse, inv);
  const std::size_t rs = cfg.raster_size;
  const Rng root(seed);

  std::vector<GeneratedVessel> out;
  for (std::size_t clip = 0; clip < cfg.clips; ++clip) {
    Rng clip_rng = root.fork(clip);
    std::size_t count = cfg.vessel_count;
    Density density = cfg.density;
    if (cfg.mixed_density) {
      const std::size_t tier = clip % 3;
      density = static_cast<Density>(tier);
      count = tier == 0 ? std::max<std::size_t>(2, cfg.vessel_count / 2)
                        : (tier == 1 ? cfg.vessel_count : 2 * cfg.vessel_count);
    }

    std::vector<Motion> motions;
    std::vector<Track> ais, cctv;
    for (std::size_t v = 0; v < count; ++v) {
      Rng motion_rng = clip_rng.fork(2 * v);
      Rng noise_rng = clip_rng.fork(2 * v + 1);
      motions.push_back(simulate_vessel(cfg, line, motion_rng));
      Track a, c;
      for (const auto& p : motions.back().truth) {
        a.push_back({p.x + cfg.ais_noise * noise_rng.normal(), p.y + cfg.ais_noise * noise_rng.normal()});
        const Point2 px = cfg.homography.apply(p);
        Point2 q{px.x + cfg.pixel_noise * noise_rng.normal(), px.y + cfg.pixel_noise * noise_rng.normal()};
        q.x = std::clamp(q.x, 0.0, std::nextafter(cfg.frame_width, 0.0));
        q.y = std::clamp(q.y, 0.0, std::nextafter(cfg.frame_height, 0.0));
        c.push_back(q);
      }
      ais.push_back(std::move(a));
      cctv.push_back(std::move(c));
    }

    // Occupancy splats of every vessel at every observed step.
    std::vector<std::vector<std::vector<float>>> splats(count);
    for (std::size_t v = 0; v < count; ++v) {
      for (std::size_t t = 0; t < cfg.t_obs; ++t) {
        std::vector<float> plane(rs * rs, 0.0f);
        splat(plane, rs, pixel_to_raster(cfg, cfg.homography.apply(motions[v].truth[t])));
        splats[v].push_back(std::move(plane));
      }
    }

    for (std::size_t v = 0; v < count; ++v) {
      GeneratedVessel g;
      g.maneuvering = motions[v].maneuvering;
      g.true_track = motions[v].truth;
      VesselSample& s = g.sample;
      s.vessel_id = "c" + std::to_string(clip) + "-v" + std::to_string(v);
      s.density = density;
      auto [obs_a, fut_a] = split_window(ais[v], cfg.t_obs, cfg.t_fut);
      auto [obs_c, fut_c] = split_window(cctv[v], cfg.t_obs, cfg.t_fut);
      s.obs_ais.points = std::move(obs_a);
      s.obs_ais.available.assign(cfg.t_obs, true);
      s.fut_ais = std::move(fut_a);
      s.obs_cctv.points = std::move(obs_c);
      s.fut_cctv = std::move(fut_c);
      for (std::size_t t = 0; t < cfg.t_obs; ++t) {
        SceneFrame f;
        f.height = rs;
        f.width = rs;
        f.raster.assign(kSceneChannels * rs * rs, 0.0f);
        std::copy(mask.begin(), mask.end(), f.raster.begin());
        float* occ = f.raster.data() + rs * rs;
        for (std::size_t o = 0; o < count; ++o) {
          if (o == v) continue;
          const auto& pl = splats[o][t];
          for (std::size_t i = 0; i < rs * rs; ++i) occ[i] = std::max(occ[i], pl[i]);
        }
        const Point2 c = pixel_to_raster(cfg, s.obs_cctv.points[t]);
        const double srs = static_cast<double>(rs);
        f.bbox = {std::clamp(c.x - kBoxHalf, 0.0, srs - 2 * kBoxHalf), std::clamp(c.y - kBoxHalf, 0.0, srs - 2 * kBoxHalf),
                  0.0, 0.0};
        f.bbox.x_max = f.bbox.x_min + 2 * kBoxHalf;
        f.bbox.y_max = f.bbox.y_min + 2 * kBoxHalf;
        float* tgt = f.raster.data() + 2 * rs * rs;
        for (std::size_t r = 0; r < rs; ++r) {
          const double cy = static_cast<double>(r) + 0.5;
          if (cy < f.bbox.y_min || cy > f.bbox.y_max) continue;
          for (std::size_t col = 0; col < rs; ++col) {
            const double cx = static_cast<double>(col) + 0.5;
            if (cx >= f.bbox.x_min && cx <= f.bbox.x_max) tgt[r * rs + col] = 1.0f;
          }
        }
        s.scenes.push_back(std::move(f));
      }
      out.push_back(std::move(g));
    }
  }
  return out;
}

std::vector<VesselSample> generate_scenario(const WaterwayConfig& cfg, std::uint64_t seed) {
  std::vector<VesselSample> out;
  for (auto& g : generate_scenario_detailed(cfg, seed)) out.push_back(std::move(g.sample));
  return out;
}

std::vector<VesselSample> apply_dark_vessels(std::vector<VesselSample> samples, double rho,
                                             std::uint64_t seed) {
  if (rho < 0.0 || rho > 1.0) throw ConfigError("dark-vessel fraction must be in [0, 1]");
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return samples[a].vessel_id < samples[b].vessel_id;
  });
  num::Rng rng(seed);
  rng.shuffle(order);
  const auto n_dark = static_cast<std::size_t>(std::floor(rho * static_cast<double>(samples.size()) + 1e-9));
  for (std::size_t i = 0; i < n_dark; ++i) {
    auto& s = samples[order[i]];
    s.is_dark = true;
    s.obs_ais.available.assign(s.obs_ais.points.size(), false);
  }
  return samples;
}

}  // namespace cmivtp::data
