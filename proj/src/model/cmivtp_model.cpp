#include "cmivtp/model/cmivtp_model.hpp"

#include <Eigen/Dense>

#include "cmivtp/error.hpp"

namespace cmivtp::model {

using namespace num;
using data::Point2;
using data::Track;

Tensor track_tensor(const Track& t) {
  std::vector<double> v;
  v.reserve(2 * t.size());
  for (const auto& p : t) {
    v.push_back(p.x);
    v.push_back(p.y);
  }
  return Tensor::from({t.size(), 2}, std::move(v));
}

Track tensor_track(const Tensor& t) {
  Track out;
  auto d = t.data();
  for (std::size_t i = 0; i < t.dim(0); ++i) out.push_back({d[2 * i], d[2 * i + 1]});
  return out;
}

Track normalize_pixels(const Track& px, double width, double height) {
  Track out;
  for (const auto& p : px) out.push_back({p.x / width, p.y / height});
  return out;
}

Track denormalize_pixels(const Track& norm, double width, double height) {
  Track out;
  for (const auto& p : norm) out.push_back({p.x * width, p.y * height});
  return out;
}

CmivtpModel::CmivtpModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg), store_(seed) {
  cfg_.validate();
  vstae = VstaeParams::create(store_, cfg_);
  cmie = CmieParams::create(store_, cfg_);
  uavd = UavdParams::create(store_, cfg_);
  refine = RefinementParams::create(store_, cfg_);
  anchor_c2a = store_.linear("anchor.c2a", 2, 2);
  anchor_a2c = store_.linear("anchor.a2c", 2, 2);
  anchor_embed = store_.linear("anchor.embed", 4, cfg_.d);
}

namespace {

Tensor relative(const Track& pts, Point2 anchor, double scale_by) {
  Track rel;
  for (const auto& p : pts) rel.push_back({(p.x - anchor.x) * scale_by, (p.y - anchor.y) * scale_by});
  return track_tensor(rel);
}

Tensor point(Point2 p) { return Tensor::from({2}, {p.x, p.y}); }

}  // namespace

ModelOutput CmivtpModel::forward(const data::VesselSample& s, Rng& rng, const TrajectoryBank* bank,
                                 const LatentNoise& noise) const {
  const std::size_t t_obs = cfg_.t_obs;
  if (s.obs_ais.points.size() != t_obs || s.obs_ais.available.size() != t_obs || s.obs_cctv.points.size() != t_obs) {
    throw DimensionError("sample " + s.vessel_id + ": observed window does not match T_obs=" + std::to_string(t_obs));
  }
  const double cs = cfg_.coord_scale;

  std::optional<Point2> last_ais;
  for (std::size_t t = 0; t < t_obs; ++t)
    if (s.obs_ais.available[t]) last_ais = s.obs_ais.points[t];
  const Track cctv_norm = normalize_pixels(s.obs_cctv.points, cfg_.frame_width, cfg_.frame_height);

  Tensor cctv_anchor, ais_anchor;
  if (cfg_.use_cctv) cctv_anchor = point(cctv_norm.back());
  if (last_ais) {
    ais_anchor = point(*last_ais);
  } else {
    ais_anchor = anchor_c2a(cfg_.use_cctv ? cctv_anchor : Tensor::zeros({2}));
  }
  if (!cctv_anchor.defined()) cctv_anchor = anchor_a2c(last_ais ? ais_anchor : Tensor::zeros({2}));

  const Tensor ais_in = last_ais ? relative(s.obs_ais.points, *last_ais, cs) : Tensor::zeros({t_obs, 2});
  Tensor cctv_in, scene_in;
  if (cfg_.use_cctv) cctv_in = relative(cctv_norm, cctv_norm.back(), cs);
  if (cfg_.use_scene) {
    if (s.scenes.size() != t_obs) throw DimensionError("sample " + s.vessel_id + ": expected T_obs scene frames");
    scene_in = vstae_forward(s.scenes, vstae);
  }

  FusedFeatures fused = encode_and_fuse(ais_in, s.obs_ais.available, cctv_in, scene_in, cmie);
  const Tensor anchors = add_scalar(concat({ais_anchor, cctv_anchor}, 0), -0.5);
  ModelOutput out;
  out.f_enc = add(fused.f_enc, anchor_embed(anchors));

  const bool use_bank = cfg_.use_bank && bank != nullptr && !bank->entries.empty() && s.obs_ais.fully_available();
  Tensor prior;
  if (use_bank) {
    if (bank->t_obs != t_obs || bank->t_fut != cfg_.t_fut) {
      throw ConfigError("bank windows (" + std::to_string(bank->t_obs) + ", " + std::to_string(bank->t_fut) +
                        ") do not match the model (" + std::to_string(t_obs) + ", " + std::to_string(cfg_.t_fut) + ")");
    }
    const SearchResult sr = search(*bank, s.obs_ais.points);
    out.retrieval = sr;
    prior = relative(align_prior(bank->entries[sr.index], s.obs_ais.points), *last_ais, cs);
  }

  const Point2 ais_ref{ais_anchor.data()[0], ais_anchor.data()[1]};
  const Point2 cctv_ref{cctv_anchor.data()[0], cctv_anchor.data()[1]};
  const Tensor ais_shift = sub(ais_anchor, point(ais_ref));
  const Tensor cctv_shift = sub(cctv_anchor, point(cctv_ref));
  for (auto& m : predict_modes(out.f_enc, cfg_.modes, rng, uavd, noise)) {
    Tensor ais_rel = m.decoded.ais;
    if (use_bank) ais_rel = refine_and_fuse(ais_rel, prior, m.decoded.features, out.f_enc, refine).output;
    ModeOutput mo;
    mo.ais_ref = ais_ref;
    mo.cctv_ref = cctv_ref;
    mo.ais_offset = add_bias(scale(ais_rel, 1.0 / cs), ais_shift);
    mo.cctv_offset = add_bias(scale(m.decoded.cctv, 1.0 / cs), cctv_shift);
    mo.ais = add_bias(mo.ais_offset, point(ais_ref));
    mo.cctv = add_bias(mo.cctv_offset, point(cctv_ref));
    mo.latent = m.latent;
    out.modes.push_back(std::move(mo));
  }
  return out;
}

namespace {

// y ~ x * w + b over the rows of x and y; w is [2 x 2] stored row-major.
void fit_affine(const Eigen::MatrixX2d& x, const Eigen::MatrixX2d& y, Linear& lin) {
  Eigen::MatrixXd a(x.rows(), 3);
  a << x, Eigen::VectorXd::Ones(x.rows());
  const Eigen::MatrixXd sol = a.completeOrthogonalDecomposition().solve(y);
  auto w = lin.w.mutable_data();
  auto b = lin.b.mutable_data();
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) w[2 * i + j] = sol(i, j);
  b[0] = sol(2, 0);
  b[1] = sol(2, 1);
}

}  // namespace

std::size_t calibrate_anchors(CmivtpModel& m, const std::vector<data::VesselSample>& samples) {
  const auto& cfg = m.config();
  std::vector<std::pair<Point2, Point2>> pairs;
  for (const auto& s : samples) {
    const std::size_t n = std::min(s.obs_ais.points.size(), s.obs_cctv.points.size());
    for (std::size_t t = 0; t < n; ++t) {
      if (!s.obs_ais.available[t]) continue;
      const Point2 c = s.obs_cctv.points[t];
      pairs.push_back({s.obs_ais.points[t], {c.x / cfg.frame_width, c.y / cfg.frame_height}});
    }
  }
  if (pairs.size() < 3) return pairs.size();
  Eigen::MatrixX2d ais(pairs.size(), 2), cctv(pairs.size(), 2);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    ais(r, 0) = pairs[i].first.x;
    ais(r, 1) = pairs[i].first.y;
    cctv(r, 0) = pairs[i].second.x;
    cctv(r, 1) = pairs[i].second.y;
  }
  if (cfg.use_cctv) {
    fit_affine(cctv, ais, m.anchor_c2a);
  } else {
    // Only the bias is ever seen: c2a(0).
    auto b = m.anchor_c2a.b.mutable_data();
    b[0] = ais.col(0).mean();
    b[1] = ais.col(1).mean();
  }
  fit_affine(ais, cctv, m.anchor_a2c);
  return pairs.size();
}

}  // namespace cmivtp::model
