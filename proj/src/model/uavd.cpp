#include "cmivtp/model/uavd.hpp"

#include <cmath>

#include "cmivtp/error.hpp"

namespace cmivtp::model {

using namespace num;

UavdParams UavdParams::create(ParamStore& store, const ModelConfig& cfg) {
  UavdParams p;
  p.d = cfg.d;
  p.latent = cfg.latent;
  p.t_fut = cfg.t_fut;
  p.modes = store.uniform("uavd.modes", {cfg.modes, cfg.d}, 1.0);
  // Variational heads start near the prior (small weights, KL close to 0).
  p.mu = store.linear("uavd.mu", 2 * cfg.d, cfg.latent, 0.1);
  p.logvar = store.linear("uavd.logvar", 2 * cfg.d, cfg.latent, 0.1);
  p.dec1 = store.linear("uavd.dec1", 2 * cfg.d + cfg.latent, 4 * cfg.d);
  p.dec2 = store.linear("uavd.dec2", 4 * cfg.d, cfg.t_fut * cfg.d);
  p.head_ais = store.linear("uavd.head_ais", cfg.d, 2);
  p.head_cctv = store.linear("uavd.head_cctv", cfg.d, 2);
  return p;
}

Tensor mode_embedding(const UavdParams& p, std::size_t k) {
  if (k >= p.mode_count()) {
    throw DimensionError("mode " + std::to_string(k) + " out of range for " + std::to_string(p.mode_count()) + " modes");
  }
  return reshape(slice(p.modes, 0, k, 1), {p.d});
}

LatentSample sample_latent(const Tensor& f_enc, std::size_t k, Rng& rng, const UavdParams& p,
                           const LatentNoise& noise) {
  const Tensor e_k = mode_embedding(p, k);
  const Tensor in = concat({f_enc, e_k}, 0);
  LatentSample s;
  s.mu = p.mu(in);
  s.logvar = clamp(p.logvar(in), kLogvarMin, kLogvarMax);
  std::vector<double> eps(p.latent, 0.0);
  if (noise.fixed) {
    if (noise.fixed->size() != p.latent) throw DimensionError("fixed latent noise has the wrong length");
    eps = *noise.fixed;
  } else if (!noise.zero) {
    for (auto& e : eps) e = rng.normal();
  }
  s.z = add(s.mu, mul(Tensor::from({p.latent}, std::move(eps)), num::exp(scale(s.logvar, 0.5))));
  return s;
}

DecodedMode decode(const Tensor& f_enc, const Tensor& z, const Tensor& e_k, const UavdParams& p) {
  Tensor hidden = relu(p.dec1(concat({f_enc, z, e_k}, 0)));
  DecodedMode m;
  m.features = reshape(p.dec2(hidden), {p.t_fut, p.d});
  m.ais = p.head_ais(m.features);
  m.cctv = p.head_cctv(m.features);
  return m;
}

std::vector<ModePrediction> predict_modes(const Tensor& f_enc, std::size_t k_modes, Rng& rng, const UavdParams& p,
                                          const LatentNoise& noise) {
  if (k_modes == 0) throw DimensionError("predict_modes: K must be >= 1");
  std::vector<ModePrediction> out;
  for (std::size_t k = 0; k < k_modes; ++k) {
    ModePrediction m;
    m.latent = sample_latent(f_enc, k, rng, p, noise);
    m.decoded = decode(f_enc, m.latent.z, mode_embedding(p, k), p);
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace cmivtp::model
