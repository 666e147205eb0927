#pragma once

#include <vector>

#include "cmivtp/model/model_config.hpp"
#include "cmivtp/model/params.hpp"
#include "cmivtp/numerics/rng.hpp"

namespace cmivtp::model {

struct UavdParams {
  Tensor modes;      // [K x d] mode embeddings
  Linear mu;         // 2d -> J
  Linear logvar;     // 2d -> J
  Linear dec1;       // (d + J + d) -> 4d
  Linear dec2;       // 4d -> T_fut * d
  Linear head_ais;   // d -> 2
  Linear head_cctv;  // d -> 2
  std::size_t d = 0;
  std::size_t latent = 0;
  std::size_t t_fut = 0;

  static UavdParams create(ParamStore& store, const ModelConfig& cfg);
  std::size_t mode_count() const { return modes.dim(0); }
};

inline constexpr double kLogvarMin = -10.0;
inline constexpr double kLogvarMax = 10.0;

/// Test hook for the reparameterization noise.
struct LatentNoise {
  bool zero = false;                        // eps = 0
  const std::vector<double>* fixed = nullptr;  // eps = *fixed
};

struct LatentSample {
  Tensor z, mu, logvar;  // each [J]; logvar is already clamped
};

Tensor mode_embedding(const UavdParams& p, std::size_t k);

/// z = mu + eps * exp(0.5 * logvar) with eps ~ N(0, I) drawn from rng
/// (J normals, in order) unless `noise` overrides it.
LatentSample sample_latent(const Tensor& f_enc, std::size_t k, num::Rng& rng, const UavdParams& p,
                           const LatentNoise& noise = {});

struct DecodedMode {
  Tensor ais;       // [T_fut x 2]
  Tensor cctv;      // [T_fut x 2]
  Tensor features;  // [T_fut x d], pre-head decoder features
};

DecodedMode decode(const Tensor& f_enc, const Tensor& z, const Tensor& e_k, const UavdParams& p);

struct ModePrediction {
  DecodedMode decoded;
  LatentSample latent;
};

/// Modes k = 0..K-1 in order; each consumes J normals from rng.
std::vector<ModePrediction> predict_modes(const Tensor& f_enc, std::size_t k_modes, num::Rng& rng,
                                          const UavdParams& p, const LatentNoise& noise = {});

}  // namespace cmivtp::model
