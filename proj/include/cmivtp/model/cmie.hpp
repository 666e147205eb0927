#pragma once

#include <vector>

#include "cmivtp/model/model_config.hpp"
#include "cmivtp/model/params.hpp"

namespace cmivtp::model {

struct AttentionParams {
  Linear q, k, v, o;
  std::size_t heads = 1;
};

/// Multi-head scaled dot-product attention of queries zq [T x d] over
/// zkv [T2 x d]. Per-head weight matrices [T x T2] are appended to
/// `weights` when given.
Tensor attention(const Tensor& zq, const Tensor& zkv, const AttentionParams& p,
                 std::vector<Tensor>* weights = nullptr);

struct CmitParams {
  AttentionParams sa, ca;
  Linear ff1, ff2;  // d -> 4d -> d
  Tensor ln_gain[3];
  Tensor ln_bias[3];
};

/// Z1 is the primary stream, Z2 the memory:
///   a = LN(Z1 + SA(Z1, Z1)); b = LN(a + CA(a, Z2)); out = LN(b + FFN(b)).
Tensor cmit_block(const Tensor& z1, const Tensor& z2, const CmitParams& p);

struct CmieParams {
  Linear g_ais;   // (x, y, available) -> d
  Linear g_cctv;  // (u, v) -> d
  Tensor mask_token;  // [d]
  CmitParams traj_stage;   // AIS attends to CCTV
  CmitParams scene_stage;  // fused trajectory attends to scene features
  std::size_t d = 0;

  static CmieParams create(ParamStore& store, const ModelConfig& cfg);
};

CmitParams create_cmit(ParamStore& store, const std::string& name, std::size_t d, std::size_t heads);

/// Sinusoidal position code [T x d].
Tensor positional_encoding(std::size_t t, std::size_t d);

/// Embeds the AIS track [T x 2]; rows with available[t] == false become the
/// mask token. Positional code added.
Tensor embed_ais(const Tensor& ais, const std::vector<bool>& available, const CmieParams& p);
Tensor embed_cctv(const Tensor& cctv, const CmieParams& p);

struct FusedFeatures {
  Tensor f_fus;  // [T_obs x d]
  Tensor f_enc;  // [d]
};

/// F_fus = CMIT(CMIT(F_A, F_C), F_V); an undefined cctv or scene input drops
/// that stage, and with no memory left the AIS stream attends to itself.
FusedFeatures encode_and_fuse(const Tensor& ais, const std::vector<bool>& available, const Tensor& cctv,
                              const Tensor& scene_features, const CmieParams& p);

}  // namespace cmivtp::model
