#pragma once

#include <array>
#include <vector>

#include "cmivtp/data/types.hpp"
#include "cmivtp/model/model_config.hpp"
#include "cmivtp/model/params.hpp"

namespace cmivtp::model {

struct ConvLayer {
  Tensor w;  // [C_out x C_in x 3 x 3]
  Tensor b;  // [C_out]
};

/// Visual scene encoder parameters: conv stem, RoI fusion, ConvLSTM context.
struct VstaeParams {
  std::array<ConvLayer, 3> stem;  // 3->8 (s2), 8->C_f (s2), C_f->C_f (s1)
  Linear tar;                     // C_f*roi*roi -> d
  Linear glo;                     // C_f -> d/2
  Linear bbox1, bbox2;            // 4 -> 64 -> 64
  Linear fus1, fus2;              // (d + d/2 + 64) -> d -> d
  std::array<ConvLayer, 2> lstm;  // gates i, f, o, g stacked on the output axis
  Linear temp;                    // C_f -> d
  Linear out1, out2;              // 2d -> d -> d
  std::size_t c_f = 0;
  std::size_t roi = 7;
  double phi = 0.1;

  static VstaeParams create(ParamStore& store, const ModelConfig& cfg);
};

inline constexpr std::size_t kStemStride = 4;

/// Scene raster [3 x H x W] as a tensor.
Tensor scene_tensor(const data::SceneFrame& scene);

struct SpatialFeatures {
  Tensor fmap;   // [C_f x H/4 x W/4]
  Tensor f_roi;  // [d]
};

SpatialFeatures spatial_features(const data::SceneFrame& scene, const VstaeParams& p,
                                 num::RoiDiagnostics* diag = nullptr);

/// exp(phi * t) for t in {-(T-1), ..., 0}; index i corresponds to t = i - (T-1).
double temporal_weight(double phi, long t);

/// Two stacked ConvLSTM layers over the feature maps; each step's top hidden
/// state is pooled, projected by E_temp and scaled by its temporal weight.
std::vector<Tensor> temporal_context(const std::vector<Tensor>& fmaps, const VstaeParams& p);

/// [T_obs x d]: row t = MLP(f_roi_t ++ f_temp_t).
Tensor vstae_forward(const std::vector<data::SceneFrame>& scenes, const VstaeParams& p,
                     num::RoiDiagnostics* diag = nullptr);

}  // namespace cmivtp::model
