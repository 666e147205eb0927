#pragma once

#include <optional>
#include <vector>

#include "cmivtp/data/types.hpp"
#include "cmivtp/model/cmie.hpp"
#include "cmivtp/model/model_config.hpp"
#include "cmivtp/model/params.hpp"
#include "cmivtp/model/uavd.hpp"
#include "cmivtp/model/vgtb.hpp"
#include "cmivtp/model/vstae.hpp"

namespace cmivtp::model {

struct ModeOutput {
  Tensor ais;   // [T_fut x 2] planar units
  Tensor cctv;  // [T_fut x 2] pixels divided by the frame size
  // The same predictions minus a constant reference point (the anchor's
  // value). Losses use these so rounding scales with the residual, not with
  // the absolute position.
  Tensor ais_offset;
  Tensor cctv_offset;
  data::Point2 ais_ref;
  data::Point2 cctv_ref;
  LatentSample latent;
};

struct ModelOutput {
  std::vector<ModeOutput> modes;
  Tensor f_enc;
  std::optional<SearchResult> retrieval;  // set when the bank refined the AIS head
};

/// Full pipeline: scene encoder, cross-modal fusion, variational decoder and
/// bank refinement.
///
/// Trajectory inputs are expressed relative to each modality's last observed
/// point and multiplied by coord_scale; CCTV pixels are first divided by the
/// frame size. Heads predict displacements in the same frame. A dark vessel's
/// AIS anchor is a learned affine map of its last CCTV point (a learned
/// constant when CCTV is ablated), and both anchors are embedded and added
/// to the pooled encoding so the decoder knows where in the waterway it is.
class CmivtpModel {
 public:
  CmivtpModel(const ModelConfig& cfg, std::uint64_t seed);

  CmivtpModel(const CmivtpModel&) = delete;
  CmivtpModel& operator=(const CmivtpModel&) = delete;

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }

  /// Refinement runs only when use_bank is set, `bank` is given and the
  /// observed AIS is fully available.
  ModelOutput forward(const data::VesselSample& s, num::Rng& rng, const TrajectoryBank* bank,
                      const LatentNoise& noise = {}) const;

  VstaeParams vstae;
  CmieParams cmie;
  UavdParams uavd;
  RefinementParams refine;
  Linear anchor_c2a;  // CCTV anchor -> AIS anchor
  Linear anchor_a2c;  // AIS anchor -> CCTV anchor
  Linear anchor_embed;

 private:
  ModelConfig cfg_;
  ParamStore store_;
};

/// Least-squares fit of the two anchor maps from every observed step where
/// AIS is available: c2a maps normalized CCTV to AIS, a2c the reverse.
/// Returns the number of point pairs used; with fewer than 3 the maps are
/// left as they are.
std::size_t calibrate_anchors(CmivtpModel& m, const std::vector<data::VesselSample>& samples);

Tensor track_tensor(const data::Track& t);
data::Track tensor_track(const Tensor& t);
data::Track normalize_pixels(const data::Track& px, double width, double height);
data::Track denormalize_pixels(const data::Track& norm, double width, double height);

}  // namespace cmivtp::model
