#pragma once

#include <vector>

#include "cmivtp/model/cmivtp_model.hpp"
#include "cmivtp/numerics/tensor.hpp"

namespace cmivtp::metrics {

using num::Tensor;

inline constexpr double kGammaKl = 0.01;

struct RecLoss {
  Tensor loss;                    // the winning mode's error, scalar
  std::size_t winner = 0;
  std::vector<double> per_mode;   // error of every mode
};

/// Per mode: mean_t(|ais_t - gt_ais_t| + |cctv_t - gt_cctv_t|). Joint min over
/// modes (one winner for both heads), lowest index on ties. Only the winner
/// is on the returned graph.
RecLoss rec_loss(const std::vector<Tensor>& ais_modes, const std::vector<Tensor>& cctv_modes, const Tensor& gt_ais,
                 const Tensor& gt_cctv);

/// -0.5 * sum_j (1 + logvar - mu^2 - exp(logvar)).
Tensor kl_loss(const Tensor& mu, const Tensor& logvar);

struct LossBreakdown {
  Tensor total;  // rec + gamma_kl * kl, on the graph
  double total_value = 0.0;
  double rec = 0.0;
  double kl = 0.0;  // averaged over modes
  std::size_t winner = 0;
};

/// Loss of one sample. CCTV ground truth is in pixels and is normalized by
/// the model's frame size to match the CCTV head.
LossBreakdown sample_loss(const model::ModelOutput& out, const data::VesselSample& s, const model::ModelConfig& cfg,
                          double gamma_kl = kGammaKl);

}  // namespace cmivtp::metrics
