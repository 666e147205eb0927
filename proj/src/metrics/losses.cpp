#include "cmivtp/metrics/losses.hpp"

#include "cmivtp/error.hpp"
#include "cmivtp/numerics/gradcheck.hpp"
#include "cmivtp/numerics/ops.hpp"

namespace cmivtp::metrics {

using namespace num;

RecLoss rec_loss(const std::vector<Tensor>& ais_modes, const std::vector<Tensor>& cctv_modes, const Tensor& gt_ais,
                 const Tensor& gt_cctv) {
  if (ais_modes.empty() || ais_modes.size() != cctv_modes.size()) {
    throw DimensionError("rec_loss: need the same positive number of AIS and CCTV modes");
  }
  RecLoss r;
  std::vector<Tensor> losses;
  for (std::size_t k = 0; k < ais_modes.size(); ++k) {
    if (ais_modes[k].shape() != gt_ais.shape() || cctv_modes[k].shape() != gt_cctv.shape()) {
      throw DimensionError("rec_loss: mode " + std::to_string(k) + " prediction " + shape_str(ais_modes[k].shape()) +
                           " does not match ground truth " + shape_str(gt_ais.shape()));
    }
    Tensor l = add(mean(row_norms(sub(ais_modes[k], gt_ais))), mean(row_norms(sub(cctv_modes[k], gt_cctv))));
    r.per_mode.push_back(l.item());
    losses.push_back(l);
  }
  for (std::size_t k = 1; k < losses.size(); ++k)
    if (r.per_mode[k] < r.per_mode[r.winner]) r.winner = k;
  num::BranchTrace::note(r.winner);
  r.loss = losses[r.winner];
  return r;
}

Tensor kl_loss(const Tensor& mu, const Tensor& logvar) {
  if (mu.shape() != logvar.shape()) throw DimensionError("kl_loss: mu and logvar shapes differ");
  // 1 + logvar - exp(logvar) written with expm1 to avoid cancellation near 0.
  Tensor inner = sub(sub(logvar, num::expm1(logvar)), mul(mu, mu));
  return scale(sum(inner), -0.5);
}

LossBreakdown sample_loss(const model::ModelOutput& out, const data::VesselSample& s, const model::ModelConfig& cfg,
                          double gamma_kl) {
  if (out.modes.empty()) throw DimensionError("sample_loss: no modes");
  std::vector<Tensor> ais, cctv;
  std::vector<Tensor> kls;
  for (const auto& m : out.modes) {
    ais.push_back(m.ais_offset);
    cctv.push_back(m.cctv_offset);
    kls.push_back(kl_loss(m.latent.mu, m.latent.logvar));
  }
  // Every mode shares the same reference points.
  auto shifted = [](data::Track t, data::Point2 ref) {
    for (auto& p : t) p = {p.x - ref.x, p.y - ref.y};
    return model::track_tensor(t);
  };
  const auto& m0 = out.modes.front();
  const Tensor gt_ais = shifted(s.fut_ais, m0.ais_ref);
  const Tensor gt_cctv =
      shifted(model::normalize_pixels(s.fut_cctv, cfg.frame_width, cfg.frame_height), m0.cctv_ref);
  const RecLoss rec = rec_loss(ais, cctv, gt_ais, gt_cctv);
  Tensor kl = kls[0];
  for (std::size_t k = 1; k < kls.size(); ++k) kl = add(kl, kls[k]);
  kl = scale(kl, 1.0 / static_cast<double>(kls.size()));

  LossBreakdown b;
  b.total = add(rec.loss, scale(kl, gamma_kl));
  b.total_value = b.total.item();
  b.rec = rec.loss.item();
  b.kl = kl.item();
  b.winner = rec.winner;
  return b;
}

}  // namespace cmivtp::metrics
