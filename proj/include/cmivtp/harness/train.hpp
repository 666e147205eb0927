#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "cmivtp/config.hpp"
#include "cmivtp/model/cmivtp_model.hpp"

namespace cmivtp::harness {

struct TrainConfig {
  double lr = 1e-4;
  std::size_t epochs = 100;
  std::size_t batch_size = 16;
  // Plateau scheduler: after `patience` epochs without a relative improvement
  // of at least `plateau_threshold`, lr *= lr_factor.
  double lr_factor = 0.5;
  std::size_t patience = 10;
  double plateau_threshold = 1e-4;
  std::uint64_t seed = 0;
  double gamma_kl = 0.01;
  std::size_t kmax = 16;
  // Probability that a training sample is shown with its observed AIS masked.
  double dark_rate = 0.0;
  std::size_t max_steps = 0;  // 0: no limit beyond epochs
  // Least-squares fit of the anchor maps before the first step.
  bool calibrate_anchors = true;

  static TrainConfig from_kv(const KeyValues& kv);
  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  std::size_t steps = 0;  // optimizer steps taken so far
  double total = 0.0;     // means over the epoch's samples
  double rec = 0.0;
  double kl = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> curve;
  std::vector<double> step_loss;  // mean total loss of every optimizer step
  std::size_t steps = 0;
  std::size_t lr_reductions = 0;
};

/// Returns a masked copy of the sample: every observed AIS step unavailable.
data::VesselSample make_dark(data::VesselSample s);

/// Shuffled mini-batches, one tape per sample, gradients averaged over the
/// batch, one Adam step per batch. Deterministic for (model seed, samples,
/// cfg). Throws NumericError naming the epoch, step and sample when a loss
/// becomes non-finite.
TrainResult train(model::CmivtpModel& m, const std::vector<data::VesselSample>& samples,
                  const model::TrajectoryBank* bank, const TrainConfig& cfg,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

/// Mean total loss over the samples with fixed per-sample noise; no tape.
double dataset_loss(const model::CmivtpModel& m, const std::vector<data::VesselSample>& samples,
                    const model::TrajectoryBank* bank, std::uint64_t seed, double gamma_kl = 0.01);

void write_curve_csv(const std::filesystem::path& path, const TrainResult& r);

/// Plateau scheduler on its own, for tests.
class PlateauScheduler {
 public:
  PlateauScheduler(double factor, std::size_t patience, double threshold)
      : factor_(factor), patience_(patience), threshold_(threshold) {}
  /// Returns the multiplier for the learning rate (1 or factor).
  double observe(double loss);

 private:
  double factor_;
  std::size_t patience_;
  double threshold_;
  double best_ = 0.0;
  bool has_best_ = false;
  std::size_t bad_ = 0;
};

}  // namespace cmivtp::harness
