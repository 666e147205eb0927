#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "cmivtp/metrics/metrics.hpp"
#include "cmivtp/model/cmivtp_model.hpp"

namespace cmivtp::harness {

/// One candidate future per mode: AIS in planar units, CCTV in pixels.
struct ModeTracks {
  data::Track ais;
  data::Track cctv;
};

using Predictor = std::function<std::vector<ModeTracks>(const data::VesselSample&, num::Rng&)>;

Predictor model_predictor(const model::CmivtpModel& m, const model::TrajectoryBank* bank);

struct EvalConfig {
  std::vector<std::size_t> horizons{12, 24, 36};
  std::vector<double> rhos{0.0, 0.1, 0.2, 0.3};
  std::vector<data::Density> densities{data::Density::low, data::Density::medium, data::Density::high};
  std::size_t seeds = 10;
  std::uint64_t base_seed = 0;
  std::string horizon_mode = "truncate";  // or "per_horizon"
};

/// Metric columns, in report order. "min" metrics are best-of-K; the others
/// use mode 0 alone. CCTV values are in pixels.
const std::vector<std::string>& metric_names();

struct CellReport {
  std::size_t horizon = 0;
  data::Density density = data::Density::medium;
  double rho = 0.0;
  std::size_t samples = 0;
  std::size_t runs = 0;
  bool absent = false;  // no samples of this density
  std::map<std::string, metrics::MeanStd> values;
};

struct ExperimentReport {
  std::vector<CellReport> cells;  // sorted by (horizon, density, rho)
  std::string horizon_mode;
  std::uint64_t config_hash = 0;
  double runtime_seconds = 0.0;  // informational; never written to the CSV
};

/// Per cell and seed: apply_dark_vessels(cell samples, rho, seed key), predict
/// every sample, average the metrics; then mean and sample std over seeds.
/// Every (cell, seed) owns an rng stream keyed by (base_seed, cell, seed).
ExperimentReport evaluate(const std::vector<data::VesselSample>& samples, const Predictor& predict,
                          const EvalConfig& cfg, std::uint64_t config_hash = 0);

void write_report_csv(const std::filesystem::path& path, const ExperimentReport& r);

/// Concatenates cells of reports made at different horizons, keeping order.
ExperimentReport merge_reports(const std::vector<ExperimentReport>& parts);

struct LatentRecord {
  std::string vessel_id;
  std::size_t mode = 0;
  bool is_dark = false;
  std::vector<double> mu;
};

/// Latent means of every (sample, mode); deterministic, no noise drawn.
std::vector<LatentRecord> collect_latents(const model::CmivtpModel& m, const std::vector<data::VesselSample>& samples);

struct PcaResult;
void write_latent_csv(const std::filesystem::path& path, const std::vector<LatentRecord>& records,
                      const PcaResult& pca);

}  // namespace cmivtp::harness
