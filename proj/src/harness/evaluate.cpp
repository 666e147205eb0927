#include "cmivtp/harness/evaluate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>

#include "cmivtp/data/generator.hpp"
#include "cmivtp/error.hpp"
#include "cmivtp/harness/pca.hpp"

namespace cmivtp::harness {

Predictor model_predictor(const model::CmivtpModel& m, const model::TrajectoryBank* bank) {
  return [&m, bank](const data::VesselSample& s, num::Rng& rng) {
    num::NoGradScope ng;
    const auto out = m.forward(s, rng, bank);
    std::vector<ModeTracks> modes;
    for (const auto& k : out.modes) {
      modes.push_back({model::tensor_track(k.ais),
                       model::denormalize_pixels(model::tensor_track(k.cctv), m.config().frame_width,
                                                 m.config().frame_height)});
    }
    return modes;
  };
}

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names{
      "min_ade_ais", "min_fde_ais", "ade_ais",     "fde_ais",     "min_ade_cctv", "min_fde_cctv",
      "ade_cctv",    "fde_cctv",    "cv_ade_ais",  "cv_fde_ais",  "diversity_ais"};
  return names;
}

namespace {

std::map<std::string, double> sample_metrics(const std::vector<ModeTracks>& modes, const data::VesselSample& s,
                                             std::size_t h) {
  if (modes.empty()) throw DimensionError("predictor returned no modes for " + s.vessel_id);
  const data::Track gt_ais = metrics::truncate(s.fut_ais, h), gt_cctv = metrics::truncate(s.fut_cctv, h);
  std::vector<data::Track> ais, cctv;
  for (const auto& m : modes) {
    if (m.ais.size() < h || m.cctv.size() < h) {
      throw ConfigError("prediction horizon " + std::to_string(m.ais.size()) + " is shorter than " + std::to_string(h));
    }
    ais.push_back(metrics::truncate(m.ais, h));
    cctv.push_back(metrics::truncate(m.cctv, h));
  }
  std::map<std::string, double> v;
  const auto min_a = metrics::min_ade_fde(ais, gt_ais), min_c = metrics::min_ade_fde(cctv, gt_cctv);
  const auto one_a = metrics::ade_fde(ais[0], gt_ais), one_c = metrics::ade_fde(cctv[0], gt_cctv);
  // The baseline sees the true observed AIS even when the vessel is dark.
  const auto cv = metrics::ade_fde(metrics::constant_velocity(s.obs_ais.points, h), gt_ais);
  v["min_ade_ais"] = min_a.ade;
  v["min_fde_ais"] = min_a.fde;
  v["ade_ais"] = one_a.ade;
  v["fde_ais"] = one_a.fde;
  v["min_ade_cctv"] = min_c.ade;
  v["min_fde_cctv"] = min_c.fde;
  v["ade_cctv"] = one_c.ade;
  v["fde_cctv"] = one_c.fde;
  v["cv_ade_ais"] = cv.ade;
  v["cv_fde_ais"] = cv.fde;
  v["diversity_ais"] = metrics::diversity(ais);
  return v;
}

}  // namespace

ExperimentReport evaluate(const std::vector<data::VesselSample>& samples, const Predictor& predict,
                          const EvalConfig& cfg, std::uint64_t config_hash) {
  if (cfg.seeds == 0) throw ConfigError("evaluate: seeds must be positive");
  if (cfg.horizons.empty() || cfg.rhos.empty() || cfg.densities.empty()) throw ConfigError("evaluate: empty grid");
  for (const auto& s : samples) {
    for (auto h : cfg.horizons) {
      if (h == 0 || s.t_fut() < h) {
        throw ConfigError("evaluate: horizon " + std::to_string(h) + " exceeds the future window of " + s.vessel_id);
      }
    }
  }
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::size_t> horizons = cfg.horizons;
  std::vector<double> rhos = cfg.rhos;
  std::vector<data::Density> densities = cfg.densities;
  std::sort(horizons.begin(), horizons.end());
  std::sort(rhos.begin(), rhos.end());
  std::sort(densities.begin(), densities.end());

  ExperimentReport report;
  report.horizon_mode = cfg.horizon_mode;
  report.config_hash = config_hash;
  std::uint64_t cell_id = 0;
  for (auto h : horizons) {
    for (auto d : densities) {
      std::vector<data::VesselSample> subset;
      for (const auto& s : samples)
        if (s.density == d) subset.push_back(s);
      for (double rho : rhos) {
        ++cell_id;
        CellReport cell;
        cell.horizon = h;
        cell.density = d;
        cell.rho = rho;
        cell.samples = subset.size();
        if (subset.empty()) {
          cell.absent = true;
          report.cells.push_back(std::move(cell));
          continue;
        }
        std::map<std::string, std::vector<double>> per_seed;
        for (std::size_t r = 0; r < cfg.seeds; ++r) {
          const std::uint64_t key = num::Rng(cfg.base_seed).fork(cell_id).fork(r).next_u64();
          const auto cell_samples = data::apply_dark_vessels(subset, rho, key);
          num::Rng rng = num::Rng(key).fork(1);
          std::map<std::string, double> acc;
          for (const auto& s : cell_samples) {
            for (const auto& [k, v] : sample_metrics(predict(s, rng), s, h)) acc[k] += v;
          }
          for (const auto& [k, v] : acc) per_seed[k].push_back(v / static_cast<double>(cell_samples.size()));
        }
        cell.runs = cfg.seeds;
        for (const auto& [k, v] : per_seed) cell.values[k] = metrics::mean_std(v);
        report.cells.push_back(std::move(cell));
      }
    }
  }
  report.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

void write_report_csv(const std::filesystem::path& path, const ExperimentReport& r) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path.string());
  f << std::setprecision(17);
  f << "# config_hash=" << hex64(r.config_hash) << " horizon_mode=" << r.horizon_mode << '\n';
  f << "horizon,density,rho,samples,runs,status";
  for (const auto& m : metric_names()) f << ',' << m << "_mean," << m << "_std";
  f << '\n';
  for (const auto& c : r.cells) {
    f << c.horizon << ',' << data::to_string(c.density) << ',' << c.rho << ',' << c.samples << ',' << c.runs << ','
      << (c.absent ? "absent" : "ok");
    for (const auto& m : metric_names()) {
      if (c.absent) {
        f << ",,";
      } else {
        const auto& v = c.values.at(m);
        f << ',' << v.mean << ',' << v.std;
      }
    }
    f << '\n';
  }
}

ExperimentReport merge_reports(const std::vector<ExperimentReport>& parts) {
  ExperimentReport out;
  for (const auto& p : parts) {
    out.cells.insert(out.cells.end(), p.cells.begin(), p.cells.end());
    out.horizon_mode = p.horizon_mode;
    out.config_hash ^= p.config_hash;
    out.runtime_seconds += p.runtime_seconds;
  }
  return out;
}

std::vector<LatentRecord> collect_latents(const model::CmivtpModel& m,
                                          const std::vector<data::VesselSample>& samples) {
  num::NoGradScope ng;
  std::vector<LatentRecord> out;
  for (const auto& s : samples) {
    num::Rng rng(0);
    const auto pred = m.forward(s, rng, nullptr, model::LatentNoise{true, nullptr});
    for (std::size_t k = 0; k < pred.modes.size(); ++k) {
      const auto mu = pred.modes[k].latent.mu.data();
      out.push_back({s.vessel_id, k, s.is_dark, {mu.begin(), mu.end()}});
    }
  }
  return out;
}

void write_latent_csv(const std::filesystem::path& path, const std::vector<LatentRecord>& records,
                      const PcaResult& pca) {
  if (pca.projection.size() != records.size()) throw DimensionError("latent records and projection differ in length");
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path.string());
  f << std::setprecision(17);
  f << "vessel_id,mode,is_dark,pc1,pc2\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    f << records[i].vessel_id << ',' << records[i].mode << ',' << (records[i].is_dark ? 1 : 0) << ','
      << pca.projection[i][0] << ',' << pca.projection[i][1] << '\n';
  }
}

}  // namespace cmivtp::harness
