#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "cmivtp/data/generator.hpp"
#include "cmivtp/data/io.hpp"
#include "cmivtp/harness/checkpoint.hpp"
#include "cmivtp/harness/evaluate.hpp"
#include "cmivtp/harness/pca.hpp"
#include "cmivtp/harness/plot.hpp"
#include "cmivtp/harness/train.hpp"

using namespace cmivtp;
namespace fs = std::filesystem;

namespace {

KeyValues load_config(const std::string& path) { return path.empty() ? KeyValues{} : KeyValues::load(path); }

std::vector<std::size_t> parse_sizes(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) out.push_back(std::stoul(item));
  return out;
}

std::vector<double> parse_doubles(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) out.push_back(std::stod(item));
  return out;
}

std::vector<data::VesselSample> truncate_future(std::vector<data::VesselSample> samples, std::size_t t_fut) {
  for (auto& s : samples) {
    if (s.t_fut() < t_fut) throw ConfigError(s.vessel_id + " has a future window shorter than " + std::to_string(t_fut));
    s.fut_ais.resize(t_fut);
    s.fut_cctv.resize(t_fut);
  }
  return samples;
}

// Model window defaults to the data's window unless the config says otherwise.
model::ModelConfig model_config_for(const KeyValues& kv, const std::vector<data::VesselSample>& samples) {
  KeyValues copy = kv;
  if (!samples.empty()) {
    if (!copy.has("t_obs")) copy.set("t_obs", std::to_string(samples.front().t_obs()));
    if (!copy.has("t_fut")) copy.set("t_fut", std::to_string(samples.front().t_fut()));
  }
  return model::ModelConfig::from_kv(copy);
}

void loss_plot(const fs::path& dir, const harness::TrainResult& r) {
  fs::create_directories(dir);
  harness::Series total{"total", {}, {}}, rec{"rec", {}, {}};
  for (const auto& e : r.curve) {
    total.x.push_back(static_cast<double>(e.epoch));
    total.y.push_back(e.total);
    rec.x.push_back(static_cast<double>(e.epoch));
    rec.y.push_back(e.rec);
  }
  harness::write_line_chart(dir / "loss.svg", "training loss", "epoch", "loss", {total, rec});
}

struct TrainedModel {
  std::unique_ptr<model::CmivtpModel> model;
  std::optional<model::TrajectoryBank> bank;
  harness::TrainResult result;
};

TrainedModel train_model(const std::vector<data::VesselSample>& samples, const KeyValues& kv,
                         const std::optional<model::TrajectoryBank>& given_bank, std::optional<std::uint64_t> seed) {
  auto tc = harness::TrainConfig::from_kv(kv);
  if (seed) tc.seed = *seed;
  const auto mc = model_config_for(kv, samples);
  TrainedModel out;
  out.model = std::make_unique<model::CmivtpModel>(mc, tc.seed);
  if (mc.use_bank) {
    out.bank = given_bank ? *given_bank
                          : model::build_bank(model::bank_tracks(samples), tc.kmax, mc.t_obs, mc.t_fut, tc.seed);
  }
  out.result = harness::train(*out.model, samples, out.bank ? &*out.bank : nullptr, tc,
                              [](const harness::EpochRecord& e) {
                                std::cout << "epoch " << e.epoch << " steps " << e.steps << " total " << e.total
                                          << " rec " << e.rec << " kl " << e.kl << " lr " << e.lr << '\n';
                              });
  return out;
}

void rho_plot(const fs::path& dir, const harness::ExperimentReport& r) {
  fs::create_directories(dir);
  std::map<std::string, harness::Series> by_key;
  for (const auto& c : r.cells) {
    if (c.absent) continue;
    for (const char* metric : {"min_ade_ais", "min_ade_cctv"}) {
      const std::string key = std::string(metric) + " dt=" + std::to_string(c.horizon) + " " + data::to_string(c.density);
      auto& s = by_key[key];
      s.name = key;
      s.x.push_back(c.rho);
      s.y.push_back(c.values.at(metric).mean);
    }
  }
  std::vector<harness::Series> ais, cctv;
  for (auto& [k, s] : by_key) (k.rfind("min_ade_ais", 0) == 0 ? ais : cctv).push_back(s);
  harness::write_line_chart(dir / "ade_vs_rho_ais.svg", "AIS minADE vs missing rate", "rho", "minADE", ais);
  harness::write_line_chart(dir / "ade_vs_rho_cctv.svg", "CCTV minADE (px) vs missing rate", "rho", "minADE", cctv);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CmIVTP multimodal vessel trajectory prediction"};
  app.require_subcommand(1);

  std::string config, out, data_path, bank_path, ckpt_path, curve_path, plots_dir, report_path, sample_id,
      train_data_path;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> seed_override;
  std::size_t kmax = 16, seeds = 10;
  std::string rho_list = "0,0.1,0.2,0.3", dt_list = "12,24,36";
  double dark_rho = 0.0;
  bool per_horizon = false;

  auto* gen = app.add_subcommand("generate", "synthesize a waterway dataset");
  gen->add_option("--config", config, "key = value config file");
  gen->add_option("--seed", seed, "generator seed");
  gen->add_option("--rho", dark_rho, "fraction of dark vessels")->check(CLI::Range(0.0, 1.0));
  gen->add_option("--out", out, "output JSON-lines file")->required();

  auto* bank = app.add_subcommand("bank", "trajectory bank tools");
  bank->require_subcommand(1);
  auto* bank_build = bank->add_subcommand("build", "cluster the dataset into a bank");
  bank_build->add_option("--data", data_path)->required();
  bank_build->add_option("--kmax", kmax);
  bank_build->add_option("--config", config);
  bank_build->add_option("--seed", seed);
  bank_build->add_option("--out", out)->required();

  auto* tr = app.add_subcommand("train", "train a model");
  tr->add_option("--data", data_path)->required();
  tr->add_option("--bank", bank_path, "prebuilt bank (built from --data when omitted)");
  tr->add_option("--config", config);
  tr->add_option("--seed", seed_override, "overrides the config seed");
  tr->add_option("--out", out)->required();
  tr->add_option("--curve", curve_path);
  tr->add_option("--plots", plots_dir);

  auto* ev = app.add_subcommand("eval", "evaluate over the (dt, density, rho) grid");
  ev->add_option("--data", data_path)->required();
  ev->add_option("--ckpt", ckpt_path);
  ev->add_option("--bank", bank_path, "overrides the checkpoint's bank");
  ev->add_option("--rho", rho_list);
  ev->add_option("--dt", dt_list);
  ev->add_option("--seeds", seeds);
  ev->add_option("--seed", seed, "base seed of the evaluation streams");
  ev->add_option("--report", report_path)->required();
  ev->add_option("--plots", plots_dir);
  ev->add_flag("--per-horizon", per_horizon, "train one model per dt instead of truncating");
  ev->add_option("--train-data", train_data_path, "training data for --per-horizon");
  ev->add_option("--config", config, "training config for --per-horizon");

  auto* pr = app.add_subcommand("predict", "predict one vessel");
  pr->add_option("--ckpt", ckpt_path)->required();
  pr->add_option("--data", data_path)->required();
  pr->add_option("--sample-id", sample_id)->required();
  pr->add_option("--seed", seed);
  pr->add_option("--out", out)->required();

  auto* lv = app.add_subcommand("latent-viz", "PCA of the latent means");
  lv->add_option("--ckpt", ckpt_path)->required();
  lv->add_option("--data", data_path)->required();
  lv->add_option("--out", out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    const auto t0 = std::chrono::steady_clock::now();
    if (*gen) {
      const auto w = data::WaterwayConfig::from_kv(load_config(config));
      auto samples = data::generate_scenario(w, seed);
      if (dark_rho > 0.0) samples = data::apply_dark_vessels(std::move(samples), dark_rho, seed);
      data::write_dataset(out, samples);
      std::cout << "wrote " << samples.size() << " samples to " << out << '\n';
    } else if (*bank_build) {
      const auto samples = data::read_dataset(data_path);
      const auto mc = model_config_for(load_config(config), samples);
      const auto b = model::build_bank(model::bank_tracks(samples), kmax, mc.t_obs, mc.t_fut, seed);
      model::save_bank(out, b);
      std::cout << "bank of " << b.entries.size() << " prototypes written to " << out << '\n';
    } else if (*tr) {
      const auto samples = data::read_dataset(data_path);
      std::optional<model::TrajectoryBank> given;
      if (!bank_path.empty()) given = model::load_bank(bank_path);
      const auto t = train_model(samples, load_config(config), given, seed_override);
      harness::save_checkpoint(out, *t.model, t.bank ? &*t.bank : nullptr);
      if (!curve_path.empty()) harness::write_curve_csv(curve_path, t.result);
      if (!plots_dir.empty()) loss_plot(plots_dir, t.result);
      std::cout << "checkpoint written to " << out << " after " << t.result.steps << " steps\n";
    } else if (*ev) {
      const auto samples = data::read_dataset(data_path);
      harness::EvalConfig ec;
      ec.horizons = parse_sizes(dt_list);
      ec.rhos = parse_doubles(rho_list);
      ec.seeds = seeds;
      ec.base_seed = seed;
      harness::ExperimentReport report;
      if (per_horizon) {
        if (train_data_path.empty()) throw ConfigError("--per-horizon needs --train-data");
        const auto train_samples = data::read_dataset(train_data_path);
        ec.horizon_mode = "per_horizon";
        std::vector<harness::ExperimentReport> parts;
        for (auto h : ec.horizons) {
          KeyValues kv = load_config(config);
          kv.set("t_fut", std::to_string(h));
          const auto t = train_model(truncate_future(train_samples, h), kv, std::nullopt, std::nullopt);
          auto one = ec;
          one.horizons = {h};
          parts.push_back(harness::evaluate(truncate_future(samples, h),
                                            harness::model_predictor(*t.model, t.bank ? &*t.bank : nullptr), one,
                                            harness::config_hash(t.model->config())));
        }
        report = harness::merge_reports(parts);
      } else {
        if (ckpt_path.empty()) throw ConfigError("eval needs --ckpt unless --per-horizon is set");
        auto loaded = harness::load_checkpoint(ckpt_path);
        if (!bank_path.empty()) loaded.bank = model::load_bank(bank_path);
        report = harness::evaluate(samples, harness::model_predictor(*loaded.model, loaded.bank ? &*loaded.bank : nullptr),
                                   ec, harness::config_hash(loaded.model->config()));
      }
      harness::write_report_csv(report_path, report);
      if (!plots_dir.empty()) rho_plot(plots_dir, report);
      std::cout << "report written to " << report_path << " (" << report.cells.size() << " cells, "
                << report.runtime_seconds << " s)\n";
    } else if (*pr) {
      const auto loaded = harness::load_checkpoint(ckpt_path);
      const auto samples = data::read_dataset(data_path);
      const auto it = std::find_if(samples.begin(), samples.end(), [&](const auto& s) { return s.vessel_id == sample_id; });
      if (it == samples.end()) throw ConfigError("no sample with id " + sample_id + " in " + data_path);
      num::Rng rng(seed);
      const auto modes = harness::model_predictor(*loaded.model, loaded.bank ? &*loaded.bank : nullptr)(*it, rng);
      nlohmann::json j;
      j["vessel_id"] = it->vessel_id;
      j["is_dark"] = it->is_dark;
      for (const auto& m : modes) {
        nlohmann::json mode;
        for (auto p : m.ais) mode["ais"].push_back({p.x, p.y});
        for (auto p : m.cctv) mode["cctv"].push_back({p.x, p.y});
        j["modes"].push_back(mode);
      }
      std::ofstream(out) << j.dump(2) << '\n';
      std::cout << modes.size() << " modes written to " << out << '\n';
    } else if (*lv) {
      const auto loaded = harness::load_checkpoint(ckpt_path);
      const auto samples = data::read_dataset(data_path);
      const auto recs = harness::collect_latents(*loaded.model, samples);
      std::vector<std::vector<double>> rows;
      for (const auto& r : recs) rows.push_back(r.mu);
      const auto pca = harness::pca_project(rows);
      if (!pca.warning.empty()) std::cerr << "warning: " << pca.warning << '\n';
      harness::write_latent_csv(out, recs, pca);
      std::cout << recs.size() << " latent points written to " << out << '\n';
    }
    std::cout << "elapsed " << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() << " s\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
