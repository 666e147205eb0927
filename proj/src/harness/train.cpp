#include "cmivtp/harness/train.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>

#include "cmivtp/error.hpp"
#include "cmivtp/metrics/losses.hpp"
#include "cmivtp/numerics/adam.hpp"

namespace cmivtp::harness {

TrainConfig TrainConfig::from_kv(const KeyValues& kv) {
  TrainConfig c;
  c.lr = kv.get_double("lr", c.lr);
  c.epochs = static_cast<std::size_t>(kv.get_int("epochs", static_cast<long long>(c.epochs)));
  c.batch_size = static_cast<std::size_t>(kv.get_int("batch_size", static_cast<long long>(c.batch_size)));
  c.lr_factor = kv.get_double("lr_factor", c.lr_factor);
  c.patience = static_cast<std::size_t>(kv.get_int("patience", static_cast<long long>(c.patience)));
  c.plateau_threshold = kv.get_double("plateau_threshold", c.plateau_threshold);
  c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<long long>(c.seed)));
  c.gamma_kl = kv.get_double("gamma_kl", c.gamma_kl);
  c.kmax = static_cast<std::size_t>(kv.get_int("kmax", static_cast<long long>(c.kmax)));
  c.dark_rate = kv.get_double("dark_rate", c.dark_rate);
  c.max_steps = static_cast<std::size_t>(kv.get_int("max_steps", 0));
  c.calibrate_anchors = kv.get_bool("calibrate_anchors", c.calibrate_anchors);
  c.validate();
  return c;
}

void TrainConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be finite and >= 0");
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(lr_factor > 0.0 && lr_factor <= 1.0)) throw ConfigError("lr_factor must be in (0, 1]");
  if (patience == 0) throw ConfigError("patience must be >= 1");
  if (!(plateau_threshold >= 0.0)) throw ConfigError("plateau_threshold must be >= 0");
  if (!(gamma_kl >= 0.0)) throw ConfigError("gamma_kl must be >= 0");
  if (kmax == 0) throw ConfigError("kmax must be positive");
  if (!(dark_rate >= 0.0 && dark_rate <= 1.0)) throw ConfigError("dark_rate must be in [0, 1]");
}

double PlateauScheduler::observe(double loss) {
  if (!has_best_ || loss < best_ - threshold_ * std::abs(best_)) {
    best_ = loss;
    has_best_ = true;
    bad_ = 0;
    return 1.0;
  }
  if (++bad_ >= patience_) {
    bad_ = 0;
    return factor_;
  }
  return 1.0;
}

data::VesselSample make_dark(data::VesselSample s) {
  s.is_dark = true;
  s.obs_ais.available.assign(s.obs_ais.points.size(), false);
  return s;
}

namespace {

num::Rng sample_rng(std::uint64_t seed, std::uint64_t step, std::size_t index) {
  return num::Rng(seed).fork(step * 1000003ULL + index);
}

}  // namespace

TrainResult train(model::CmivtpModel& m, const std::vector<data::VesselSample>& samples,
                  const model::TrajectoryBank* bank, const TrainConfig& cfg,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  cfg.validate();
  if (samples.empty()) throw ConfigError("train: empty dataset");
  if (m.config().use_bank && (bank == nullptr || bank->entries.empty())) {
    throw ConfigError("train: the model uses the trajectory bank but none was given");
  }
  if (cfg.calibrate_anchors) model::calibrate_anchors(m, samples);
  std::vector<num::Tensor> params = m.params().tensors();
  num::AdamState adam = num::AdamState::for_params(params);
  num::AdamHyper hyper;
  hyper.lr = cfg.lr;
  PlateauScheduler sched(cfg.lr_factor, cfg.patience, cfg.plateau_threshold);

  num::Rng shuffle_rng = num::Rng(cfg.seed).fork(0x5348);
  num::Rng dark_rng = num::Rng(cfg.seed).fork(0xda2c);
  std::vector<std::size_t> order(samples.size());
  TrainResult result;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    shuffle_rng.shuffle(order);
    double sum_total = 0.0, sum_rec = 0.0, sum_kl = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      if (cfg.max_steps && result.steps >= cfg.max_steps) break;
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const double inv_b = 1.0 / static_cast<double>(end - start);
      num::zero_grads(params);
      double batch_total = 0.0;
      for (std::size_t i = start; i < end; ++i) {
        const std::size_t idx = order[i];
        const bool dark = cfg.dark_rate > 0.0 && dark_rng.uniform() < cfg.dark_rate;
        const data::VesselSample masked = dark ? make_dark(samples[idx]) : data::VesselSample{};
        const data::VesselSample& s = dark ? masked : samples[idx];
        num::Rng rng = sample_rng(cfg.seed, result.steps, idx);
        num::Tape tape;
        num::TapeScope scope(tape);
        const auto out = m.forward(s, rng, bank);
        const auto loss = metrics::sample_loss(out, s, m.config(), cfg.gamma_kl);
        if (!std::isfinite(loss.total_value)) {
          throw NumericError("training diverged: non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                             std::to_string(result.steps) + ", sample " + s.vessel_id + " (rec " +
                             std::to_string(loss.rec) + ", kl " + std::to_string(loss.kl) + ")");
        }
        tape.backward(num::scale(loss.total, inv_b));
        batch_total += loss.total_value;
        sum_total += loss.total_value;
        sum_rec += loss.rec;
        sum_kl += loss.kl;
        ++seen;
      }
      num::adam_step(params, adam, hyper);
      result.step_loss.push_back(batch_total * inv_b);
      ++result.steps;
    }
    if (seen == 0) break;
    EpochRecord rec;
    rec.epoch = epoch;
    rec.steps = result.steps;
    rec.total = sum_total / static_cast<double>(seen);
    rec.rec = sum_rec / static_cast<double>(seen);
    rec.kl = sum_kl / static_cast<double>(seen);
    rec.lr = hyper.lr;
    result.curve.push_back(rec);
    if (on_epoch) on_epoch(rec);
    const double mult = sched.observe(rec.total);
    if (mult != 1.0) {
      hyper.lr *= mult;
      ++result.lr_reductions;
    }
  }
  return result;
}

double dataset_loss(const model::CmivtpModel& m, const std::vector<data::VesselSample>& samples,
                    const model::TrajectoryBank* bank, std::uint64_t seed, double gamma_kl) {
  if (samples.empty()) throw ConfigError("dataset_loss: empty dataset");
  num::NoGradScope ng;
  double total = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    num::Rng rng = num::Rng(seed).fork(i);
    total += metrics::sample_loss(m.forward(samples[i], rng, bank), samples[i], m.config(), gamma_kl).total_value;
  }
  return total / static_cast<double>(samples.size());
}

void write_curve_csv(const std::filesystem::path& path, const TrainResult& r) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path.string());
  f << std::setprecision(17);
  f << "epoch,steps,total,rec,kl,lr\n";
  for (const auto& e : r.curve) f << e.epoch << ',' << e.steps << ',' << e.total << ',' << e.rec << ',' << e.kl << ',' << e.lr << '\n';
}

}  // namespace cmivtp::harness
