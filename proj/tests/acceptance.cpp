#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

#include "cmivtp/data/generator.hpp"
#include "cmivtp/data/io.hpp"
#include "cmivtp/harness/checkpoint.hpp"
#include "cmivtp/harness/evaluate.hpp"
#include "cmivtp/harness/pca.hpp"
#include "cmivtp/harness/train.hpp"
#include "cmivtp/metrics/losses.hpp"
#include "cmivtp/metrics/metrics.hpp"
#include "full_loss_oracle.hpp"

using namespace cmivtp;
using num::Tensor;
namespace fs = std::filesystem;

namespace {

void verdict(const char* id, bool pass, const std::string& detail) {
  std::printf("%s %s: %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  EXPECT_TRUE(pass) << id << ": " << detail;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

struct TempDir {
  explicit TempDir(const std::string& tag) : path(fs::temp_directory_path() / ("cmivtp_acceptance_" + tag)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path path;
};

Tensor weighted(const Tensor& y, num::Rng& rng) {
  return num::mean(num::mul(y, testutil::random_tensor(y.shape(), rng)));
}

// ---------------------------------------------------------------------------
// Shared training runs for the trend criteria.

constexpr std::size_t kRuns = 10;
constexpr std::size_t kSteps = 200;

struct Run {
  double loss_before = 0.0;
  double loss_after = 0.0;
  bool finite = true;
  double train_seconds = 0.0;
  double min_ade_rho0 = 0.0;
  double cv_ade_rho0 = 0.0;
  double cctv_rho0 = 0.0;
  double cctv_rho3 = 0.0;
  double full_rho3 = 0.0;
  double ablation_rho3 = 0.0;
};

data::WaterwayConfig curved_world() {
  data::WaterwayConfig w;
  w.centerline = data::CenterlineKind::sinusoid;
  w.vessel_count = 16;
  w.clips = 4;
  w.raster_size = 32;
  w.t_obs = 8;
  w.t_fut = 12;
  return w;
}

harness::TrainConfig trend_train_config(std::uint64_t seed) {
  harness::TrainConfig tc;
  tc.lr = 1e-3;
  tc.epochs = 1000;
  tc.max_steps = kSteps;
  tc.batch_size = 16;
  tc.dark_rate = 0.3;
  tc.seed = seed;
  return tc;
}

harness::ExperimentReport eval_at(const model::CmivtpModel& m, const model::TrajectoryBank& bank,
                                  const std::vector<data::VesselSample>& test, std::uint64_t seed) {
  harness::EvalConfig ec;
  ec.horizons = {12};
  ec.rhos = {0.0, 0.3};
  ec.densities = {data::Density::medium};
  ec.seeds = 3;
  ec.base_seed = seed;
  return harness::evaluate(test, harness::model_predictor(m, &bank), ec);
}

Run make_run(std::uint64_t seed) {
  Run r;
  const auto world = curved_world();
  const auto train_set = data::generate_scenario(world, 1000 + seed);
  const auto test_set = data::generate_scenario(world, 2000 + seed);
  model::ModelConfig mc;
  mc.t_obs = 8;
  mc.t_fut = 12;
  mc.modes = 5;
  mc.d = 32;
  const auto bank = model::build_bank(model::bank_tracks(train_set), 16, 8, 12, seed);
  const auto tc = trend_train_config(seed);

  model::CmivtpModel full(mc, seed);
  r.loss_before = harness::dataset_loss(full, train_set, &bank, 1);
  const auto t0 = std::chrono::steady_clock::now();
  const auto tr = harness::train(full, train_set, &bank, tc);
  r.train_seconds = seconds_since(t0);
  for (double v : tr.step_loss) r.finite = r.finite && std::isfinite(v);
  r.loss_after = harness::dataset_loss(full, train_set, &bank, 1);
  const auto rep = eval_at(full, bank, test_set, seed);
  r.min_ade_rho0 = rep.cells[0].values.at("min_ade_ais").mean;
  r.cv_ade_rho0 = rep.cells[0].values.at("cv_ade_ais").mean;
  r.cctv_rho0 = rep.cells[0].values.at("min_ade_cctv").mean;
  r.cctv_rho3 = rep.cells[1].values.at("min_ade_cctv").mean;
  r.full_rho3 = rep.cells[1].values.at("min_ade_ais").mean;

  auto ac = mc;
  ac.use_cctv = false;
  ac.use_scene = false;
  model::CmivtpModel ablation(ac, seed);
  harness::train(ablation, train_set, &bank, tc);
  r.ablation_rho3 = eval_at(ablation, bank, test_set, seed).cells[1].values.at("min_ade_ais").mean;
  std::printf("  run %zu: loss %.5f -> %.5f, minADE %.5f cv %.5f, cctv px %.3f -> %.3f, rho=0.3 full %.5f ais-only %.5f (%.1f s)\n",
              static_cast<std::size_t>(seed), r.loss_before, r.loss_after, r.min_ade_rho0, r.cv_ade_rho0, r.cctv_rho0,
              r.cctv_rho3, r.full_rho3, r.ablation_rho3, r.train_seconds);
  std::fflush(stdout);
  return r;
}

const std::vector<Run>& runs() {
  static const std::vector<Run> all = [] {
    std::vector<Run> v;
    for (std::uint64_t s = 0; s < kRuns; ++s) v.push_back(make_run(s));
    return v;
  }();
  return all;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + CMIVTP_CLI_PATH + "\" " + args + " > /dev/null";
  return std::system(cmd.c_str());
}

}  // namespace

TEST(Acceptance, A1_GradientOracle) {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::string worst_case;
  std::size_t instances = 0;
  auto record = [&](const std::string& name, const num::GradCheckReport& rep) {
    ++instances;
    if (rep.max_rel_error > worst) {
      worst = rep.max_rel_error;
      worst_case = name;
    }
  };

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    num::Rng rng(9000 + seed);
    auto R = [&](num::Shape s, double lo = -1, double hi = 1) { return testutil::random_tensor(std::move(s), rng, lo, hi, true); };
    Tensor a = R({3, 4}), b = R({3, 4}), w = R({4, 5}), bias = R({5}), g = R({4}, 0.5, 1.5), s = R({1}), c = R({4, 2});
    Tensor img = R({2, 5, 5}), ker = R({3, 2, 3, 3}), kb = R({3}), fmap = R({2, 6, 6});
    const num::RoiBox box{rng.uniform(0.3, 1.5), rng.uniform(0.3, 1.5), rng.uniform(3.2, 5.2), rng.uniform(3.2, 5.2)};
    const std::vector<Tensor> leaves{a, b, w, bias, g, s, c, img, ker, kb, fmap};
    const std::vector<std::pair<std::string, std::function<Tensor()>>> ops = {
        {"matmul", [&] { return num::matmul(a, c); }},
        {"transpose", [&] { return num::transpose(a); }},
        {"add", [&] { return num::add(a, b); }},
        {"sub", [&] { return num::sub(a, b); }},
        {"mul", [&] { return num::mul(a, b); }},
        {"scale", [&] { return num::scale(a, -1.7); }},
        {"add_scalar", [&] { return num::add_scalar(a, 0.3); }},
        {"scale_by", [&] { return num::scale_by(a, s); }},
        {"add_bias", [&] { return num::add_bias(num::matmul(a, w), bias); }},
        {"linear", [&] { return num::linear(a, w, bias); }},
        {"relu", [&] { return num::relu(a); }},
        {"sigmoid", [&] { return num::sigmoid(num::scale(a, 3.0)); }},
        {"tanh", [&] { return num::tanh(num::scale(a, 2.0)); }},
        {"exp", [&] { return num::exp(a); }},
        {"expm1", [&] { return num::expm1(a); }},
        {"clamp", [&] { return num::clamp(num::scale(a, 3.0), -1.0, 1.0); }},
        {"softmax", [&] { return num::softmax(num::scale(a, 3.0), 1); }},
        {"layer_norm", [&] { return num::layer_norm(a, g, num::slice(bias, 0, 0, 4)); }},
        {"concat", [&] { return num::concat({a, b}, 0); }},
        {"slice", [&] { return num::slice(a, 1, 1, 2); }},
        {"reshape", [&] { return num::reshape(a, {2, 6}); }},
        {"sum", [&] { return num::scale(num::sum(num::mul(a, b)), 0.1); }},
        {"mean", [&] { return num::mean(num::mul(a, a)); }},
        {"mean_axis", [&] { return num::mean_axis(a, 0); }},
        {"row_norms", [&] { return num::row_norms(a); }},
        {"conv2d", [&] { return num::conv2d(img, ker, kb, 1 + seed % 2, 1); }},
        {"global_avg_pool", [&] { return num::global_avg_pool(img); }},
        {"roi_align", [&] { return num::roi_align(fmap, box, 3, 1.0); }},
    };
    for (const auto& [name, fn] : ops) {
      num::Rng proj(seed);
      const Tensor r = testutil::random_tensor(fn().shape(), proj);
      record(name, num::check_gradients([&] { return num::mean(num::mul(fn(), r)); }, leaves));
    }
  }

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto cfg = testutil::tiny_model();
    model::ParamStore store(seed);
    const auto vstae = model::VstaeParams::create(store, cfg);
    const auto cmie = model::CmieParams::create(store, cfg);
    const auto uavd = model::UavdParams::create(store, cfg);
    const auto refine = model::RefinementParams::create(store, cfg);
    num::Rng rng(7000 + seed);
    std::vector<data::SceneFrame> frames;
    for (int t = 0; t < 2; ++t) frames.push_back(testutil::random_scene(16, rng));
    const Tensor z1 = testutil::random_tensor({3, 8}, rng, -1, 1, true), z2 = testutil::random_tensor({4, 8}, rng, -1, 1, true);
    const Tensor f = testutil::random_tensor({8}, rng, -1, 1, true), z = testutil::random_tensor({4}, rng, -1, 1, true);
    const Tensor base = testutil::random_tensor({4, 2}, rng, -1, 1, true), prior = testutil::random_tensor({4, 2}, rng, -1, 1, true);
    const Tensor fdec = testutil::random_tensor({4, 8}, rng, -1, 1, true);
    const Tensor mu = testutil::random_tensor({4}, rng, -1, 1, true), lv = testutil::random_tensor({4}, rng, -2, 2, true);
    std::vector<Tensor> pa, pc;
    for (int k = 0; k < 3; ++k) {
      pa.push_back(testutil::random_tensor({4, 2}, rng, -1, 1, true));
      pc.push_back(testutil::random_tensor({4, 2}, rng, -1, 1, true));
    }
    const Tensor ga = testutil::random_tensor({4, 2}, rng), gc = testutil::random_tensor({4, 2}, rng);
    std::vector<Tensor> leaves = store.tensors();
    for (const auto& t : {z1, z2, f, z, base, prior, fdec, mu, lv}) leaves.push_back(t);
    for (const auto& t : pa) leaves.push_back(t);
    for (const auto& t : pc) leaves.push_back(t);

    const std::vector<std::pair<std::string, std::function<Tensor()>>> modules = {
        {"vstae", [&] { return model::vstae_forward(frames, vstae); }},
        {"attention", [&] { return model::attention(z1, z2, cmie.traj_stage.ca); }},
        {"cmit", [&] { return model::cmit_block(z1, z2, cmie.traj_stage); }},
        {"decode", [&] { return model::decode(f, z, model::mode_embedding(uavd, 1), uavd).ais; }},
        {"sample_latent", [&] {
           num::Rng eps(seed);
           return model::sample_latent(f, 0, eps, uavd).z;
         }},
        {"refine", [&] { return model::refine_and_fuse(base, prior, fdec, f, refine).output; }},
        {"kl_loss", [&] { return metrics::kl_loss(mu, lv); }},
        {"rec_loss", [&] { return metrics::rec_loss(pa, pc, ga, gc).loss; }},
    };
    for (const auto& [name, fn] : modules) {
      num::Rng proj(seed), pick(seed);
      const Tensor r = testutil::random_tensor(fn().shape(), proj);
      record(name, num::check_gradients([&] { return num::mean(num::mul(fn(), r)); }, leaves, 1e-5, 6, &pick));
    }
  }

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    testutil::FullLossInstance inst(seed);
    record("full_loss", inst.check(4, seed));
  }

  const double secs = seconds_since(t0);
  std::ostringstream d;
  d << instances << " checks (28 primitives, 8 modules, full loss; 20 seeds each), max rel err " << worst << " ("
    << worst_case << ") < 1e-4, " << secs << " s < 120 s";
  verdict("A1", worst < 1e-4 && secs < 120.0, d.str());
}

TEST(Acceptance, A2_Trainability) {
  const auto& r = runs().front();
  std::ostringstream d;
  d << "64 vessels, " << kSteps << " steps: total loss " << r.loss_before << " -> " << r.loss_after << " (ratio "
    << r.loss_after / r.loss_before << " < 0.5), finite " << (r.finite ? "yes" : "no") << ", " << r.train_seconds
    << " s < 600 s";
  verdict("A2", r.finite && r.loss_after < 0.5 * r.loss_before && r.train_seconds < 600.0, d.str());
}

TEST(Acceptance, A3_BeatsConstantVelocity) {
  std::size_t wins = 0;
  for (const auto& r : runs()) wins += r.min_ade_rho0 < r.cv_ade_rho0;
  std::ostringstream d;
  d << "minADE@5 below constant velocity in " << wins << "/" << kRuns << " seeds (need >= 8)";
  verdict("A3", wins >= 8, d.str());
}

TEST(Acceptance, A4_DarkVesselRobustness) {
  std::vector<double> c0, c3;
  std::size_t wins = 0;
  for (const auto& r : runs()) {
    c0.push_back(r.cctv_rho0);
    c3.push_back(r.cctv_rho3);
    wins += r.full_rho3 < r.ablation_rho3;
  }
  const double m0 = metrics::mean_std(c0).mean, m3 = metrics::mean_std(c3).mean;
  const double rise = m3 / m0 - 1.0;
  std::ostringstream d;
  d << "CCTV minADE " << m0 << " px -> " << m3 << " px at rho=0.3 (+" << 100.0 * rise
    << "%, need <= 50%); full beats AIS-only at rho=0.3 in " << wins << "/" << kRuns << " seeds (need >= 7)";
  verdict("A4", rise <= 0.5 && wins >= 7, d.str());
}

TEST(Acceptance, A5_BankOracleEquivalence) {
  num::Rng rng(5);
  std::size_t queries = 0, mismatches = 0, ties = 0;
  while (queries < 1000) {
    model::TrajectoryBank bank;
    bank.t_obs = 4;
    const std::size_t size = 1 + rng.uniform_int(64);
    for (std::size_t k = 0; k < size; ++k) {
      model::BankEntry e;
      if (k > 0 && rng.uniform() < 0.1) {
        e = bank.entries[rng.uniform_int(k)];  // exact duplicate: a tie
      } else {
        for (int t = 0; t < 4; ++t) e.obs.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1)});
        e.feat = model::motion_feature(e.obs);
      }
      bank.entries.push_back(e);
    }
    for (int q = 0; q < 50 && queries < 1000; ++q, ++queries) {
      data::Track obs;
      if (rng.uniform() < 0.2) {
        obs = bank.entries[rng.uniform_int(size)].obs;
      } else {
        for (int t = 0; t < 4; ++t) obs.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1)});
      }
      const auto fq = model::motion_feature(obs);
      std::size_t best = 0;
      double best_s = -std::numeric_limits<double>::infinity();
      std::size_t n_best = 0;
      for (std::size_t k = 0; k < size; ++k) {
        const auto& fk = bank.entries[k].feat;
        double dot = 0, nq = 0, nk = 0;
        for (std::size_t i = 0; i < fq.size(); ++i) dot += fq[i] * fk[i], nq += fq[i] * fq[i], nk += fk[i] * fk[i];
        const double sim = dot / (std::sqrt(nq) * std::sqrt(nk) + 1e-8);
        if (sim > best_s) best_s = sim, best = k, n_best = 1;
        else if (sim == best_s) ++n_best;
      }
      ties += n_best > 1;
      mismatches += model::search(bank, obs).index != best;
    }
  }

  std::size_t clusters = 0, medoid_mismatch = 0;
  for (std::uint64_t trial = 0; trial < 40; ++trial) {
    std::vector<model::Feature> feats;
    const std::size_t n = 10 + rng.uniform_int(60);
    for (std::size_t i = 0; i < n; ++i) feats.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
    const auto km = model::kmeans(feats, std::min<std::size_t>(n, 8), trial);
    for (std::size_t c = 0; c < km.centroids.size(); ++c) {
      std::vector<std::size_t> members;
      for (std::size_t i = 0; i < n; ++i)
        if (km.assignment[i] == c) members.push_back(i);
      if (members.empty() || members.size() > 12) continue;
      std::vector<double> mean(3, 0.0);
      for (auto m : members)
        for (int j = 0; j < 3; ++j) mean[j] += feats[m][j] / static_cast<double>(members.size());
      std::size_t best = members[0];
      double best_d = std::numeric_limits<double>::infinity();
      for (auto m : members) {
        double dist = 0;
        for (int j = 0; j < 3; ++j) dist += (feats[m][j] - mean[j]) * (feats[m][j] - mean[j]);
        if (dist < best_d) best_d = dist, best = m;
      }
      ++clusters;
      medoid_mismatch += model::medoid_index(feats, members) != best;
    }
  }
  std::ostringstream d;
  d << "retrieval mismatches " << mismatches << "/" << queries << " queries (" << ties << " with ties); medoid mismatches "
    << medoid_mismatch << "/" << clusters << " clusters of <= 12 members";
  verdict("A5", mismatches == 0 && medoid_mismatch == 0 && clusters > 0 && ties > 0, d.str());
}

TEST(Acceptance, A6_LossIdentities) {
  bool ok = true;
  std::ostringstream d;
  const double kl0 = metrics::kl_loss(Tensor::zeros({16}), Tensor::zeros({16})).item();
  ok = ok && kl0 == 0.0;
  num::Rng rng(6);
  double min_kl = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 1000; ++i) {
    min_kl = std::min(min_kl, metrics::kl_loss(testutil::random_tensor({16}, rng, -3, 3),
                                               testutil::random_tensor({16}, rng, -5, 5)).item());
  }
  ok = ok && min_kl >= 0.0;

  double worst_total = 0.0;
  const auto cfg = testutil::tiny_model();
  model::CmivtpModel m(cfg, 3);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    for (const auto& s : data::generate_scenario(testutil::tiny_world(), seed)) {
      num::Rng r(seed);
      const auto b = metrics::sample_loss(m.forward(s, r, nullptr), s, cfg);
      worst_total = std::max(worst_total, std::abs(b.total_value - (b.rec + 0.01 * b.kl)));
    }
  }
  ok = ok && worst_total <= 1e-12;

  std::size_t dup_changes = 0, minade_increases = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Tensor> a, c;
    for (int k = 0; k < 4; ++k) {
      a.push_back(testutil::random_tensor({6, 2}, rng));
      c.push_back(testutil::random_tensor({6, 2}, rng));
    }
    const Tensor ga = testutil::random_tensor({6, 2}, rng), gc = testutil::random_tensor({6, 2}, rng);
    const auto r = metrics::rec_loss(a, c, ga, gc);
    a.push_back(a[r.winner]);
    c.push_back(c[r.winner]);
    dup_changes += metrics::rec_loss(a, c, ga, gc).loss.item() != r.loss.item();

    std::vector<data::Track> modes;
    const auto gt = model::tensor_track(ga);
    double prev = std::numeric_limits<double>::infinity();
    for (const auto& t : a) {
      modes.push_back(model::tensor_track(t));
      const double v = metrics::min_ade_fde(modes, gt).ade;
      minade_increases += v > prev;
      prev = v;
    }
  }
  ok = ok && dup_changes == 0 && minade_increases == 0;
  d << "kl(0,0)=" << kl0 << ", min kl over 1000 draws " << min_kl << " >= 0, max |total - rec - 0.01 kl| "
    << worst_total << " <= 1e-12, duplicate-winner changes " << dup_changes << ", minADE increases " << minade_increases;
  verdict("A6", ok, d.str());
}

TEST(Acceptance, A7_CliDeterminism) {
  TempDir dir("a7");
  const fs::path cfg = dir.path / "run.cfg";
  std::ofstream(cfg) << "raster_size = 16\nvessel_count = 8\nclips = 2\nt_obs = 6\nt_fut = 8\n"
                        "d = 16\nc_f = 8\nroi = 3\nbbox_hidden = 16\nlatent = 8\nmodes = 3\n"
                        "lr = 0.001\nepochs = 4\nbatch_size = 4\nseed = 11\ndark_rate = 0.2\nkmax = 6\n";
  const std::string data = (dir.path / "data.jsonl").string();
  bool ok = run_cli("generate --config " + cfg.string() + " --seed 4 --out " + data) == 0;
  for (int i = 0; i < 2 && ok; ++i) {
    const std::string tag = std::to_string(i);
    const std::string ckpt = (dir.path / ("ckpt" + tag + ".bin")).string();
    ok = run_cli("train --data " + data + " --config " + cfg.string() + " --out " + ckpt) == 0 &&
         run_cli("eval --data " + data + " --ckpt " + ckpt + " --rho 0,0.3 --dt 4,8 --seeds 2 --report " +
                 (dir.path / ("report" + tag + ".csv")).string()) == 0;
  }
  const std::string r0 = slurp(dir.path / "report0.csv"), r1 = slurp(dir.path / "report1.csv");
  const bool same_ckpt = slurp(dir.path / "ckpt0.bin") == slurp(dir.path / "ckpt1.bin");
  const bool same = ok && !r0.empty() && r0 == r1;
  std::ostringstream d;
  d << "two train+eval invocations: CLI " << (ok ? "succeeded" : "failed") << ", report CSVs ("
    << r0.size() << " bytes) " << (same ? "bit-identical" : "differ") << ", checkpoints "
    << (same_ckpt ? "bit-identical" : "differ");
  verdict("A7", same && same_ckpt, d.str());
}

TEST(Acceptance, A8_PcaCorrectness) {
  num::Rng rng(8);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 5 + rng.uniform_int(8), j = 3 + rng.uniform_int(4);
    std::vector<std::vector<double>> rows(n, std::vector<double>(j));
    Eigen::MatrixXd x(n, j);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < j; ++c) x(r, c) = rows[r][c] = rng.uniform(-1, 1);
    const auto p = harness::pca_project(rows);
    x.rowwise() -= x.colwise().mean();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(x.transpose() * x / static_cast<double>(n - 1));
    for (int k = 0; k < 2; ++k) {
      const Eigen::VectorXd e = es.eigenvectors().col(static_cast<Eigen::Index>(j) - 1 - k);
      double plus = 0, minus = 0;
      for (std::size_t c = 0; c < j; ++c) {
        plus = std::max(plus, std::abs(p.components[k][c] - e[c]));
        minus = std::max(minus, std::abs(p.components[k][c] + e[c]));
      }
      worst = std::max(worst, std::min(plus, minus));
    }
  }

  TempDir dir("a8");
  const fs::path cfg = dir.path / "run.cfg";
  std::ofstream(cfg) << "raster_size = 16\nvessel_count = 6\nclips = 2\nt_obs = 4\nt_fut = 6\n"
                        "d = 8\nc_f = 4\nroi = 3\nbbox_hidden = 8\nlatent = 4\nmodes = 3\nlr = 0.003\nepochs = 3\n"
                        "batch_size = 4\n";
  const std::string data = (dir.path / "data.jsonl").string(), ckpt = (dir.path / "ckpt.bin").string();
  const fs::path out = dir.path / "pca.csv";
  const bool cli_ok = run_cli("generate --config " + cfg.string() + " --seed 2 --rho 0.3 --out " + data) == 0 &&
                      run_cli("train --data " + data + " --config " + cfg.string() + " --out " + ckpt) == 0 &&
                      run_cli("latent-viz --ckpt " + ckpt + " --data " + data + " --out " + out.string()) == 0;
  std::size_t lines = 0;
  {
    std::ifstream f(out);
    for (std::string l; std::getline(f, l);) ++lines;
  }
  const bool export_ok = cli_ok && lines == 1 + 12 * 3;
  std::ostringstream d;
  d << "max component error vs dense eigensolver over 50 matrices " << worst << " < 1e-6; latent-viz on a trained "
    << "checkpoint " << (export_ok ? "wrote " + std::to_string(lines - 1) + " points" : std::string("failed"));
  verdict("A8", worst < 1e-6 && export_ok, d.str());
}

TEST(Acceptance, A9_FormatRoundTrips) {
  TempDir dir("a9");
  auto w = curved_world();
  w.raster_size = 16;
  w.vessel_count = 6;
  auto samples = data::apply_dark_vessels(data::generate_scenario(w, 9), 0.3, 1);
  data::write_dataset(dir.path / "d1.jsonl", samples);
  data::write_dataset(dir.path / "d2.jsonl", data::read_dataset(dir.path / "d1.jsonl"));
  const bool ds = slurp(dir.path / "d1.jsonl") == slurp(dir.path / "d2.jsonl");

  const auto bank = model::build_bank(model::bank_tracks(samples), 8, 8, 12, 3);
  model::save_bank(dir.path / "b1.json", bank);
  model::save_bank(dir.path / "b2.json", model::load_bank(dir.path / "b1.json"));
  const bool bk = slurp(dir.path / "b1.json") == slurp(dir.path / "b2.json");

  model::ModelConfig mc;
  mc.t_fut = 12;
  model::CmivtpModel m(mc, 4);
  harness::save_checkpoint(dir.path / "c1.bin", m, &bank);
  const auto loaded = harness::load_checkpoint(dir.path / "c1.bin");
  harness::save_checkpoint(dir.path / "c2.bin", *loaded.model, loaded.bank ? &*loaded.bank : nullptr);
  const bool ck = slurp(dir.path / "c1.bin") == slurp(dir.path / "c2.bin");

  std::ostringstream d;
  d << "write-read-write byte identity: dataset " << (ds ? "yes" : "no") << ", bank " << (bk ? "yes" : "no")
    << ", checkpoint " << (ck ? "yes" : "no");
  verdict("A9", ds && bk && ck, d.str());
}
