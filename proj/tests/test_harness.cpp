#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cmivtp/harness/checkpoint.hpp"
#include "cmivtp/harness/evaluate.hpp"
#include "cmivtp/harness/pca.hpp"
#include "cmivtp/harness/plot.hpp"
#include "cmivtp/harness/train.hpp"
#include "test_util.hpp"

using namespace cmivtp;
using namespace cmivtp::harness;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  TempDir() : path(fs::temp_directory_path() / ("cmivtp_harness_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
                                                ::testing::UnitTest::GetInstance()->current_test_info()->name())) {
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path path;
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<std::vector<double>> snapshot(const model::CmivtpModel& m) {
  std::vector<std::vector<double>> out;
  for (const auto& [name, t] : m.params().entries()) out.emplace_back(t.data().begin(), t.data().end());
  return out;
}

std::vector<data::VesselSample> tiny_set(std::uint64_t seed, std::size_t vessels = 4) {
  auto w = testutil::tiny_world();
  w.vessel_count = vessels;
  return data::generate_scenario(w, seed);
}

TrainConfig quick_train(double lr = 1e-3) {
  TrainConfig c;
  c.lr = lr;
  c.epochs = 3;
  c.batch_size = 2;
  c.seed = 5;
  return c;
}

}  // namespace

TEST(Scheduler, HalvesAfterPatienceAndNeverMoreThanBound) {
  PlateauScheduler s(0.5, 3, 1e-4);
  EXPECT_EQ(s.observe(1.0), 1.0);
  EXPECT_EQ(s.observe(1.0), 1.0);
  EXPECT_EQ(s.observe(0.99995), 1.0);  // below the relative threshold
  EXPECT_EQ(s.observe(1.0), 0.5);
  EXPECT_EQ(s.observe(0.5), 1.0);

  const std::size_t epochs = 37, patience = 4;
  PlateauScheduler flat(0.5, patience, 1e-4);
  double lr = 1.0, prev = lr;
  std::size_t halvings = 0;
  for (std::size_t e = 0; e < epochs; ++e) {
    const double m = flat.observe(2.0);
    lr *= m;
    halvings += m != 1.0;
    EXPECT_LE(lr, prev);
    prev = lr;
  }
  EXPECT_LE(halvings, epochs / patience);
  EXPECT_GT(halvings, 0u);
}

TEST(TrainConfigKv, ParsesAndValidates) {
  const auto c = TrainConfig::from_kv(KeyValues::parse("lr = 0.01\nepochs = 7\nbatch_size=3\ndark_rate=0.25\n"));
  EXPECT_EQ(c.lr, 0.01);
  EXPECT_EQ(c.epochs, 7u);
  EXPECT_EQ(c.batch_size, 3u);
  EXPECT_EQ(c.dark_rate, 0.25);
  EXPECT_EQ(c.patience, 10u);
  EXPECT_THROW(TrainConfig::from_kv(KeyValues::parse("patience = 0")), ConfigError);
  EXPECT_THROW(TrainConfig::from_kv(KeyValues::parse("dark_rate = 2")), ConfigError);
}

TEST(Train, ZeroLearningRateFreezesParameters) {
  auto cfg = testutil::tiny_model();
  cfg.use_bank = false;
  model::CmivtpModel m(cfg, 1);
  const auto samples = tiny_set(1);
  const auto before = snapshot(m);
  const double loss0 = dataset_loss(m, samples, nullptr, 3);
  auto tc = quick_train(0.0);
  tc.calibrate_anchors = false;
  const auto r = train(m, samples, nullptr, tc);
  EXPECT_EQ(snapshot(m), before);
  EXPECT_EQ(dataset_loss(m, samples, nullptr, 3), loss0);
  EXPECT_EQ(r.steps, 6u);
  EXPECT_EQ(r.curve.size(), 3u);
}

TEST(Train, AnchorCalibrationRecoversAffineMap) {
  auto cfg = testutil::tiny_model();
  model::CmivtpModel m(cfg, 1);
  auto samples = tiny_set(1);
  // Replace CCTV with an exact affine image of AIS so the fit is exact.
  for (auto& s : samples)
    for (std::size_t t = 0; t < s.obs_cctv.points.size(); ++t) {
      const auto p = s.obs_ais.points[t];
      s.obs_cctv.points[t] = {(0.3 + 2.0 * p.x - 0.5 * p.y) * cfg.frame_width, (0.1 + 0.25 * p.x + 1.5 * p.y) * cfg.frame_height};
    }
  EXPECT_GT(model::calibrate_anchors(m, samples), 3u);
  for (const auto& s : samples) {
    const auto& c = s.obs_cctv.points.back();
    const auto back = m.anchor_c2a(num::Tensor::from({2}, {c.x / cfg.frame_width, c.y / cfg.frame_height}));
    EXPECT_NEAR(back.data()[0], s.obs_ais.points.back().x, 1e-9);
    EXPECT_NEAR(back.data()[1], s.obs_ais.points.back().y, 1e-9);
    const auto fwd = m.anchor_a2c(num::Tensor::from({2}, {s.obs_ais.points.back().x, s.obs_ais.points.back().y}));
    EXPECT_NEAR(fwd.data()[0], c.x / cfg.frame_width, 1e-9);
    EXPECT_NEAR(fwd.data()[1], c.y / cfg.frame_height, 1e-9);
  }
}

TEST(Train, SameSeedGivesIdenticalCurves) {
  const auto cfg = testutil::tiny_model();
  const auto samples = tiny_set(2);
  const auto bank = model::build_bank(model::bank_tracks(samples), 4, cfg.t_obs, cfg.t_fut, 0);
  auto tc = quick_train();
  tc.dark_rate = 0.3;
  model::CmivtpModel a(cfg, 7), b(cfg, 7);
  const auto ra = train(a, samples, &bank, tc), rb = train(b, samples, &bank, tc);
  EXPECT_EQ(ra.step_loss, rb.step_loss);
  EXPECT_EQ(snapshot(a), snapshot(b));
  for (double v : ra.step_loss) EXPECT_TRUE(std::isfinite(v));
}

TEST(Train, DivergenceIsReported) {
  auto cfg = testutil::tiny_model();
  cfg.use_bank = false;
  model::CmivtpModel m(cfg, 1);
  testutil::fill(m.uavd.head_ais.b, std::nan(""));
  try {
    train(m, tiny_set(1), nullptr, quick_train());
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("non-finite loss at epoch 0"), std::string::npos) << e.what();
  }
}

TEST(Train, RequiresBankWhenEnabled) {
  model::CmivtpModel m(testutil::tiny_model(), 1);
  EXPECT_THROW(train(m, tiny_set(1), nullptr, quick_train()), ConfigError);
  EXPECT_THROW(train(m, {}, nullptr, quick_train()), ConfigError);
}

TEST(Train, CurveCsvHasOneRowPerEpoch) {
  TempDir dir;
  auto cfg = testutil::tiny_model();
  cfg.use_bank = false;
  model::CmivtpModel m(cfg, 1);
  const auto r = train(m, tiny_set(1), nullptr, quick_train());
  write_curve_csv(dir.path / "curve.csv", r);
  std::ifstream f(dir.path / "curve.csv");
  std::string line;
  std::size_t n = 0;
  while (std::getline(f, line)) ++n;
  EXPECT_EQ(n, 1 + r.curve.size());
}

namespace {

Predictor oracle_predictor(std::size_t modes) {
  return [modes](const data::VesselSample& s, num::Rng&) {
    return std::vector<ModeTracks>(modes, ModeTracks{s.fut_ais, s.fut_cctv});
  };
}

EvalConfig small_grid() {
  EvalConfig c;
  c.horizons = {2, 4};
  c.rhos = {0.0, 0.5};
  c.seeds = 3;
  return c;
}

}  // namespace

TEST(Evaluate, OracleModelScoresZeroEverywhere) {
  const auto samples = tiny_set(3);
  const auto r = evaluate(samples, oracle_predictor(3), small_grid());
  ASSERT_EQ(r.cells.size(), 2u * 3u * 2u);
  std::size_t present = 0;
  for (const auto& c : r.cells) {
    if (c.absent) continue;
    ++present;
    for (const auto& m : metric_names()) {
      if (m.rfind("cv_", 0) == 0) continue;
      EXPECT_EQ(c.values.at(m).mean, 0.0) << m;
      EXPECT_EQ(c.values.at(m).std, 0.0) << m;
    }
  }
  EXPECT_EQ(present, 4u);  // the tiny world is all medium density
}

TEST(Evaluate, AbsentDensitiesAreMarkedNotZero) {
  const auto r = evaluate(tiny_set(3), oracle_predictor(1), small_grid());
  for (const auto& c : r.cells) {
    EXPECT_EQ(c.absent, c.density != data::Density::medium);
    if (c.absent) EXPECT_TRUE(c.values.empty());
  }
}

TEST(Evaluate, RerunIsIdenticalAndSingleSeedHasZeroStd) {
  auto cfg = testutil::tiny_model();
  cfg.use_bank = false;
  model::CmivtpModel m(cfg, 2);
  const auto samples = tiny_set(4);
  auto grid = small_grid();
  grid.rhos = {0.0};
  const auto a = evaluate(samples, model_predictor(m, nullptr), grid);
  const auto b = evaluate(samples, model_predictor(m, nullptr), grid);
  TempDir dir;
  write_report_csv(dir.path / "a.csv", a);
  write_report_csv(dir.path / "b.csv", b);
  EXPECT_EQ(slurp(dir.path / "a.csv"), slurp(dir.path / "b.csv"));

  grid.seeds = 1;
  const auto one = evaluate(samples, model_predictor(m, nullptr), grid);
  for (const auto& c : one.cells) {
    if (c.absent) continue;
    EXPECT_EQ(c.runs, 1u);
    for (const auto& [k, v] : c.values) EXPECT_EQ(v.std, 0.0) << k;
    EXPECT_GT(c.values.at("ade_ais").mean, 0.0);
  }
}

TEST(Evaluate, RejectsHorizonBeyondWindow) {
  auto grid = small_grid();
  grid.horizons = {5};
  EXPECT_THROW(evaluate(tiny_set(1), oracle_predictor(1), grid), ConfigError);
}

TEST(Evaluate, DoesNotMutateInputs) {
  auto cfg = testutil::tiny_model();
  cfg.use_bank = false;
  model::CmivtpModel m(cfg, 2);
  const auto samples = tiny_set(5);
  const auto copy = samples;
  const auto before = snapshot(m);
  evaluate(samples, model_predictor(m, nullptr), small_grid());
  EXPECT_EQ(samples, copy);
  EXPECT_EQ(snapshot(m), before);
}

TEST(Pca, CollinearPointsLieOnFirstComponent) {
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 10; ++i) rows.push_back({1.0 + 2.0 * i, -3.0 + 1.0 * i});
  const auto r = pca_project(rows);
  EXPECT_NEAR(r.components[0][0], 2.0 / std::sqrt(5.0), 1e-9);
  EXPECT_NEAR(r.components[0][1], 1.0 / std::sqrt(5.0), 1e-9);
  for (const auto& p : r.projection) EXPECT_NEAR(p[1], 0.0, 1e-7);
  EXPECT_TRUE(r.warning.empty());
}

TEST(Pca, VarianceOrderingAndEigenOracle) {
  num::Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::vector<double>> rows(5, std::vector<double>(3));
    Eigen::MatrixXd x(5, 3);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 3; ++j) x(i, j) = rows[i][j] = rng.uniform(-1, 1);
    const auto r = pca_project(rows);
    x.rowwise() -= x.colwise().mean();
    const Eigen::MatrixXd cov = x.transpose() * x / 4.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    for (int k = 0; k < 2; ++k) {
      const Eigen::VectorXd e = es.eigenvectors().col(2 - k);
      const double sign = e.dot(Eigen::Map<const Eigen::VectorXd>(r.components[k].data(), 3)) < 0 ? -1.0 : 1.0;
      for (int j = 0; j < 3; ++j) EXPECT_NEAR(r.components[k][j], sign * e[j], 1e-6);
      EXPECT_NEAR(r.variances[k], es.eigenvalues()[2 - k], 1e-9);
    }
    double v1 = 0, v2 = 0;
    for (const auto& p : r.projection) v1 += p[0] * p[0], v2 += p[1] * p[1];
    EXPECT_GE(v1, v2);
  }
}

TEST(Pca, SignConventionAndDegenerateInput) {
  const auto r = pca_project({{0, 0}, {-1, -2}, {1, 2}, {0.5, -0.1}});
  for (const auto& c : r.components) {
    for (double v : c) {
      if (std::abs(v) > 1e-12) {
        EXPECT_GT(v, 0.0);
        break;
      }
    }
  }
  const auto zero = pca_project({{1, 2, 3}, {1, 2, 3}, {1, 2, 3}});
  EXPECT_FALSE(zero.warning.empty());
  for (const auto& p : zero.projection) EXPECT_EQ(p, (std::array<double, 2>{0.0, 0.0}));
  EXPECT_THROW(pca_project({{1, 2}}), DimensionError);
  EXPECT_THROW(pca_project({{1, 2}, {1}}), DimensionError);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  TempDir dir;
  const auto cfg = testutil::tiny_model();
  model::CmivtpModel m(cfg, 9);
  const auto samples = tiny_set(6);
  const auto bank = model::build_bank(model::bank_tracks(samples), 3, cfg.t_obs, cfg.t_fut, 77);
  save_checkpoint(dir.path / "a.bin", m, &bank);
  const auto loaded = load_checkpoint(dir.path / "a.bin");
  EXPECT_EQ(snapshot(*loaded.model), snapshot(m));
  ASSERT_TRUE(loaded.bank.has_value());
  EXPECT_EQ(*loaded.bank, bank);
  EXPECT_EQ(config_hash(loaded.model->config()), config_hash(cfg));
  save_checkpoint(dir.path / "b.bin", *loaded.model, &*loaded.bank);
  EXPECT_EQ(slurp(dir.path / "a.bin"), slurp(dir.path / "b.bin"));

  model::CmivtpModel other(cfg, 10);
  load_parameters(dir.path / "a.bin", other);
  EXPECT_EQ(snapshot(other), snapshot(m));
}

TEST(Checkpoint, CorruptionIsDetected) {
  TempDir dir;
  model::CmivtpModel m(testutil::tiny_model(), 1);
  const fs::path p = dir.path / "c.bin";
  save_checkpoint(p, m);
  std::string bytes = slurp(p);

  std::string bad = bytes;
  bad[0] = 'X';
  std::ofstream(dir.path / "magic.bin", std::ios::binary) << bad;
  try {
    load_checkpoint(dir.path / "magic.bin");
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("magic.bin"), std::string::npos);
  }

  std::ofstream(dir.path / "short.bin", std::ios::binary) << bytes.substr(0, bytes.size() / 2);
  EXPECT_THROW(load_checkpoint(dir.path / "short.bin"), CheckpointError);

  bad = bytes;
  bad[bad.size() - 20] ^= 0x01;
  std::ofstream(dir.path / "flip.bin", std::ios::binary) << bad;
  EXPECT_THROW(load_checkpoint(dir.path / "flip.bin"), CheckpointError);

  bad = bytes;
  bad[4] = 9;
  EXPECT_THROW(decode_tensors(bad, "mem"), CheckpointError);
}

TEST(Checkpoint, ShapeMismatchNamesTheTensor) {
  TempDir dir;
  model::ModelConfig big;
  big.t_fut = 4;
  model::CmivtpModel m(big, 1);
  save_checkpoint(dir.path / "d32.bin", m);
  model::ModelConfig small = big;
  small.d = 16;
  model::CmivtpModel target(small, 1);
  try {
    load_parameters(dir.path / "d32.bin", target);
    FAIL();
  } catch (const CheckpointError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("shape mismatch for tensor "), std::string::npos) << msg;
    const auto start = msg.find("tensor ") + 7;
    const std::string name = msg.substr(start, msg.find(':', start) - start);
    ASSERT_TRUE(target.params().find(name).defined()) << msg;
    ASSERT_TRUE(m.params().find(name).defined()) << msg;
    EXPECT_NE(target.params().find(name).shape(), m.params().find(name).shape());
  }
  auto tweaked = big;
  tweaked.phi = 0.2;
  model::CmivtpModel same_shapes(tweaked, 1);
  EXPECT_THROW(load_parameters(dir.path / "d32.bin", same_shapes), CheckpointError);
}

TEST(Checkpoint, RawTensorsRoundTrip) {
  std::vector<NamedTensor> ts{{"a", {2, 3}, {1, 2, 3, 4, 5, -0.0}}, {"scalar", {}, {3.5}}, {"empty", {0}, {}}};
  const std::string bytes = encode_tensors(ts);
  EXPECT_EQ(bytes.substr(0, 4), "CMIV");
  EXPECT_EQ(decode_tensors(bytes, "mem"), ts);
  EXPECT_EQ(encode_tensors(decode_tensors(bytes, "mem")), bytes);
}

TEST(Plot, SvgContainsSeriesAndEscapedText) {
  const std::string svg = line_chart_svg("loss <train>", "epoch", "loss", {{"total", {0, 1, 2}, {3, 2, 1}}, {"kl", {0, 1, 2}, {1, 1, 1}}});
  EXPECT_NE(svg.find("<svg"), std::string::npos);
  EXPECT_NE(svg.find("loss &lt;train&gt;"), std::string::npos);
  std::size_t lines = 0;
  for (std::size_t pos = 0; (pos = svg.find("<polyline", pos)) != std::string::npos; ++pos) ++lines;
  EXPECT_EQ(lines, 2u);
}

TEST(Latents, CollectedForEveryModeAndProjectable) {
  auto cfg = testutil::tiny_model();
  model::CmivtpModel m(cfg, 3);
  const auto samples = tiny_set(7, 5);
  const auto recs = collect_latents(m, samples);
  ASSERT_EQ(recs.size(), samples.size() * cfg.modes);
  for (const auto& r : recs) EXPECT_EQ(r.mu.size(), cfg.latent);
  std::vector<std::vector<double>> rows;
  for (const auto& r : recs) rows.push_back(r.mu);
  const auto pca = pca_project(rows);
  TempDir dir;
  write_latent_csv(dir.path / "pca.csv", recs, pca);
  EXPECT_NE(slurp(dir.path / "pca.csv").find("vessel_id,mode,is_dark,pc1,pc2"), std::string::npos);
}
