#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "cmivtp/data/generator.hpp"
#include "cmivtp/data/homography.hpp"
#include "cmivtp/data/io.hpp"
#include "cmivtp/numerics/rng.hpp"
#include <json.hpp>
#include <map>

using namespace cmivtp;
using namespace cmivtp::data;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("cmivtp_test_" + name);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

WaterwayConfig small_config() {
  WaterwayConfig c;
  c.raster_size = 16;
  c.t_obs = 4;
  c.t_fut = 6;
  c.vessel_count = 5;
  c.clips = 2;
  return c;
}

}  // namespace

TEST(SplitWindow, PartitionsContiguously) {
  std::vector<int> track(20);
  for (int i = 0; i < 20; ++i) track[static_cast<std::size_t>(i)] = i + 1;
  auto [obs, fut] = split_window(track, 8, 12);
  EXPECT_EQ(obs.size(), 8u);
  EXPECT_EQ(fut.size(), 12u);
  EXPECT_EQ(obs.back(), 8);
  EXPECT_EQ(fut.front(), 9);  // the first future step is the 9th element
  EXPECT_EQ(fut.back(), 20);
}

TEST(SplitWindow, TooShortThrows) {
  std::vector<int> track(19);
  try {
    split_window(track, 8, 12);
    FAIL();
  } catch (const WindowError& e) {
    EXPECT_NE(std::string(e.what()).find("19"), std::string::npos);
  }
}

TEST(Homography, IdentityAndScaling) {
  Track pts{{0.1, 0.2}, {3.0, -4.0}};
  EXPECT_EQ(project_geo_to_pixels(pts, Homography{}), pts);
  Homography s{{2, 0, 0, 0, 2, 0, 0, 0, 1}};
  Track out = project_geo_to_pixels(pts, s);
  EXPECT_EQ(out[1], (Point2{6.0, -8.0}));
}

TEST(Homography, RandomRoundTrip) {
  num::Rng rng(17);
  int checked = 0;
  while (checked < 50) {
    Homography h;
    for (auto& v : h.m) v = rng.uniform(-2, 2);
    h.m[8] = 3.0;
    if (std::abs(h.determinant()) < 0.1) continue;
    const Homography inv = h.inverse();
    for (int k = 0; k < 10; ++k) {
      const Point2 p{rng.uniform(0, 1), rng.uniform(0, 1)};
      const Point2 q = inv.apply(h.apply(p));
      EXPECT_NEAR(q.x, p.x, 1e-9);
      EXPECT_NEAR(q.y, p.y, 1e-9);
    }
    ++checked;
  }
}

TEST(Homography, PointAtInfinityThrows) {
  Homography h{{1, 0, 0, 0, 1, 0, 1, 0, 0}};  // w = x
  EXPECT_THROW(h.apply({0.0, 1.0}), ProjectionError);
  Homography singular{{1, 2, 3, 2, 4, 6, 0, 0, 1}};
  EXPECT_THROW(project_geo_to_pixels({{0, 0}}, singular), ProjectionError);
}

TEST(Generator, StraightNoiselessTracksAreCollinear) {
  WaterwayConfig c = small_config();
  c.centerline = CenterlineKind::straight;
  c.ais_noise = 0;
  c.pixel_noise = 0;
  c.maneuver_prob = 0;
  for (const auto& s : generate_scenario(c, 3)) {
    Track all = s.obs_ais.points;
    all.insert(all.end(), s.fut_ais.begin(), s.fut_ais.end());
    const Point2 a = all.front(), b = all.back();
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    for (const auto& p : all) {
      const double dist = std::abs((b.x - a.x) * (a.y - p.y) - (a.x - p.x) * (b.y - a.y)) / len;
      EXPECT_LT(dist, 1e-9);
    }
  }
}

TEST(Generator, NoiselessCctvIsProjectedAis) {
  WaterwayConfig c = small_config();
  c.ais_noise = 0;
  c.pixel_noise = 0;
  for (const auto& s : generate_scenario(c, 4)) {
    EXPECT_EQ(project_geo_to_pixels(s.obs_ais.points, c.homography), s.obs_cctv.points);
    EXPECT_EQ(project_geo_to_pixels(s.fut_ais, c.homography), s.fut_cctv);
  }
}

TEST(Generator, SameSeedGivesByteIdenticalFiles) {
  WaterwayConfig c = small_config();
  const auto p1 = temp_path("gen1.jsonl"), p2 = temp_path("gen2.jsonl"), p3 = temp_path("gen3.jsonl");
  write_dataset(p1, generate_scenario(c, 99));
  write_dataset(p2, generate_scenario(c, 99));
  write_dataset(p3, generate_scenario(c, 100));
  EXPECT_EQ(slurp(p1), slurp(p2));
  EXPECT_NE(slurp(p1), slurp(p3));
}

TEST(Generator, ManeuverFractionFollowsBinomial) {
  // Oracle: for n = 200, p = 0.15 the count lands in [20, 40] with
  // probability > 0.96 (exact binomial sum below); the seeded run must too.
  double in_band = 0.0;
  for (int k = 20; k <= 40; ++k) {
    const double log_pmf = std::lgamma(201.0) - std::lgamma(k + 1.0) - std::lgamma(201.0 - k) +
                           k * std::log(0.15) + (200 - k) * std::log(0.85);
    in_band += std::exp(log_pmf);
  }
  EXPECT_GT(in_band, 0.96);

  WaterwayConfig c = small_config();
  c.vessel_count = 50;
  c.clips = 4;
  c.maneuver_prob = 0.15;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto vessels = generate_scenario_detailed(c, seed);
    ASSERT_EQ(vessels.size(), 200u);
    const auto n = std::count_if(vessels.begin(), vessels.end(), [](const auto& v) { return v.maneuvering; });
    const double frac = static_cast<double>(n) / 200.0;
    EXPECT_GE(frac, 0.10) << "seed " << seed;
    EXPECT_LE(frac, 0.20) << "seed " << seed;
  }
}

TEST(Generator, SceneRasterContract) {
  WaterwayConfig c = small_config();
  for (const auto& s : generate_scenario(c, 5)) {
    ASSERT_EQ(s.scenes.size(), c.t_obs);
    for (const auto& f : s.scenes) {
      EXPECT_LT(f.bbox.x_min, f.bbox.x_max);
      EXPECT_LT(f.bbox.y_min, f.bbox.y_max);
      for (float v : f.raster) {
        EXPECT_GE(v, 0.0f);
        EXPECT_LE(v, 1.0f);
      }
      std::size_t inside = 0;
      for (std::size_t r = 0; r < f.height; ++r) {
        for (std::size_t col = 0; col < f.width; ++col) {
          const double cx = col + 0.5, cy = r + 0.5;
          const bool in = cx >= f.bbox.x_min && cx <= f.bbox.x_max && cy >= f.bbox.y_min && cy <= f.bbox.y_max;
          if (in) {
            EXPECT_GT(f.at(2, r, col), 0.0f);
            ++inside;
          } else {
            EXPECT_EQ(f.at(2, r, col), 0.0f);
          }
        }
      }
      EXPECT_GT(inside, 0u);
    }
    for (const auto& p : s.obs_cctv.points) {
      EXPECT_GE(p.x, 0.0);
      EXPECT_LT(p.x, c.frame_width);
      EXPECT_GE(p.y, 0.0);
      EXPECT_LT(p.y, c.frame_height);
    }
  }
}

TEST(Generator, MixedDensityCyclesTiers) {
  WaterwayConfig c = small_config();
  c.clips = 3;
  c.vessel_count = 6;
  c.mixed_density = true;
  const auto s = generate_scenario(c, 8);
  std::map<Density, int> counts;
  for (const auto& v : s) ++counts[v.density];
  EXPECT_EQ(counts[Density::low], 3);
  EXPECT_EQ(counts[Density::medium], 6);
  EXPECT_EQ(counts[Density::high], 12);
}

TEST(Generator, InvalidConfigRejected) {
  WaterwayConfig c = small_config();
  c.half_width = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.homography.m = {1, 2, 3, 2, 4, 6, 0, 0, 1};
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(DarkVessels, Extremes) {
  const auto base = generate_scenario(small_config(), 6);
  EXPECT_EQ(apply_dark_vessels(base, 0.0, 1), base);
  const auto all = apply_dark_vessels(base, 1.0, 1);
  for (std::size_t i = 0; i < all.size(); ++i) {
    EXPECT_TRUE(all[i].is_dark);
    EXPECT_FALSE(all[i].obs_ais.any_available());
    EXPECT_EQ(all[i].fut_ais, base[i].fut_ais);
    EXPECT_EQ(all[i].obs_ais.points, base[i].obs_ais.points);
  }
}

TEST(DarkVessels, ExactCountDeterministicAndOrderFree) {
  WaterwayConfig c = small_config();
  c.vessel_count = 10;
  auto base = generate_scenario(c, 7);
  ASSERT_EQ(base.size(), 20u);
  auto dark_ids = [](const std::vector<VesselSample>& v) {
    std::set<std::string> ids;
    for (const auto& s : v)
      if (s.is_dark) ids.insert(s.vessel_id);
    return ids;
  };
  const auto a = dark_ids(apply_dark_vessels(base, 0.3, 11));
  EXPECT_EQ(a.size(), 6u);
  EXPECT_EQ(dark_ids(apply_dark_vessels(base, 0.3, 11)), a);
  std::reverse(base.begin(), base.end());
  EXPECT_EQ(dark_ids(apply_dark_vessels(base, 0.3, 11)), a);
  EXPECT_THROW(apply_dark_vessels(base, 1.5, 1), ConfigError);
}

TEST(DatasetIo, EmptyFileIsEmptyDataset) {
  const auto p = temp_path("empty.jsonl");
  std::ofstream(p).close();
  EXPECT_TRUE(read_dataset(p).empty());
}

TEST(DatasetIo, RoundTripFiftySamples) {
  WaterwayConfig c = small_config();
  c.vessel_count = 25;
  auto samples = apply_dark_vessels(generate_scenario(c, 12), 0.2, 3);
  ASSERT_EQ(samples.size(), 50u);
  const auto p1 = temp_path("rt1.jsonl"), p2 = temp_path("rt2.jsonl");
  write_dataset(p1, samples);
  const auto back = read_dataset(p1);
  EXPECT_EQ(back, samples);
  write_dataset(p2, back);
  EXPECT_EQ(slurp(p1), slurp(p2));
}

TEST(DatasetIo, MissingFieldNamesLineAndField) {
  const auto samples = generate_scenario(small_config(), 13);
  const auto p = temp_path("broken.jsonl");
  {
    std::ofstream out(p);
    out << sample_to_json_line(samples[0]) << '\n';
    auto j = nlohmann::json::parse(sample_to_json_line(samples[1]));
    j.erase("fut_ais");
    out << j.dump() << '\n';
  }
  try {
    read_dataset(p);
    FAIL();
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("fut_ais"), std::string::npos) << msg;
  }
}

TEST(DatasetIo, Base64KnownVectors) {
  auto enc = [](const std::string& s) { return base64_encode(std::vector<unsigned char>(s.begin(), s.end())); };
  EXPECT_EQ(enc(""), "");
  EXPECT_EQ(enc("f"), "Zg==");
  EXPECT_EQ(enc("fo"), "Zm8=");
  EXPECT_EQ(enc("foo"), "Zm9v");
  EXPECT_EQ(enc("foobar"), "Zm9vYmFy");
  const auto dec = base64_decode("Zm9vYg==");
  EXPECT_EQ(std::string(dec.begin(), dec.end()), "foob");
  EXPECT_THROW(base64_decode("Zm9"), ParseError);
}
