#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "cmivtp/data/types.hpp"
#include "cmivtp/model/model_config.hpp"
#include "cmivtp/model/params.hpp"

namespace cmivtp::model {

using Feature = std::vector<double>;

/// Track shifted to start at the origin, divided by max(|X_last - X_0|, 1e-8)
/// and flattened to (x0, y0, x1, y1, ...).
Feature motion_feature(const data::Track& obs);

struct BankEntry {
  data::Track obs;
  data::Track fut;
  Feature feat;
  friend bool operator==(const BankEntry&, const BankEntry&) = default;
};

struct TrajectoryBank {
  std::size_t t_obs = 0;
  std::size_t t_fut = 0;
  std::uint64_t seed = 0;
  std::vector<BankEntry> entries;
  friend bool operator==(const TrajectoryBank&, const TrajectoryBank&) = default;
};

struct KMeansResult {
  std::vector<std::size_t> assignment;
  std::vector<Feature> centroids;
  std::vector<double> objective;  // after every assignment step
  std::size_t iterations = 0;
};

inline constexpr std::size_t kKMeansMaxIter = 100;

/// Lloyd iterations from a seeded farthest-point start: the first centre is
/// a uniformly drawn feature, each further one the feature farthest from the
/// chosen centres (lowest index on ties). Stops when assignments repeat.
/// An empty cluster is reseeded to the feature farthest from its own
/// centroid that no other empty cluster took in the same round.
KMeansResult kmeans(const std::vector<Feature>& feats, std::size_t k, std::uint64_t seed,
                    std::size_t max_iter = kKMeansMaxIter);

/// Member closest to the members' mean feature; lowest index on ties.
std::size_t medoid_index(const std::vector<Feature>& feats, const std::vector<std::size_t>& members);

/// Full tracks of length >= t_obs + t_fut; K = min(k_max, N) medoids.
TrajectoryBank build_bank(const std::vector<data::Track>& tracks, std::size_t k_max, std::size_t t_obs,
                          std::size_t t_fut, std::uint64_t seed);

/// Observed + future AIS of every sample, as bank input.
std::vector<data::Track> bank_tracks(const std::vector<data::VesselSample>& samples);

inline constexpr double kCosineEps = 1e-8;
double cosine_similarity(const Feature& a, const Feature& b);

struct SearchResult {
  std::size_t index = 0;
  double similarity = 0.0;
};

/// Argmax cosine similarity against every entry; lowest index on ties.
SearchResult search(const TrajectoryBank& bank, const data::Track& obs);

/// Retrieved future expressed from the query's last observed point, scaled
/// by the ratio of query to prototype displacement.
data::Track align_prior(const BankEntry& entry, const data::Track& query_obs);

void save_bank(const std::filesystem::path& path, const TrajectoryBank& bank);
TrajectoryBank load_bank(const std::filesystem::path& path);
std::string bank_to_json(const TrajectoryBank& bank);
TrajectoryBank bank_from_json(const std::string& text);

struct RefinementParams {
  Linear off1;  // (2 T_fut + T_fut d) -> 2d
  Linear off2;  // 2d -> 2 T_fut
  Linear gate;  // d -> 1
  double gamma_off = 0.5;
  FusionForm form = FusionForm::prior_weighted;
  std::size_t t_fut = 0;

  static RefinementParams create(ParamStore& store, const ModelConfig& cfg);
};

struct Refinement {
  Tensor output;   // [T_fut x 2]
  Tensor refined;  // prior + gamma_off * offset
  Tensor offset;   // [T_fut x 2]
  Tensor beta;     // [1]
};

/// refined = prior + gamma_off * offsetMLP(prior ++ f_dec); beta = sigmoid(gate(f_enc));
/// output = beta * refined + (1 - beta) * base (prior_weighted form).
Refinement refine_and_fuse(const Tensor& base, const Tensor& prior, const Tensor& f_dec, const Tensor& f_enc,
                           const RefinementParams& p, std::optional<double> beta_override = std::nullopt);

}  // namespace cmivtp::model
