#include "cmivtp/model/vgtb.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <sstream>

#include "cmivtp/error.hpp"
#include "cmivtp/numerics/rng.hpp"

namespace cmivtp::model {

using data::Point2;
using data::Track;
using nlohmann::json;

Feature motion_feature(const Track& obs) {
  if (obs.empty()) return {};
  const Point2 o = obs.front();
  const double disp = std::hypot(obs.back().x - o.x, obs.back().y - o.y);
  const double s = std::max(disp, 1e-8);
  Feature f;
  f.reserve(2 * obs.size());
  for (const auto& p : obs) {
    f.push_back((p.x - o.x) / s);
    f.push_back((p.y - o.y) / s);
  }
  return f;
}

namespace {

double sq_dist(const Feature& a, const Feature& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

std::size_t nearest(const Feature& f, const std::vector<Feature>& centres) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centres.size(); ++c) {
    const double d = sq_dist(f, centres[c]);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

Feature mean_of(const std::vector<Feature>& feats, const std::vector<std::size_t>& members) {
  Feature m(feats[members.front()].size(), 0.0);
  for (std::size_t i : members)
    for (std::size_t j = 0; j < m.size(); ++j) m[j] += feats[i][j];
  for (auto& v : m) v /= static_cast<double>(members.size());
  return m;
}

}  // namespace

KMeansResult kmeans(const std::vector<Feature>& feats, std::size_t k, std::uint64_t seed, std::size_t max_iter) {
  const std::size_t n = feats.size();
  if (n == 0) throw DimensionError("kmeans: no features");
  if (k == 0 || k > n) throw DimensionError("kmeans: need 1 <= k <= N");

  KMeansResult r;
  num::Rng rng(seed);
  std::vector<std::size_t> chosen{static_cast<std::size_t>(rng.uniform_int(n))};
  std::vector<double> min_d(n, std::numeric_limits<double>::infinity());
  while (chosen.size() < k) {
    const Feature& last = feats[chosen.back()];
    for (std::size_t i = 0; i < n; ++i) min_d[i] = std::min(min_d[i], sq_dist(feats[i], last));
    std::size_t best = 0;
    double best_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (min_d[i] > best_d) {
        best_d = min_d[i];
        best = i;
      }
    }
    chosen.push_back(best);
  }
  for (std::size_t c : chosen) r.centroids.push_back(feats[c]);

  std::vector<std::size_t> assign(n, 0);
  for (std::size_t it = 0; it < max_iter; ++it) {
    std::vector<std::size_t> next(n);
    double obj = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      next[i] = nearest(feats[i], r.centroids);
      obj += sq_dist(feats[i], r.centroids[next[i]]);
    }
    r.objective.push_back(obj);
    r.iterations = it + 1;
    const bool stable = it > 0 && next == assign;
    assign = std::move(next);
    if (stable) break;

    std::vector<std::vector<std::size_t>> members(k);
    for (std::size_t i = 0; i < n; ++i) members[assign[i]].push_back(i);
    std::vector<bool> taken(n, false);
    for (std::size_t c = 0; c < k; ++c) {
      if (!members[c].empty()) {
        r.centroids[c] = mean_of(feats, members[c]);
        continue;
      }
      std::size_t far = n;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (taken[i]) continue;
        const double d = sq_dist(feats[i], r.centroids[assign[i]]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      if (far < n) {
        taken[far] = true;
        r.centroids[c] = feats[far];
      }
    }
  }
  r.assignment = std::move(assign);
  return r;
}

std::size_t medoid_index(const std::vector<Feature>& feats, const std::vector<std::size_t>& members) {
  if (members.empty()) throw DimensionError("medoid_index: empty cluster");
  const Feature m = mean_of(feats, members);
  std::size_t best = members.front();
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i : members) {
    const double d = sq_dist(feats[i], m);
    if (d < best_d || (d == best_d && i < best)) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

TrajectoryBank build_bank(const std::vector<Track>& tracks, std::size_t k_max, std::size_t t_obs, std::size_t t_fut,
                          std::uint64_t seed) {
  if (tracks.empty()) throw DimensionError("build_bank: empty dataset");
  if (k_max == 0) throw ConfigError("build_bank: k_max must be positive");
  std::vector<Track> obs, fut;
  std::vector<Feature> feats;
  for (const auto& t : tracks) {
    auto [o, f] = data::split_window(t, t_obs, t_fut);
    feats.push_back(motion_feature(o));
    obs.push_back(std::move(o));
    fut.push_back(std::move(f));
  }
  const std::size_t k = std::min(k_max, tracks.size());
  const KMeansResult km = kmeans(feats, k, seed);
  TrajectoryBank bank{t_obs, t_fut, seed, {}};
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < feats.size(); ++i)
      if (km.assignment[i] == c) members.push_back(i);
    if (members.empty()) continue;
    const std::size_t m = medoid_index(feats, members);
    bank.entries.push_back({obs[m], fut[m], feats[m]});
  }
  return bank;
}

std::vector<Track> bank_tracks(const std::vector<data::VesselSample>& samples) {
  std::vector<Track> out;
  for (const auto& s : samples) {
    Track t = s.obs_ais.points;
    t.insert(t.end(), s.fut_ais.begin(), s.fut_ais.end());
    out.push_back(std::move(t));
  }
  return out;
}

double cosine_similarity(const Feature& a, const Feature& b) {
  if (a.size() != b.size()) throw DimensionError("cosine_similarity: feature lengths differ");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / (std::sqrt(na) * std::sqrt(nb) + kCosineEps);
}

SearchResult search(const TrajectoryBank& bank, const Track& obs) {
  if (bank.entries.empty()) throw DimensionError("search: empty bank");
  const Feature f = motion_feature(obs);
  SearchResult best{0, -std::numeric_limits<double>::infinity()};
  for (std::size_t k = 0; k < bank.entries.size(); ++k) {
    const double s = cosine_similarity(f, bank.entries[k].feat);
    if (s > best.similarity) best = {k, s};
  }
  return best;
}

Track align_prior(const BankEntry& entry, const Track& query_obs) {
  const Point2 q0 = query_obs.front(), q1 = query_obs.back();
  const Point2 k0 = entry.obs.front(), k1 = entry.obs.back();
  const double dq = std::hypot(q1.x - q0.x, q1.y - q0.y);
  const double dk = std::hypot(k1.x - k0.x, k1.y - k0.y);
  const double ratio = dk > 1e-8 ? dq / dk : 1.0;
  Track out;
  for (const auto& p : entry.fut) out.push_back({q1.x + (p.x - k1.x) * ratio, q1.y + (p.y - k1.y) * ratio});
  return out;
}

namespace {

json track_json(const Track& t) {
  json a = json::array();
  for (const auto& p : t) a.push_back({p.x, p.y});
  return a;
}

Track json_track(const json& j, const char* field) {
  if (!j.is_array()) throw ParseError(std::string("bank: field '") + field + "' must be an array of points");
  Track t;
  for (const auto& p : j) {
    if (!p.is_array() || p.size() != 2) throw ParseError(std::string("bank: field '") + field + "' has a malformed point");
    t.push_back({p[0].get<double>(), p[1].get<double>()});
  }
  return t;
}

}  // namespace

std::string bank_to_json(const TrajectoryBank& bank) {
  json entries = json::array();
  for (const auto& e : bank.entries) {
    entries.push_back({{"obs", track_json(e.obs)}, {"fut", track_json(e.fut)}, {"feat", e.feat}});
  }
  json j{{"header", {{"t_obs", bank.t_obs}, {"t_fut", bank.t_fut}, {"k", bank.entries.size()}, {"seed", bank.seed}}},
         {"entries", entries}};
  return j.dump();
}

TrajectoryBank bank_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (!j.contains("header") || !j.contains("entries")) throw ParseError("bank: missing 'header' or 'entries'");
    const json& h = j.at("header");
    TrajectoryBank b;
    b.t_obs = h.at("t_obs").get<std::size_t>();
    b.t_fut = h.at("t_fut").get<std::size_t>();
    b.seed = h.at("seed").get<std::uint64_t>();
    for (const auto& e : j.at("entries")) {
      BankEntry be{json_track(e.at("obs"), "obs"), json_track(e.at("fut"), "fut"), e.at("feat").get<Feature>()};
      if (be.obs.size() != b.t_obs || be.fut.size() != b.t_fut || be.feat.size() != 2 * b.t_obs) {
        throw ParseError("bank: entry lengths disagree with the header");
      }
      b.entries.push_back(std::move(be));
    }
    if (b.entries.size() != h.at("k").get<std::size_t>()) throw ParseError("bank: header k disagrees with entry count");
    return b;
  } catch (const json::exception& e) {
    throw ParseError(std::string("bank: ") + e.what());
  }
}

void save_bank(const std::filesystem::path& path, const TrajectoryBank& bank) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write bank file " + path.string());
  out << bank_to_json(bank) << '\n';
}

TrajectoryBank load_bank(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot read bank file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return bank_from_json(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

RefinementParams RefinementParams::create(ParamStore& store, const ModelConfig& cfg) {
  RefinementParams p;
  p.t_fut = cfg.t_fut;
  p.gamma_off = cfg.gamma_off;
  p.form = cfg.fusion;
  p.off1 = store.linear("vgtb.off1", 2 * cfg.t_fut + cfg.t_fut * cfg.d, 2 * cfg.d);
  p.off2 = store.linear("vgtb.off2", 2 * cfg.d, 2 * cfg.t_fut);
  p.gate = store.linear("vgtb.gate", cfg.d, 1);
  return p;
}

Refinement refine_and_fuse(const Tensor& base, const Tensor& prior, const Tensor& f_dec, const Tensor& f_enc,
                           const RefinementParams& p, std::optional<double> beta_override) {
  if (base.shape() != prior.shape() || base.rank() != 2 || base.dim(1) != 2) {
    throw DimensionError("refine_and_fuse: base " + num::shape_str(base.shape()) + " and prior " +
                         num::shape_str(prior.shape()) + " must both be [T x 2]");
  }
  const std::size_t t = base.dim(0);
  Refinement r;
  Tensor in = num::concat({num::reshape(prior, {2 * t}), num::reshape(f_dec, {f_dec.size()})}, 0);
  r.offset = num::reshape(p.off2(num::relu(p.off1(in))), {t, 2});
  r.refined = num::add(prior, num::scale(r.offset, p.gamma_off));
  r.beta = beta_override ? Tensor::from({1}, {*beta_override}) : num::sigmoid(p.gate(f_enc));
  const Tensor one_minus = num::add_scalar(num::scale(r.beta, -1.0), 1.0);
  if (p.form == FusionForm::prior_weighted) {
    r.output = num::add(num::scale_by(r.refined, r.beta), num::scale_by(base, one_minus));
  } else {
    r.output = num::add(num::scale_by(base, r.beta), num::scale_by(r.refined, one_minus));
  }
  return r;
}

}  // namespace cmivtp::model
