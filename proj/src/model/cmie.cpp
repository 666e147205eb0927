#include "cmivtp/model/cmie.hpp"

#include <cmath>

#include "cmivtp/error.hpp"

namespace cmivtp::model {

using namespace num;

Tensor attention(const Tensor& zq, const Tensor& zkv, const AttentionParams& p, std::vector<Tensor>* weights) {
  if (zq.rank() != 2 || zkv.rank() != 2 || zq.dim(1) != zkv.dim(1)) {
    throw DimensionError("attention: query " + shape_str(zq.shape()) + " and memory " + shape_str(zkv.shape()) +
                         " must be [T x d] with equal d");
  }
  const Tensor q = p.q(zq), k = p.k(zkv), v = p.v(zkv);
  if (k.dim(0) != v.dim(0)) throw DimensionError("attention: keys and values differ in length");
  const std::size_t d = q.dim(1);
  const std::size_t dk = d / p.heads;
  const double inv = 1.0 / std::sqrt(static_cast<double>(dk));
  std::vector<Tensor> heads;
  for (std::size_t h = 0; h < p.heads; ++h) {
    Tensor qh = slice(q, 1, h * dk, dk);
    Tensor kh = slice(k, 1, h * dk, dk);
    Tensor vh = slice(v, 1, h * dk, dk);
    Tensor a = softmax(scale(matmul(qh, transpose(kh)), inv), 1);
    if (weights) weights->push_back(a);
    heads.push_back(matmul(a, vh));
  }
  return p.o(p.heads == 1 ? heads[0] : concat(heads, 1));
}

Tensor cmit_block(const Tensor& z1, const Tensor& z2, const CmitParams& p) {
  Tensor a = layer_norm(add(z1, attention(z1, z1, p.sa)), p.ln_gain[0], p.ln_bias[0]);
  Tensor b = layer_norm(add(a, attention(a, z2, p.ca)), p.ln_gain[1], p.ln_bias[1]);
  return layer_norm(add(b, p.ff2(relu(p.ff1(b)))), p.ln_gain[2], p.ln_bias[2]);
}

namespace {

AttentionParams create_attention(ParamStore& store, const std::string& name, std::size_t d, std::size_t heads) {
  AttentionParams a;
  a.q = store.linear(name + ".q", d, d);
  // A key bias shifts every logit of a query equally, so softmax ignores it.
  a.k = store.linear_no_bias(name + ".k", d, d);
  a.v = store.linear(name + ".v", d, d);
  a.o = store.linear(name + ".o", d, d);
  a.heads = heads;
  return a;
}

}  // namespace

CmitParams create_cmit(ParamStore& store, const std::string& name, std::size_t d, std::size_t heads) {
  if (heads == 0 || d % heads != 0) throw ConfigError("d must be divisible by the head count");
  CmitParams c;
  c.sa = create_attention(store, name + ".sa", d, heads);
  c.ca = create_attention(store, name + ".ca", d, heads);
  c.ff1 = store.linear(name + ".ff1", d, 4 * d);
  c.ff2 = store.linear(name + ".ff2", 4 * d, d);
  for (int i = 0; i < 3; ++i) {
    c.ln_gain[i] = store.constant(name + ".ln" + std::to_string(i) + ".gain", {d}, 1.0);
    c.ln_bias[i] = store.constant(name + ".ln" + std::to_string(i) + ".bias", {d}, 0.0);
  }
  return c;
}

CmieParams CmieParams::create(ParamStore& store, const ModelConfig& cfg) {
  CmieParams p;
  p.d = cfg.d;
  p.g_ais = store.linear("cmie.g_ais", 3, cfg.d);
  p.g_cctv = store.linear("cmie.g_cctv", 2, cfg.d);
  p.mask_token = store.uniform("cmie.mask_token", {cfg.d}, 1.0);
  p.traj_stage = create_cmit(store, "cmie.traj", cfg.d, cfg.heads);
  p.scene_stage = create_cmit(store, "cmie.scene", cfg.d, cfg.heads);
  return p;
}

Tensor positional_encoding(std::size_t t, std::size_t d) {
  std::vector<double> v(t * d);
  for (std::size_t pos = 0; pos < t; ++pos) {
    for (std::size_t i = 0; i < d; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(d));
      const double a = static_cast<double>(pos) * freq;
      v[pos * d + i] = i % 2 == 0 ? std::sin(a) : std::cos(a);
    }
  }
  return Tensor::from({t, d}, std::move(v));
}

Tensor embed_ais(const Tensor& ais, const std::vector<bool>& available, const CmieParams& p) {
  if (ais.rank() != 2 || ais.dim(1) != 2 || available.size() != ais.dim(0)) {
    throw DimensionError("embed_ais: track " + shape_str(ais.shape()) + " with " + std::to_string(available.size()) +
                         " availability flags");
  }
  const std::size_t t = ais.dim(0);
  std::vector<Tensor> rows;
  for (std::size_t i = 0; i < t; ++i) {
    if (available[i]) {
      Tensor pt = concat({reshape(slice(ais, 0, i, 1), {2}), Tensor::from({1}, {1.0})}, 0);
      rows.push_back(reshape(p.g_ais(pt), {1, p.d}));
    } else {
      rows.push_back(reshape(p.mask_token, {1, p.d}));
    }
  }
  return add(concat(rows, 0), positional_encoding(t, p.d));
}

Tensor embed_cctv(const Tensor& cctv, const CmieParams& p) {
  if (cctv.rank() != 2 || cctv.dim(1) != 2) throw DimensionError("embed_cctv: expected [T x 2], got " + shape_str(cctv.shape()));
  return add(p.g_cctv(cctv), positional_encoding(cctv.dim(0), p.d));
}

FusedFeatures encode_and_fuse(const Tensor& ais, const std::vector<bool>& available, const Tensor& cctv,
                              const Tensor& scene_features, const CmieParams& p) {
  Tensor fused = embed_ais(ais, available, p);
  bool attended = false;
  if (cctv.defined()) {
    fused = cmit_block(fused, embed_cctv(cctv, p), p.traj_stage);
    attended = true;
  }
  if (scene_features.defined()) {
    fused = cmit_block(fused, scene_features, p.scene_stage);
    attended = true;
  }
  if (!attended) fused = cmit_block(fused, fused, p.traj_stage);
  return {fused, mean_axis(fused, 0)};
}

}  // namespace cmivtp::model
