#include "cmivtp/model/vstae.hpp"

#include <cmath>

#include "cmivtp/error.hpp"

namespace cmivtp::model {

using namespace num;

namespace {

ConvLayer conv_layer(ParamStore& store, const std::string& name, std::size_t c_in, std::size_t c_out) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(c_in * 9));
  return {store.uniform(name + ".w", {c_out, c_in, 3, 3}, bound), store.uniform(name + ".b", {c_out}, bound)};
}

Tensor row(const Tensor& v) { return reshape(v, {1, v.size()}); }

}  // namespace

VstaeParams VstaeParams::create(ParamStore& store, const ModelConfig& cfg) {
  VstaeParams p;
  p.c_f = cfg.c_f;
  p.roi = cfg.roi;
  p.phi = cfg.phi;
  const std::size_t d = cfg.d;
  p.stem[0] = conv_layer(store, "vstae.stem0", data::kSceneChannels, 8);
  p.stem[1] = conv_layer(store, "vstae.stem1", 8, cfg.c_f);
  p.stem[2] = conv_layer(store, "vstae.stem2", cfg.c_f, cfg.c_f);
  p.tar = store.linear("vstae.tar", cfg.c_f * cfg.roi * cfg.roi, d);
  p.glo = store.linear("vstae.glo", cfg.c_f, d / 2);
  p.bbox1 = store.linear("vstae.bbox1", 4, cfg.bbox_hidden);
  p.bbox2 = store.linear("vstae.bbox2", cfg.bbox_hidden, cfg.bbox_hidden);
  p.fus1 = store.linear("vstae.fus1", d + d / 2 + cfg.bbox_hidden, d);
  p.fus2 = store.linear("vstae.fus2", d, d);
  for (std::size_t l = 0; l < 2; ++l) {
    p.lstm[l] = conv_layer(store, "vstae.lstm" + std::to_string(l), 2 * cfg.c_f, 4 * cfg.c_f);
    auto b = p.lstm[l].b.mutable_data();
    for (std::size_t c = cfg.c_f; c < 2 * cfg.c_f; ++c) b[c] = 1.0;  // forget gate
  }
  p.temp = store.linear("vstae.temp", cfg.c_f, d);
  p.out1 = store.linear("vstae.out1", 2 * d, d);
  p.out2 = store.linear("vstae.out2", d, d);
  return p;
}

Tensor scene_tensor(const data::SceneFrame& scene) {
  std::vector<double> v(scene.raster.begin(), scene.raster.end());
  return Tensor::from({data::kSceneChannels, scene.height, scene.width}, std::move(v));
}

SpatialFeatures spatial_features(const data::SceneFrame& scene, const VstaeParams& p, RoiDiagnostics* diag) {
  if (scene.raster.size() != data::kSceneChannels * scene.height * scene.width) {
    throw DimensionError("scene raster holds " + std::to_string(scene.raster.size()) + " values for shape 3x" +
                         std::to_string(scene.height) + "x" + std::to_string(scene.width));
  }
  Tensor x = scene_tensor(scene);
  x = relu(conv2d(x, p.stem[0].w, p.stem[0].b, 2, 1));
  x = relu(conv2d(x, p.stem[1].w, p.stem[1].b, 2, 1));
  Tensor fmap = relu(conv2d(x, p.stem[2].w, p.stem[2].b, 1, 1));

  const RoiBox box{scene.bbox.x_min, scene.bbox.y_min, scene.bbox.x_max, scene.bbox.y_max};
  Tensor roi = roi_align(fmap, box, p.roi, 1.0 / static_cast<double>(kStemStride), diag);
  Tensor f_tar = p.tar(reshape(roi, {roi.size()}));
  Tensor f_glo = p.glo(global_avg_pool(fmap));
  const double w = static_cast<double>(scene.width), h = static_cast<double>(scene.height);
  Tensor bb = Tensor::from({4}, {scene.bbox.x_min / w, scene.bbox.y_min / h, scene.bbox.x_max / w, scene.bbox.y_max / h});
  Tensor f_bbox = p.bbox2(relu(p.bbox1(bb)));
  Tensor f_roi = p.fus2(relu(p.fus1(concat({f_tar, f_glo, f_bbox}, 0))));
  return {fmap, f_roi};
}

double temporal_weight(double phi, long t) { return std::exp(phi * static_cast<double>(t)); }

std::vector<Tensor> temporal_context(const std::vector<Tensor>& fmaps, const VstaeParams& p) {
  if (fmaps.empty()) throw DimensionError("temporal_context: empty sequence");
  const Shape state_shape{p.c_f, fmaps[0].dim(1), fmaps[0].dim(2)};
  std::array<Tensor, 2> h{Tensor::zeros(state_shape), Tensor::zeros(state_shape)};
  std::array<Tensor, 2> c{Tensor::zeros(state_shape), Tensor::zeros(state_shape)};
  const long n = static_cast<long>(fmaps.size());
  std::vector<Tensor> out;
  for (long t = 0; t < n; ++t) {
    const Tensor& f = fmaps[static_cast<std::size_t>(t)];
    if (f.shape() != state_shape) {
      throw DimensionError("temporal_context: frame " + std::to_string(t) + " has shape " + shape_str(f.shape()) +
                           ", expected " + shape_str(state_shape));
    }
    Tensor input = f;
    for (std::size_t l = 0; l < 2; ++l) {
      Tensor gates = conv2d(concat({input, h[l]}, 0), p.lstm[l].w, p.lstm[l].b, 1, 1);
      Tensor i = sigmoid(slice(gates, 0, 0, p.c_f));
      Tensor fg = sigmoid(slice(gates, 0, p.c_f, p.c_f));
      Tensor o = sigmoid(slice(gates, 0, 2 * p.c_f, p.c_f));
      Tensor g = num::tanh(slice(gates, 0, 3 * p.c_f, p.c_f));
      c[l] = add(mul(fg, c[l]), mul(i, g));
      h[l] = mul(o, num::tanh(c[l]));
      input = h[l];
    }
    const double w = temporal_weight(p.phi, t - (n - 1));
    out.push_back(scale(p.temp(global_avg_pool(h[1])), w));
  }
  return out;
}

Tensor vstae_forward(const std::vector<data::SceneFrame>& scenes, const VstaeParams& p, RoiDiagnostics* diag) {
  if (scenes.empty()) throw DimensionError("vstae_forward: no scene frames");
  std::vector<Tensor> fmaps, rois;
  for (const auto& s : scenes) {
    SpatialFeatures sf = spatial_features(s, p, diag);
    fmaps.push_back(sf.fmap);
    rois.push_back(sf.f_roi);
  }
  const std::vector<Tensor> temps = temporal_context(fmaps, p);
  std::vector<Tensor> rows;
  for (std::size_t t = 0; t < scenes.size(); ++t) {
    rows.push_back(row(p.out2(relu(p.out1(concat({rois[t], temps[t]}, 0))))));
  }
  return concat(rows, 0);
}

}  // namespace cmivtp::model
