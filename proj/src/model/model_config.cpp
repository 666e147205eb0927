#include "cmivtp/model/model_config.hpp"

#include <sstream>

#include "cmivtp/error.hpp"

namespace cmivtp::model {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

ModelConfig ModelConfig::from_kv(const KeyValues& kv) {
  ModelConfig c;
  auto sz = [&](const char* key, std::size_t fallback) {
    const long long v = kv.get_int(key, static_cast<long long>(fallback));
    if (v < 0) throw ConfigError(std::string(key) + " must be non-negative");
    return static_cast<std::size_t>(v);
  };
  c.d = sz("d", c.d);
  c.heads = sz("heads", c.heads);
  c.c_f = sz("c_f", c.c_f);
  c.roi = sz("roi", c.roi);
  c.bbox_hidden = sz("bbox_hidden", c.bbox_hidden);
  c.latent = sz("latent", c.latent);
  c.modes = sz("modes", c.modes);
  c.t_obs = sz("t_obs", c.t_obs);
  c.t_fut = sz("t_fut", c.t_fut);
  c.phi = kv.get_double("phi", c.phi);
  c.gamma_off = kv.get_double("gamma_off", c.gamma_off);
  c.coord_scale = kv.get_double("coord_scale", c.coord_scale);
  c.frame_width = kv.get_double("frame_width", c.frame_width);
  c.frame_height = kv.get_double("frame_height", c.frame_height);
  c.use_cctv = kv.get_bool("use_cctv", c.use_cctv);
  c.use_scene = kv.get_bool("use_scene", c.use_scene);
  c.use_bank = kv.get_bool("use_bank", c.use_bank);
  const std::string fusion = kv.get_string("fusion", "prior_weighted");
  if (fusion == "prior_weighted") {
    c.fusion = FusionForm::prior_weighted;
  } else if (fusion == "base_weighted") {
    c.fusion = FusionForm::base_weighted;
  } else {
    throw ConfigError("fusion must be prior_weighted or base_weighted, got '" + fusion + "'");
  }
  c.validate();
  return c;
}

KeyValues ModelConfig::to_kv() const {
  KeyValues kv;
  kv.set("d", std::to_string(d));
  kv.set("heads", std::to_string(heads));
  kv.set("c_f", std::to_string(c_f));
  kv.set("roi", std::to_string(roi));
  kv.set("bbox_hidden", std::to_string(bbox_hidden));
  kv.set("latent", std::to_string(latent));
  kv.set("modes", std::to_string(modes));
  kv.set("t_obs", std::to_string(t_obs));
  kv.set("t_fut", std::to_string(t_fut));
  kv.set("phi", fmt(phi));
  kv.set("gamma_off", fmt(gamma_off));
  kv.set("coord_scale", fmt(coord_scale));
  kv.set("frame_width", fmt(frame_width));
  kv.set("frame_height", fmt(frame_height));
  kv.set("use_cctv", use_cctv ? "true" : "false");
  kv.set("use_scene", use_scene ? "true" : "false");
  kv.set("use_bank", use_bank ? "true" : "false");
  kv.set("fusion", fusion == FusionForm::prior_weighted ? "prior_weighted" : "base_weighted");
  return kv;
}

void ModelConfig::validate() const {
  if (d == 0 || heads == 0 || d % heads != 0) throw ConfigError("d must be a positive multiple of heads");
  if (d % 2 != 0) throw ConfigError("d must be even");
  if (c_f == 0 || roi == 0 || bbox_hidden == 0) throw ConfigError("c_f, roi and bbox_hidden must be positive");
  if (latent == 0 || modes == 0) throw ConfigError("latent and modes must be positive");
  if (t_obs < 1 || t_fut < 1) throw ConfigError("t_obs and t_fut must be positive");
  if (!(phi > 0)) throw ConfigError("phi must be > 0");
  if (!(coord_scale > 0)) throw ConfigError("coord_scale must be > 0");
  if (!(frame_width > 0) || !(frame_height > 0)) throw ConfigError("frame size must be positive");
}

std::vector<double> ModelConfig::encode() const {
  return {static_cast<double>(d),      static_cast<double>(heads),      static_cast<double>(c_f),
          static_cast<double>(roi),    static_cast<double>(bbox_hidden), static_cast<double>(latent),
          static_cast<double>(modes),  static_cast<double>(t_obs),       static_cast<double>(t_fut),
          phi,                         gamma_off,                        coord_scale,
          frame_width,                 frame_height,                     use_cctv ? 1.0 : 0.0,
          use_scene ? 1.0 : 0.0,       use_bank ? 1.0 : 0.0,
          fusion == FusionForm::prior_weighted ? 0.0 : 1.0};
}

ModelConfig ModelConfig::decode(const std::vector<double>& v) {
  if (v.size() != 18) throw CheckpointError("model config record has " + std::to_string(v.size()) + " fields, expected 18");
  auto sz = [&](std::size_t i) { return static_cast<std::size_t>(v[i]); };
  ModelConfig c;
  c.d = sz(0);
  c.heads = sz(1);
  c.c_f = sz(2);
  c.roi = sz(3);
  c.bbox_hidden = sz(4);
  c.latent = sz(5);
  c.modes = sz(6);
  c.t_obs = sz(7);
  c.t_fut = sz(8);
  c.phi = v[9];
  c.gamma_off = v[10];
  c.coord_scale = v[11];
  c.frame_width = v[12];
  c.frame_height = v[13];
  c.use_cctv = v[14] != 0.0;
  c.use_scene = v[15] != 0.0;
  c.use_bank = v[16] != 0.0;
  c.fusion = v[17] == 0.0 ? FusionForm::prior_weighted : FusionForm::base_weighted;
  c.validate();
  return c;
}

}  // namespace cmivtp::model
