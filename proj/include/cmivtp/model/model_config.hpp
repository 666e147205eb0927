#pragma once

#include <cstddef>
#include <vector>

#include "cmivtp/config.hpp"

namespace cmivtp::model {

enum class FusionForm { prior_weighted, base_weighted };

struct ModelConfig {
  std::size_t d = 32;
  std::size_t heads = 2;
  std::size_t c_f = 16;        // conv stem / ConvLSTM channels
  std::size_t roi = 7;         // RoI-Align output side
  std::size_t bbox_hidden = 64;
  std::size_t latent = 16;     // J
  std::size_t modes = 5;       // K
  std::size_t t_obs = 8;
  std::size_t t_fut = 36;
  double phi = 0.1;            // temporal decay
  double gamma_off = 0.5;      // offset scale in the bank refinement
  double coord_scale = 10.0;   // relative coordinates are multiplied by this
  double frame_width = 640;
  double frame_height = 480;
  bool use_cctv = true;
  bool use_scene = true;
  bool use_bank = true;
  // prior_weighted: beta * refined + (1 - beta) * base.
  // base_weighted:  beta * base + (1 - beta) * refined.
  FusionForm fusion = FusionForm::prior_weighted;

  static ModelConfig from_kv(const KeyValues& kv);
  KeyValues to_kv() const;
  void validate() const;

  // Flat numeric encoding stored inside checkpoints.
  std::vector<double> encode() const;
  static ModelConfig decode(const std::vector<double>& v);
};

}  // namespace cmivtp::model
