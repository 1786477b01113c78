#pragma once

#include <string>

#include <json.hpp>

#include "caag/model.hpp"
#include "caag/train.hpp"

namespace caag::config {

/// Everything a run needs, parsed strictly: unknown keys are rejected and
/// externally fixed hyperparameters (learning rates, lambda, beam width,
/// decay schedule, batch size, seed, dims, max_len) have no silent defaults.
struct RunConfig {
  // dims (vocab size comes from the vocabulary file)
  std::size_t d_h = 0, d_a = 0, d_e = 0, d_i = 0;

  // data paths
  std::string features;
  std::string manifest;
  std::string vocab;

  train::TrainConfig tcfg;

  std::size_t beam_width = 3;
  bool length_norm = false;

  model::Dims dims(std::size_t vocab_size) const {
    return model::Dims{vocab_size, d_h, d_a, d_e, d_i};
  }
};

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);
nlohmann::json run_config_json(const RunConfig& c);

}  // namespace caag::config
