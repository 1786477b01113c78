#include "caag/runconfig.hpp"

#include <fstream>
#include <set>

namespace caag::config {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& allowed,
                    const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw Error("config: unknown key '" + it.key() + "' in " + where);
}

template <typename T>
T require(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key))
    throw Error("config: missing required key '" + key + "' in " + where);
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error("config: key '" + key + "' in " + where + " has the wrong type");
  }
}

metrics::RewardMetric parse_metric(const std::string& s) {
  if (s == "cider_d") return metrics::RewardMetric::CiderD;
  if (s == "bleu4") return metrics::RewardMetric::Bleu4;
  if (s == "rouge_l") return metrics::RewardMetric::RougeL;
  throw Error("config: unknown reward metric '" + s + "'");
}

std::string metric_name(metrics::RewardMetric m) {
  switch (m) {
    case metrics::RewardMetric::CiderD: return "cider_d";
    case metrics::RewardMetric::Bleu4: return "bleu4";
    case metrics::RewardMetric::RougeL: return "rouge_l";
  }
  return "cider_d";
}

}  // namespace

RunConfig parse_run_config(const json& j) {
  reject_unknown(j, {"dims", "data", "train", "decode"}, "top level");
  RunConfig c;

  const json& dims = j.at("dims");
  reject_unknown(dims, {"d_h", "d_a", "d_e", "d_i"}, "dims");
  c.d_h = require<std::size_t>(dims, "d_h", "dims");
  c.d_a = require<std::size_t>(dims, "d_a", "dims");
  c.d_e = require<std::size_t>(dims, "d_e", "dims");
  c.d_i = require<std::size_t>(dims, "d_i", "dims");
  if (!c.d_h || !c.d_a || !c.d_e || !c.d_i)
    throw Error("config: all dims must be positive");

  const json& data = j.at("data");
  reject_unknown(data, {"features", "manifest", "vocab"}, "data");
  c.features = require<std::string>(data, "features", "data");
  c.manifest = require<std::string>(data, "manifest", "data");
  c.vocab = require<std::string>(data, "vocab", "data");

  const json& tr = j.at("train");
  reject_unknown(tr,
                 {"phase", "epochs", "batch_size", "lr_xe", "lr_rl", "lr_decay",
                  "lr_decay_every", "gamma", "lambda", "seed", "max_len",
                  "caag_mode", "enable_caag", "stop_gradient_to_primary",
                  "caag_xe_warmup", "xe_ref_mode", "clip_norm", "reward_metric"},
                 "train");
  std::string phase = require<std::string>(tr, "phase", "train");
  if (phase == "xe")
    c.tcfg.phase = train::TrainConfig::Phase::XE;
  else if (phase == "rl")
    c.tcfg.phase = train::TrainConfig::Phase::RL;
  else
    throw Error("config: phase must be 'xe' or 'rl', got '" + phase + "'");
  c.tcfg.epochs = require<int>(tr, "epochs", "train");
  c.tcfg.batch_size = require<int>(tr, "batch_size", "train");
  c.tcfg.lr_xe = require<double>(tr, "lr_xe", "train");
  c.tcfg.lr_rl = require<double>(tr, "lr_rl", "train");
  c.tcfg.lr_decay = require<double>(tr, "lr_decay", "train");
  c.tcfg.lr_decay_every = require<int>(tr, "lr_decay_every", "train");
  c.tcfg.gamma = require<double>(tr, "gamma", "train");
  c.tcfg.lambda = require<double>(tr, "lambda", "train");
  c.tcfg.seed = require<std::uint64_t>(tr, "seed", "train");
  c.tcfg.max_len = require<std::size_t>(tr, "max_len", "train");
  if (c.tcfg.lr_xe <= 0 || c.tcfg.lr_rl <= 0)
    throw Error("config: learning rates must be positive");
  if (c.tcfg.epochs < 0 || c.tcfg.batch_size < 1)
    throw Error("config: epochs must be >= 0 and batch_size >= 1");
  if (!(c.tcfg.gamma >= 0) || !std::isfinite(c.tcfg.gamma))
    throw Error("config: gamma must be finite and non-negative");
  if (!(c.tcfg.lambda >= 0) || !std::isfinite(c.tcfg.lambda))
    throw Error("config: lambda must be finite and non-negative");

  std::string mode = tr.value("caag_mode", std::string("advantage"));
  if (mode == "advantage")
    c.tcfg.caag_mode = train::TrainConfig::CaagMode::Advantage;
  else if (mode == "constant")
    c.tcfg.caag_mode = train::TrainConfig::CaagMode::Constant;
  else
    throw Error("config: caag_mode must be 'advantage' or 'constant'");
  c.tcfg.enable_caag = tr.value("enable_caag", true);
  c.tcfg.stop_gradient_to_primary = tr.value("stop_gradient_to_primary", false);
  c.tcfg.caag_xe_warmup = tr.value("caag_xe_warmup", false);
  std::string ref_mode = tr.value("xe_ref_mode", std::string("all"));
  if (ref_mode == "first")
    c.tcfg.xe_first_ref_only = true;
  else if (ref_mode == "all")
    c.tcfg.xe_first_ref_only = false;
  else
    throw Error("config: xe_ref_mode must be 'all' or 'first'");
  c.tcfg.clip_norm = tr.value("clip_norm", 5.0);
  c.tcfg.reward_metric =
      parse_metric(tr.value("reward_metric", std::string("cider_d")));

  const json& dec = j.at("decode");
  reject_unknown(dec, {"beam_width", "length_norm"}, "decode");
  c.beam_width = require<std::size_t>(dec, "beam_width", "decode");
  if (c.beam_width < 1) throw Error("config: beam_width must be >= 1");
  c.length_norm = dec.value("length_norm", false);

  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("config: cannot open '" + path + "'");
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw Error("config: '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_run_config(j);
}

nlohmann::json run_config_json(const RunConfig& c) {
  json j;
  j["dims"] = {{"d_h", c.d_h}, {"d_a", c.d_a}, {"d_e", c.d_e}, {"d_i", c.d_i}};
  j["data"] = {{"features", c.features}, {"manifest", c.manifest}, {"vocab", c.vocab}};
  j["train"] = {
      {"phase", c.tcfg.phase == train::TrainConfig::Phase::XE ? "xe" : "rl"},
      {"epochs", c.tcfg.epochs},
      {"batch_size", c.tcfg.batch_size},
      {"lr_xe", c.tcfg.lr_xe},
      {"lr_rl", c.tcfg.lr_rl},
      {"lr_decay", c.tcfg.lr_decay},
      {"lr_decay_every", c.tcfg.lr_decay_every},
      {"gamma", c.tcfg.gamma},
      {"lambda", c.tcfg.lambda},
      {"seed", c.tcfg.seed},
      {"max_len", c.tcfg.max_len},
      {"caag_mode",
       c.tcfg.caag_mode == train::TrainConfig::CaagMode::Advantage ? "advantage"
                                                                   : "constant"},
      {"enable_caag", c.tcfg.enable_caag},
      {"stop_gradient_to_primary", c.tcfg.stop_gradient_to_primary},
      {"caag_xe_warmup", c.tcfg.caag_xe_warmup},
      {"xe_ref_mode", c.tcfg.xe_first_ref_only ? "first" : "all"},
      {"clip_norm", c.tcfg.clip_norm},
      {"reward_metric", metric_name(c.tcfg.reward_metric)}};
  j["decode"] = {{"beam_width", c.beam_width}, {"length_norm", c.length_norm}};
  return j;
}

}  // namespace caag::config
