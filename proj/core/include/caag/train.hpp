#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "caag/adam.hpp"
#include "caag/data.hpp"
#include "caag/decode.hpp"
#include "caag/metrics.hpp"
#include "caag/model.hpp"
#include "caag/updown.hpp"

namespace caag::train {

struct TrainConfig {
  enum class Phase { XE, RL };
  enum class CaagMode { Advantage, Constant };

  Phase phase = Phase::XE;
  int epochs = 1;
  int batch_size = 8;
  double lr_xe = 5e-4;
  double lr_rl = 5e-5;
  double lr_decay = 0.1;
  int lr_decay_every = 50;
  double gamma = 1.0;   // weight of the auxiliary objective
  double lambda = 0.5;  // inference trade-off (carried for validation decode)
  bool enable_caag = true;
  CaagMode caag_mode = CaagMode::Advantage;  // Constant reproduces CAAG-C
  bool stop_gradient_to_primary = false;
  bool caag_xe_warmup = false;
  bool xe_first_ref_only = false;
  double clip_norm = 5.0;
  metrics::RewardMetric reward_metric = metrics::RewardMetric::CiderD;
  std::size_t max_len = corpus::kMaxLen;
  std::uint64_t seed = 0;
};

/// RL learning-rate schedule: decays by `decay` every `every` epochs
/// (1-based; epochs 1..50 run at the base rate, epoch 51 at 0.1x).
double lr_for_epoch(double base, int epoch, double decay, int every);

struct EpochStats {
  int epoch = 0;
  std::string phase;
  double mean_loss = 0.0;
  double mean_reward = 0.0;
  double mean_advantage = 0.0;
  double tf_accuracy = 0.0;
  double val_cider = 0.0;
  double wall_seconds = 0.0;
  double lr = 0.0;
};

/// Cross-entropy over one teacher-forced sequence: -sum_t log p1_t(gt[t+1]).
diff::Var xe_loss(diff::Tape& t, const std::vector<diff::Var>& p1_seq,
                  const std::vector<int>& gt);

/// One on-graph sampled rollout (the Monte-Carlo sample of the policy).
/// Tokens are drawn from the decode distribution (BOS/PAD excluded); the
/// log-prob Vars come from the same distribution so the surrogate gradient
/// matches the sampling policy.
struct SampledRollout {
  std::vector<int> tokens;
  std::vector<diff::Var> logp;
  std::vector<diff::Var> h2;
};

SampledRollout sample_rollout(diff::Tape& t, model::Model& m, diff::Var features,
                              std::size_t max_len, Rng& rng);

struct ScstOut {
  diff::Var loss;  // -A * sum_t log p(y_t); gradient equals the REINFORCE estimate
  metrics::RewardRecord reward;
  SampledRollout rollout;
  std::vector<int> greedy;
};

/// Sample, greedy-decode the baseline, and build the self-critical surrogate.
ScstOut scst_step(diff::Tape& t, model::Model& m, const Tensor& features,
                  const std::vector<std::vector<int>>& refs,
                  const metrics::IdfCorpus& idf, Rng& rng,
                  metrics::RewardMetric metric, std::size_t max_len);

/// Auxiliary objective surrogate: -weight * sum_t log p2_t(y_{t+1} | Y) with
/// the target position masked in the semantic attention. Steps where the mask
/// would eliminate the whole context are skipped. weight is the advantage
/// (or 1 in constant mode). stop_gradient detaches h2 and the context
/// embeddings so nothing flows back into the primary network.
diff::Var caag_loss(diff::Tape& t, model::Model& m, const SampledRollout& rollout,
                    double weight, bool stop_gradient);

class TrainAbort : public Error {
public:
  explicit TrainAbort(const std::string& what) : Error(what) {}
};

/// Drives one phase (XE or RL) over a dataset. Epochs are 1-based; the
/// caller owns logging and checkpointing.
class Trainer {
public:
  Trainer(model::Model& m, corpus::Dataset train_set, corpus::Dataset val_set,
          metrics::IdfCorpus idf, TrainConfig cfg);

  EpochStats run_epoch(int epoch);

  double validation_cider();

  diff::Adam& optimizer() { return opt_; }
  Rng& rng() { return rng_; }
  const TrainConfig& config() const { return cfg_; }

private:
  EpochStats xe_epoch(int epoch);
  EpochStats rl_epoch(int epoch);

  model::Model& m_;
  corpus::Dataset train_;
  corpus::Dataset val_;
  metrics::IdfCorpus idf_;
  TrainConfig cfg_;
  std::vector<diff::Parameter*> opt_params_;
  diff::Adam opt_;
  Rng rng_;
};

}  // namespace caag::train
