#include "caag/train.hpp"

#include <chrono>
#include <cmath>

#include "caag/auxnet.hpp"
#include "caag/vocab.hpp"

namespace caag::train {

using namespace caag::diff;

double lr_for_epoch(double base, int epoch, double decay, int every) {
  if (epoch < 1 || every < 1) return base;
  int k = (epoch - 1) / every;
  return base * std::pow(decay, static_cast<double>(k));
}

Var xe_loss(Tape& t, const std::vector<Var>& p1_seq, const std::vector<int>& gt) {
  if (gt.size() != p1_seq.size() + 1)
    throw Error("xe_loss: got " + std::to_string(p1_seq.size()) +
                " distributions for " + std::to_string(gt.size()) + " tokens");
  Var total = t.input(Tensor::scalar(0.0));
  for (std::size_t step = 0; step < p1_seq.size(); ++step)
    total = add(total, log_floor(pick(p1_seq[step], gt[step + 1])));
  return scale(total, -1.0);
}

namespace {

std::vector<bool> caption_token_mask(std::size_t vocab) {
  std::vector<bool> mask(vocab, false);
  mask[corpus::kBos] = true;
  mask[corpus::kPad] = true;
  return mask;
}

void prime_grads(const std::vector<Parameter*>& params) {
  for (Parameter* p : params) {
    p->grad.fill(0.0);
    p->grad_ready = true;
  }
}

}  // namespace

SampledRollout sample_rollout(Tape& t, model::Model& m, Var features,
                              std::size_t max_len, Rng& rng) {
  const std::vector<bool> vocab_mask = caption_token_mask(m.dims.vocab);
  Var v_mean = updown::mean_pool(t, features);
  updown::StateVars state = updown::zero_state(t, m.dims.d_h);

  SampledRollout out;
  int prev = corpus::kBos;
  for (std::size_t step = 0; step < max_len; ++step) {
    updown::StepVars sv = updown::primary_step(t, m, prev, state, features, v_mean);
    Var probs = softmax(mask_fill(sv.logits, vocab_mask, -1e9));
    int tok = static_cast<int>(rng.multinomial(t.val(probs).v));
    out.tokens.push_back(tok);
    out.logp.push_back(log_floor(pick(probs, tok)));
    out.h2.push_back(sv.state.h2);
    state = sv.state;
    prev = tok;
    if (tok == corpus::kEos) break;
  }
  return out;
}

ScstOut scst_step(Tape& t, model::Model& m, const Tensor& features,
                  const std::vector<std::vector<int>>& refs,
                  const metrics::IdfCorpus& idf, Rng& rng,
                  metrics::RewardMetric metric, std::size_t max_len) {
  Var feats = t.input(features);
  ScstOut out;
  out.rollout = sample_rollout(t, m, feats, max_len, rng);
  out.greedy = decode::greedy_primary(m, features, max_len).tokens;

  out.reward = metrics::advantage(corpus::strip_specials(out.rollout.tokens),
                                  corpus::strip_specials(out.greedy), refs, idf,
                                  metric);

  Var sum_logp = t.input(Tensor::scalar(0.0));
  for (Var lp : out.rollout.logp) sum_logp = add(sum_logp, lp);
  out.loss = scale(sum_logp, -out.reward.advantage);
  return out;
}

Var caag_loss(Tape& t, model::Model& m, const SampledRollout& rollout,
              double weight, bool stop_gradient) {
  const std::vector<int>& ctx = rollout.tokens;
  std::size_t T = ctx.size();
  if (rollout.h2.size() != T)
    throw Error("caag_loss: rollout carries " + std::to_string(rollout.h2.size()) +
                " hidden states for " + std::to_string(T) + " tokens");

  Var total = t.input(Tensor::scalar(0.0));
  if (T < 2) return total;  // masking would eliminate the whole context

  const std::vector<bool> vocab_mask = caption_token_mask(m.dims.vocab);
  Var ctx_emb = nn::embed_lookup(t, m.embed, ctx);
  if (stop_gradient) ctx_emb = detach(ctx_emb);

  Var h3 = t.input(Tensor::zeros({m.dims.d_h}));
  Var c3 = h3;
  for (std::size_t step = 0; step < T; ++step) {
    Var h2 = stop_gradient ? detach(rollout.h2[step]) : rollout.h2[step];
    aux::SemanticOut sem = aux::semantic_attention(t, m, ctx_emb, h2, step);
    aux::AuxStepVars av = aux::caag_step(t, m, sem.context, h2, h3, c3);
    Var p2 = softmax(mask_fill(av.logits, vocab_mask, -1e9));
    total = add(total, log_floor(pick(p2, ctx[step])));
    h3 = av.h3;
    c3 = av.c3;
  }
  return scale(total, -weight);
}

Trainer::Trainer(model::Model& m, corpus::Dataset train_set, corpus::Dataset val_set,
                 metrics::IdfCorpus idf, TrainConfig cfg)
    : m_(m),
      train_(std::move(train_set)),
      val_(std::move(val_set)),
      idf_(std::move(idf)),
      cfg_(cfg),
      opt_params_(cfg.phase == TrainConfig::Phase::RL
                      ? m.all_params()
                      : (cfg.caag_xe_warmup ? m.all_params() : m.primary_params())),
      opt_(opt_params_,
           AdamConfig{cfg.phase == TrainConfig::Phase::RL ? cfg.lr_rl : cfg.lr_xe}),
      rng_(cfg.seed) {
  if (train_.size() == 0) throw Error("trainer: empty training split");
}

EpochStats Trainer::run_epoch(int epoch) {
  return cfg_.phase == TrainConfig::Phase::XE ? xe_epoch(epoch) : rl_epoch(epoch);
}

double Trainer::validation_cider() {
  if (val_.size() == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < val_.size(); ++i) {
    auto decoded =
        decode::greedy_primary(m_, val_.features[i].features, cfg_.max_len);
    total += metrics::cider_d(corpus::strip_specials(decoded.tokens),
                              val_.entries[i].refs, idf_);
  }
  return total / static_cast<double>(val_.size());
}

EpochStats Trainer::xe_epoch(int epoch) {
  auto start = std::chrono::steady_clock::now();
  EpochStats st;
  st.epoch = epoch;
  st.phase = "xe";
  st.lr = cfg_.lr_xe;
  opt_.set_lr(st.lr);

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < train_.size(); ++i) {
    std::size_t n_refs = cfg_.xe_first_ref_only ? 1 : train_.entries[i].refs.size();
    for (std::size_t r = 0; r < n_refs; ++r) pairs.emplace_back(i, r);
  }
  rng_.shuffle(pairs);

  double loss_sum = 0.0;
  long correct = 0, predicted = 0;
  std::size_t done = 0;
  while (done < pairs.size()) {
    std::size_t n = std::min<std::size_t>(cfg_.batch_size, pairs.size() - done);
    prime_grads(opt_params_);
    for (std::size_t b = 0; b < n; ++b) {
      auto [img, ref] = pairs[done + b];
      std::vector<int> gt;
      gt.push_back(corpus::kBos);
      for (int tok : train_.entries[img].refs[ref]) gt.push_back(tok);
      gt.push_back(corpus::kEos);

      Tape tape;
      Var feats = tape.input(train_.features[img].features);
      updown::Rollout ro =
          updown::teacher_forced_rollout(tape, m_, feats, gt, cfg_.max_len);
      Var loss = xe_loss(tape, ro.p1, gt);
      if (cfg_.caag_xe_warmup) {
        SampledRollout gt_ctx;
        gt_ctx.tokens.assign(gt.begin() + 1, gt.end());
        gt_ctx.h2 = ro.h2;
        loss = add(loss, scale(caag_loss(tape, m_, gt_ctx, 1.0,
                                         cfg_.stop_gradient_to_primary),
                               cfg_.gamma));
      }

      double lv = tape.val(loss).at(0);
      if (!std::isfinite(lv))
        throw TrainAbort("xe epoch " + std::to_string(epoch) +
                         ": non-finite loss on image '" +
                         train_.entries[img].image_id + "'");
      loss_sum += lv;

      for (std::size_t step = 0; step < ro.p1.size(); ++step) {
        const Tensor& p = tape.val(ro.p1[step]);
        std::size_t best = 0;
        for (std::size_t k = 1; k < p.numel(); ++k)
          if (p.at(k) > p.at(best)) best = k;
        correct += static_cast<int>(best) == gt[step + 1] ? 1 : 0;
        predicted += 1;
      }

      tape.backward(scale(loss, 1.0 / static_cast<double>(n)));
    }
    clip_global_norm(opt_params_, cfg_.clip_norm);
    opt_.step();
    done += n;
  }

  st.mean_loss = loss_sum / static_cast<double>(pairs.size());
  st.tf_accuracy =
      predicted > 0 ? static_cast<double>(correct) / static_cast<double>(predicted) : 0.0;
  st.val_cider = validation_cider();
  st.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return st;
}

EpochStats Trainer::rl_epoch(int epoch) {
  auto start = std::chrono::steady_clock::now();
  EpochStats st;
  st.epoch = epoch;
  st.phase = "rl";
  st.lr = lr_for_epoch(cfg_.lr_rl, epoch, cfg_.lr_decay, cfg_.lr_decay_every);
  opt_.set_lr(st.lr);

  std::vector<std::size_t> order(train_.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng_.shuffle(order);

  double loss_sum = 0.0, reward_sum = 0.0, adv_sum = 0.0;
  std::size_t done = 0;
  while (done < order.size()) {
    std::size_t n = std::min<std::size_t>(cfg_.batch_size, order.size() - done);
    prime_grads(opt_params_);
    for (std::size_t b = 0; b < n; ++b) {
      std::size_t img = order[done + b];
      Tape tape;
      ScstOut s = scst_step(tape, m_, train_.features[img].features,
                            train_.entries[img].refs, idf_, rng_,
                            cfg_.reward_metric, cfg_.max_len);
      Var total = s.loss;
      if (cfg_.enable_caag) {
        double w = cfg_.caag_mode == TrainConfig::CaagMode::Constant
                       ? 1.0
                       : s.reward.advantage;
        total = add(total, scale(caag_loss(tape, m_, s.rollout, w,
                                           cfg_.stop_gradient_to_primary),
                                 cfg_.gamma));
      }
      double lv = tape.val(total).at(0);
      if (!std::isfinite(lv))
        throw TrainAbort("rl epoch " + std::to_string(epoch) +
                         ": non-finite loss on image '" +
                         train_.entries[img].image_id + "'");
      loss_sum += lv;
      reward_sum += s.reward.r_sample;
      adv_sum += s.reward.advantage;

      tape.backward(scale(total, 1.0 / static_cast<double>(n)));
    }
    clip_global_norm(opt_params_, cfg_.clip_norm);
    opt_.step();
    done += n;
  }

  st.mean_loss = loss_sum / static_cast<double>(order.size());
  st.mean_reward = reward_sum / static_cast<double>(order.size());
  st.mean_advantage = adv_sum / static_cast<double>(order.size());
  st.val_cider = validation_cider();
  st.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return st;
}

}  // namespace caag::train
