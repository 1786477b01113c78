// caag: synthesize data, build vocabularies, train, decode and evaluate the
// context-aware captioner. All outputs are JSON/JSON-lines; binary formats
// (FVEC features, CKPT checkpoints) are documented in the README.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "caag/checkpoint.hpp"
#include "caag/data.hpp"
#include "caag/decode.hpp"
#include "caag/evaluate.hpp"
#include "caag/gradsuite.hpp"
#include "caag/metrics.hpp"
#include "caag/model.hpp"
#include "caag/runconfig.hpp"
#include "caag/synth.hpp"
#include "caag/train.hpp"
#include "caag/vocab.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int error_code(const caag::Error& e) {
  return std::string(e.what()).find("cannot open") != std::string::npos ? 2 : 1;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw caag::Error("output: cannot open '" + path + "' for writing");
  os << text;
}

void emit(const std::string& out_path, const json& j) {
  if (out_path.empty())
    std::cout << j.dump(2) << "\n";
  else
    write_text(out_path, j.dump(2) + "\n");
}

std::vector<std::vector<caag::metrics::TokenSeq>> split_refs(
    const caag::corpus::Dataset& d) {
  std::vector<std::vector<caag::metrics::TokenSeq>> out;
  out.reserve(d.size());
  for (const auto& e : d.entries) out.push_back(e.refs);
  return out;
}

// ---------------------------------------------------------------------------
// synth / build-vocab
// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string out_features = "features.fvec";
  std::string out_captions = "captions.json";
  std::uint64_t seed = 42;
  int images = 50;
  int max_objects = 4;
  double noise_sigma = 0.1;
};

int cmd_synth(const SynthArgs& a) {
  caag::corpus::SynthConfig cfg;
  cfg.n_images = a.images;
  cfg.max_objects = a.max_objects;
  cfg.noise_sigma = a.noise_sigma;
  caag::corpus::SynthOutput out = caag::corpus::synth_generate(a.seed, cfg);
  caag::corpus::write_fvec(a.out_features, out.features);
  caag::corpus::write_captions_json(a.out_captions, out.captions);
  std::cout << "wrote " << out.features.size() << " images to " << a.out_features
            << " and " << a.out_captions << "\n";
  return 0;
}

struct BuildVocabArgs {
  std::string captions;
  std::string features;
  std::string out_vocab = "vocab.json";
  std::string out_manifest = "manifest.json";
  int min_count = 5;
};

int cmd_build_vocab(const BuildVocabArgs& a) {
  auto images = caag::corpus::read_captions_json(a.captions);
  auto records = caag::corpus::read_fvec(a.features);

  std::vector<std::vector<std::string>> tokenized;
  for (const auto& img : images)
    for (const auto& cap : img.captions)
      tokenized.push_back(caag::corpus::tokenize(cap));
  auto vocab = caag::corpus::Vocabulary::build(tokenized, a.min_count);
  vocab.save(a.out_vocab);

  auto manifest = caag::corpus::build_manifest(records, images, vocab);
  caag::corpus::write_manifest(a.out_manifest, manifest);

  std::cout << "vocabulary: " << vocab.size() << " tokens (hash " << vocab.hash()
            << "); splits:";
  for (const auto& s : manifest.splits)
    std::cout << " " << s.name << "=" << s.entries.size();
  std::cout << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string run_dir = "run";
  std::string resume;
  std::string phase_override;
  bool from_scratch = false;
};

json stats_json(const caag::train::EpochStats& st) {
  return json{{"epoch", st.epoch},
              {"phase", st.phase},
              {"mean_loss", st.mean_loss},
              {"mean_reward", st.mean_reward},
              {"mean_advantage", st.mean_advantage},
              {"tf_accuracy", st.tf_accuracy},
              {"val_cider", st.val_cider},
              {"wall_seconds", st.wall_seconds},
              {"lr", st.lr}};
}

int cmd_train(const TrainArgs& a) {
  caag::config::RunConfig rc = caag::config::load_run_config(a.config);
  if (!a.phase_override.empty()) {
    if (a.phase_override == "xe")
      rc.tcfg.phase = caag::train::TrainConfig::Phase::XE;
    else if (a.phase_override == "rl")
      rc.tcfg.phase = caag::train::TrainConfig::Phase::RL;
    else
      throw caag::Error("train: --phase must be xe or rl");
  }
  if (const char* env_seed = std::getenv("CAAG_SEED"))
    rc.tcfg.seed = std::strtoull(env_seed, nullptr, 10);

  bool is_rl = rc.tcfg.phase == caag::train::TrainConfig::Phase::RL;
  if (is_rl && a.resume.empty() && !a.from_scratch)
    throw caag::Error(
        "train: rl phase requires --resume <xe checkpoint> (or --from-scratch)");

  fs::create_directories(a.run_dir);
  {
    std::ifstream src(a.config);
    if (!src) throw caag::Error("train: cannot open '" + a.config + "'");
    std::ofstream dst(fs::path(a.run_dir) / "config.json");
    dst << src.rdbuf();
  }

  auto vocab = caag::corpus::Vocabulary::load(rc.vocab);
  auto manifest = caag::corpus::read_manifest(rc.manifest);
  if (manifest.vocab_hash != vocab.hash())
    throw caag::Error("train: manifest vocab hash " +
                      std::to_string(manifest.vocab_hash) +
                      " does not match vocabulary hash " +
                      std::to_string(vocab.hash()));
  if (manifest.feature_dim != rc.d_i)
    throw caag::Error("train: config d_i " + std::to_string(rc.d_i) +
                      " does not match feature dim " +
                      std::to_string(manifest.feature_dim));

  auto train_set = caag::corpus::load_split(manifest, "train", rc.features);
  auto val_set = caag::corpus::load_split(manifest, "val", rc.features);
  auto idf = caag::metrics::IdfCorpus::build(split_refs(train_set));

  caag::model::Model model(rc.dims(vocab.size()));
  caag::Rng init_rng(rc.tcfg.seed);
  model.init_primary(init_rng);
  model.init_aux(init_rng);

  int start_epoch = 0;
  double best_val = -1e300;

  caag::train::Trainer trainer(model, std::move(train_set), std::move(val_set),
                               std::move(idf), rc.tcfg);

  if (!a.resume.empty()) {
    caag::ckpt::CheckpointMeta meta = caag::ckpt::peek_checkpoint(a.resume);
    std::string ckpt_phase =
        meta.run_config.value("train", json::object()).value("phase", "xe");
    bool continue_same_phase = (ckpt_phase == "rl") == is_rl;
    if (continue_same_phase) {
      meta = caag::ckpt::load_checkpoint(a.resume, model, &trainer.optimizer());
      start_epoch = meta.epoch;
      best_val = meta.best_val;
      if (meta.extra.contains("trainer_rng"))
        trainer.rng().set_state(meta.extra["trainer_rng"].get<std::string>());
    } else {
      // initialization from the cross-entropy phase: primary weights carry
      // over, auxiliary parameters start fresh, optimizer starts fresh
      meta = caag::ckpt::load_checkpoint(a.resume, model, nullptr);
      caag::Rng aux_rng(rc.tcfg.seed);
      model.init_aux(aux_rng);
    }
    if (meta.vocab_hash != vocab.hash())
      throw caag::Error("train: checkpoint vocab hash " +
                        std::to_string(meta.vocab_hash) +
                        " does not match vocabulary hash " +
                        std::to_string(vocab.hash()));
  }

  fs::path log_path = fs::path(a.run_dir) / "log.jsonl";
  std::ofstream log(log_path, std::ios::app);
  if (!log) throw caag::Error("train: cannot open '" + log_path.string() + "'");

  for (int epoch = start_epoch + 1; epoch <= rc.tcfg.epochs; ++epoch) {
    caag::train::EpochStats st;
    try {
      st = trainer.run_epoch(epoch);
    } catch (const caag::train::TrainAbort& e) {
      std::cerr << "aborted: " << e.what()
                << " (last checkpoint retained in " << a.run_dir << ")\n";
      return 3;
    }
    log << stats_json(st).dump() << "\n";
    log.flush();
    std::cout << stats_json(st).dump() << "\n";

    caag::ckpt::CheckpointMeta meta;
    meta.epoch = epoch;
    meta.best_val = best_val;
    meta.vocab_hash = vocab.hash();
    meta.run_config = caag::config::run_config_json(rc);
    meta.extra["trainer_rng"] = trainer.rng().state();
    caag::ckpt::save_checkpoint((fs::path(a.run_dir) / "last.ckpt").string(),
                                model, &trainer.optimizer(), meta);
    if (st.val_cider > best_val) {
      best_val = st.val_cider;
      meta.best_val = best_val;
      caag::ckpt::save_checkpoint((fs::path(a.run_dir) / "best.ckpt").string(),
                                  model, &trainer.optimizer(), meta);
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------
// caption / evaluate
// ---------------------------------------------------------------------------

struct DecodeArgs {
  std::string checkpoint;
  std::string features, manifest, vocab;  // override config paths when set
  std::string split = "test";
  std::string out;
  double lambda = -1.0;  // <0: use config value
  int beam_width = 0;    // 0: use config value
  bool primary_only = false;
  bool dump_attention = false;
};

struct LoadedModel {
  caag::config::RunConfig rc;
  caag::corpus::Vocabulary vocab;
  caag::corpus::DatasetManifest manifest;
  caag::corpus::Dataset split;
  std::unique_ptr<caag::model::Model> model;
  double lambda = 0.5;
  std::size_t width = 3;
};

LoadedModel load_for_decode(const DecodeArgs& a) {
  LoadedModel lm;
  caag::ckpt::CheckpointMeta meta = caag::ckpt::peek_checkpoint(a.checkpoint);
  lm.rc = caag::config::parse_run_config(meta.run_config);
  std::string vocab_path = a.vocab.empty() ? lm.rc.vocab : a.vocab;
  std::string manifest_path = a.manifest.empty() ? lm.rc.manifest : a.manifest;
  std::string features_path = a.features.empty() ? lm.rc.features : a.features;

  lm.vocab = caag::corpus::Vocabulary::load(vocab_path);
  if (lm.vocab.hash() != meta.vocab_hash)
    throw caag::Error("vocabulary hash " + std::to_string(lm.vocab.hash()) +
                      " does not match checkpoint vocab hash " +
                      std::to_string(meta.vocab_hash));

  lm.manifest = caag::corpus::read_manifest(manifest_path);
  lm.split = caag::corpus::load_split(lm.manifest, a.split, features_path);
  lm.model = std::make_unique<caag::model::Model>(lm.rc.dims(lm.vocab.size()));
  caag::ckpt::load_checkpoint(a.checkpoint, *lm.model, nullptr);
  lm.lambda = a.lambda >= 0.0 ? a.lambda : lm.rc.tcfg.lambda;
  lm.width = a.beam_width > 0 ? static_cast<std::size_t>(a.beam_width)
                              : lm.rc.beam_width;
  return lm;
}

json weights_json(const caag::Tensor& t) {
  json arr = json::array();
  for (double x : t.v) arr.push_back(x);
  return arr;
}

struct DecodedImage {
  caag::decode::DecodeResult result;
  std::vector<int> context;
  bool fell_back = false;
  bool joint = false;
};

DecodedImage decode_one(caag::model::Model& model, const caag::Tensor& features,
                        const LoadedModel& lm, bool primary_only) {
  DecodedImage di;
  std::size_t max_len = lm.rc.tcfg.max_len;
  if (primary_only) {
    caag::decode::PrimaryScorer scorer(model, features);
    di.result = caag::decode::beam_search(scorer, lm.width, max_len,
                                          lm.rc.length_norm);
    return di;
  }
  caag::decode::JointResult jr = caag::decode::joint_caption(
      model, features, lm.lambda, lm.width, max_len, lm.rc.length_norm);
  di.result = jr.result;
  di.context = jr.context;
  di.fell_back = jr.fell_back_primary;
  di.joint = !jr.fell_back_primary;
  return di;
}

int cmd_caption(const DecodeArgs& a) {
  LoadedModel lm = load_for_decode(a);
  json out;
  out["images"] = json::array();
  for (std::size_t i = 0; i < lm.split.size(); ++i) {
    const caag::Tensor& feats = lm.split.features[i].features;
    DecodedImage di = decode_one(*lm.model, feats, lm, a.primary_only);
    json img;
    img["image_id"] = lm.split.entries[i].image_id;
    img["caption"] = lm.vocab.to_text(di.result.tokens);
    img["tokens"] = di.result.tokens;
    img["log_score"] = di.result.log_score;
    if (di.joint || di.fell_back) {
      img["context"] = di.context;
      img["fell_back_primary"] = di.fell_back;
    }
    if (a.dump_attention) {
      std::unique_ptr<caag::decode::StepScorer> scorer;
      if (di.joint)
        scorer = std::make_unique<caag::decode::JointScorer>(*lm.model, feats,
                                                             di.context, lm.lambda);
      else
        scorer = std::make_unique<caag::decode::PrimaryScorer>(*lm.model, feats);
      img["steps"] = json::array();
      for (const auto& so : caag::decode::trace_steps(*scorer, di.result.tokens)) {
        json step;
        step["alpha"] = weights_json(so.alpha);
        step["p1"] = weights_json(so.p1);
        step["p"] = weights_json(so.probs);
        if (so.beta.numel() > 0) step["beta"] = weights_json(so.beta);
        if (so.p2.numel() > 0) step["p2"] = weights_json(so.p2);
        img["steps"].push_back(std::move(step));
      }
    }
    out["images"].push_back(std::move(img));
  }
  emit(a.out, out);
  return 0;
}

int cmd_evaluate(const DecodeArgs& a) {
  LoadedModel lm = load_for_decode(a);

  auto train_set = caag::corpus::load_split(
      lm.manifest, "train", a.features.empty() ? lm.rc.features : a.features);
  auto idf = caag::metrics::IdfCorpus::build(split_refs(train_set));

  std::vector<std::vector<int>> candidates;
  for (std::size_t i = 0; i < lm.split.size(); ++i)
    candidates.push_back(
        decode_one(*lm.model, lm.split.features[i].features, lm, a.primary_only)
            .result.tokens);

  caag::eval::EvalReport rep =
      caag::eval::evaluate_candidates(candidates, lm.split, idf, lm.vocab);

  json out;
  out["corpus"] = {{"bleu4", rep.corpus_bleu4},
                   {"rouge_l", rep.mean_rouge_l},
                   {"cider_d", rep.mean_cider_d}};
  out["absent_metrics"] = {"meteor", "spice"};
  out["images"] = json::array();
  for (const auto& ie : rep.images)
    out["images"].push_back({{"image_id", ie.image_id},
                             {"caption", ie.caption},
                             {"bleu4", ie.bleu4},
                             {"rouge_l", ie.rouge_l},
                             {"cider_d", ie.cider_d}});
  emit(a.out, out);
  return 0;
}

// ---------------------------------------------------------------------------
// gradcheck
// ---------------------------------------------------------------------------

int cmd_gradcheck(std::uint64_t seed, bool negative_control) {
  caag::gradsuite::Report rep =
      caag::gradsuite::run_gradient_suite(seed, negative_control);
  std::cout << caag::gradsuite::format_report(rep);
  std::cout << (rep.all_pass ? "gradcheck: all components pass\n"
                             : "gradcheck: FAILURES detected\n");
  return rep.all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"context-aware auxiliary-guided captioner"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "generate a synthetic toy dataset");
  synth->add_option("--out-features", synth_args.out_features);
  synth->add_option("--out-captions", synth_args.out_captions);
  synth->add_option("--images", synth_args.images);
  synth->add_option("--seed", synth_args.seed);
  synth->add_option("--max-objects", synth_args.max_objects);
  synth->add_option("--noise-sigma", synth_args.noise_sigma);

  BuildVocabArgs bv_args;
  auto* bv = app.add_subcommand("build-vocab",
                                "build vocabulary and dataset manifest");
  bv->add_option("--captions", bv_args.captions)->required();
  bv->add_option("--features", bv_args.features)->required();
  bv->add_option("--out-vocab", bv_args.out_vocab);
  bv->add_option("--out-manifest", bv_args.out_manifest);
  bv->add_option("--min-count", bv_args.min_count);

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "run one training phase");
  train->add_option("--config", train_args.config)->required();
  train->add_option("--run-dir", train_args.run_dir);
  train->add_option("--resume", train_args.resume);
  train->add_option("--phase", train_args.phase_override)
      ->description("override the config phase (xe|rl)");
  train->add_flag("--from-scratch", train_args.from_scratch);

  DecodeArgs cap_args;
  auto* caption = app.add_subcommand("caption", "decode captions to JSON");
  caption->add_option("--checkpoint", cap_args.checkpoint)->required();
  caption->add_option("--features", cap_args.features);
  caption->add_option("--manifest", cap_args.manifest);
  caption->add_option("--vocab", cap_args.vocab);
  caption->add_option("--split", cap_args.split);
  caption->add_option("--out", cap_args.out);
  caption->add_option("--lambda", cap_args.lambda);
  caption->add_option("--beam-width", cap_args.beam_width);
  caption->add_flag("--primary-only", cap_args.primary_only);
  caption->add_flag("--dump-attention", cap_args.dump_attention);

  DecodeArgs eval_args;
  auto* eval = app.add_subcommand("evaluate", "score decoded captions");
  eval->add_option("--checkpoint", eval_args.checkpoint)->required();
  eval->add_option("--features", eval_args.features);
  eval->add_option("--manifest", eval_args.manifest);
  eval->add_option("--vocab", eval_args.vocab);
  eval->add_option("--split", eval_args.split);
  eval->add_option("--out", eval_args.out);
  eval->add_option("--lambda", eval_args.lambda);
  eval->add_option("--beam-width", eval_args.beam_width);
  eval->add_flag("--primary-only", eval_args.primary_only);

  std::uint64_t gc_seed = 7;
  bool gc_negative = false;
  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  gc->add_option("--seed", gc_seed);
  gc->add_flag("--negative-control", gc_negative,
               "include a corrupted backward rule that must be flagged");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth(synth_args);
    if (bv->parsed()) return cmd_build_vocab(bv_args);
    if (train->parsed()) return cmd_train(train_args);
    if (caption->parsed()) return cmd_caption(cap_args);
    if (eval->parsed()) return cmd_evaluate(eval_args);
    if (gc->parsed()) return cmd_gradcheck(gc_seed, gc_negative);
  } catch (const caag::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return error_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
