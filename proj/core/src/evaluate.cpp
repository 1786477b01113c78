#include "caag/evaluate.hpp"

namespace caag::eval {

EvalReport evaluate_candidates(const std::vector<std::vector<int>>& candidates,
                               const corpus::Dataset& split,
                               const metrics::IdfCorpus& idf,
                               const corpus::Vocabulary& vocab) {
  if (candidates.size() != split.size())
    throw Error("evaluate: " + std::to_string(candidates.size()) +
                " candidates for " + std::to_string(split.size()) + " images");

  EvalReport rep;
  metrics::CorpusBleu corpus_bleu;
  double rouge_sum = 0.0, cider_sum = 0.0;

  for (std::size_t i = 0; i < split.size(); ++i) {
    ImageEval ie;
    ie.image_id = split.entries[i].image_id;
    ie.tokens = corpus::strip_specials(candidates[i]);
    ie.caption = vocab.to_text(ie.tokens);
    const auto& refs = split.entries[i].refs;
    ie.bleu4 = metrics::bleu4(ie.tokens, refs, /*smooth=*/true).score;
    ie.rouge_l = metrics::rouge_l(ie.tokens, refs);
    ie.cider_d = metrics::cider_d(ie.tokens, refs, idf);
    corpus_bleu.add(ie.tokens, refs);
    rouge_sum += ie.rouge_l;
    cider_sum += ie.cider_d;
    rep.images.push_back(std::move(ie));
  }

  rep.corpus_bleu4 = corpus_bleu.finalize().score;
  std::size_t n = split.size();
  rep.mean_rouge_l = n ? rouge_sum / static_cast<double>(n) : 0.0;
  rep.mean_cider_d = n ? cider_sum / static_cast<double>(n) : 0.0;
  return rep;
}

}  // namespace caag::eval
