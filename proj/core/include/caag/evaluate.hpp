#pragma once

#include <string>
#include <vector>

#include "caag/data.hpp"
#include "caag/metrics.hpp"
#include "caag/vocab.hpp"

namespace caag::eval {

struct ImageEval {
  std::string image_id;
  std::vector<int> tokens;  // candidate, specials stripped
  std::string caption;
  double bleu4 = 0.0;  // sentence-level, smoothed
  double rouge_l = 0.0;
  double cider_d = 0.0;
};

struct EvalReport {
  double corpus_bleu4 = 0.0;  // aggregate counts, unsmoothed
  double mean_rouge_l = 0.0;
  double mean_cider_d = 0.0;
  std::vector<ImageEval> images;
};

/// Scores candidates (one per split entry, aligned by index) against the
/// split references. Candidates are raw decodes; specials are stripped here.
EvalReport evaluate_candidates(const std::vector<std::vector<int>>& candidates,
                               const corpus::Dataset& split,
                               const metrics::IdfCorpus& idf,
                               const corpus::Vocabulary& vocab);

}  // namespace caag::eval
