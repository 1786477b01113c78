#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

namespace caag::metrics {

using TokenSeq = std::vector<int>;
using NGram = std::vector<int>;

/// Per-order n-gram multisets (n = 1..4) of a token sequence.
struct NGramCounts {
  std::array<std::map<NGram, int>, 4> by_order;

  static NGramCounts from(const TokenSeq& seq);
  int total(std::size_t order) const;  // == max(0, len - order)
};

/// Document frequencies over a reference corpus, built once from the training
/// split and frozen. The single-document corpus degenerates to pure TF
/// weighting (log M would otherwise zero every weight).
class IdfCorpus {
public:
  static IdfCorpus build(const std::vector<std::vector<TokenSeq>>& refs_per_image);

  double weight(const NGram& g, std::size_t order) const;
  std::size_t documents() const { return documents_; }

private:
  std::array<std::map<NGram, int>, 4> df_;
  std::size_t documents_ = 0;
  double log_m_ = 0.0;
};

struct BleuResult {
  double score = 0.0;
  std::array<double, 4> precisions{};
  double brevity_penalty = 1.0;
};

/// Sentence BLEU-4: clipped modified precisions, geometric mean, brevity
/// penalty against the closest reference length (ties -> shorter). With
/// smooth=true zero precisions are floored at 1e-9 so RL rewards never
/// collapse to exactly zero.
BleuResult bleu4(const TokenSeq& candidate, const std::vector<TokenSeq>& refs,
                 bool smooth = true);

/// Corpus BLEU-4: unsmoothed, counts aggregated across sentences.
class CorpusBleu {
public:
  void add(const TokenSeq& candidate, const std::vector<TokenSeq>& refs);
  BleuResult finalize() const;

private:
  std::array<long long, 4> clipped_{};
  std::array<long long, 4> total_{};
  long long cand_len_ = 0;
  long long ref_len_ = 0;
};

/// ROUGE-L: LCS F-measure with beta = 1.2, max over references.
double rouge_l(const TokenSeq& candidate, const std::vector<TokenSeq>& refs);

/// CIDEr-D: clipped TF-IDF cosine per order averaged over n = 1..4, Gaussian
/// length penalty (sigma = 6), x10, averaged over references.
double cider_d(const TokenSeq& candidate, const std::vector<TokenSeq>& refs,
               const IdfCorpus& idf);

enum class RewardMetric { CiderD, Bleu4, RougeL };

double reward(RewardMetric metric, const TokenSeq& candidate,
              const std::vector<TokenSeq>& refs, const IdfCorpus& idf);

struct RewardRecord {
  double r_sample = 0.0;
  double r_greedy = 0.0;
  double advantage = 0.0;  // r_sample - r_greedy, constant over timesteps
};

/// Self-critical advantage: full-sequence rewards, greedy decode as baseline.
RewardRecord advantage(const TokenSeq& sampled, const TokenSeq& greedy,
                       const std::vector<TokenSeq>& refs, const IdfCorpus& idf,
                       RewardMetric metric = RewardMetric::CiderD);

}  // namespace caag::metrics
