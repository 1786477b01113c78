#include "caag/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace caag::metrics {

namespace {
constexpr double kCiderSigma = 6.0;
constexpr double kRougeBeta = 1.2;
constexpr double kBleuEps = 1e-9;
}  // namespace

NGramCounts NGramCounts::from(const TokenSeq& seq) {
  NGramCounts c;
  for (std::size_t n = 1; n <= 4; ++n) {
    if (seq.size() < n) break;
    auto& m = c.by_order[n - 1];
    for (std::size_t i = 0; i + n <= seq.size(); ++i)
      m[NGram(seq.begin() + i, seq.begin() + i + n)] += 1;
  }
  return c;
}

int NGramCounts::total(std::size_t order) const {
  int t = 0;
  for (const auto& [g, n] : by_order[order]) t += n;
  return t;
}

IdfCorpus IdfCorpus::build(const std::vector<std::vector<TokenSeq>>& refs_per_image) {
  IdfCorpus idf;
  idf.documents_ = refs_per_image.size();
  if (idf.documents_ == 0) return idf;
  idf.log_m_ = std::log(static_cast<double>(idf.documents_));
  for (const auto& refs : refs_per_image) {
    std::array<std::map<NGram, int>, 4> seen;
    for (const auto& r : refs) {
      NGramCounts c = NGramCounts::from(r);
      for (std::size_t n = 0; n < 4; ++n)
        for (const auto& [g, cnt] : c.by_order[n]) seen[n][g] = 1;
    }
    for (std::size_t n = 0; n < 4; ++n)
      for (const auto& [g, one] : seen[n]) idf.df_[n][g] += 1;
  }
  return idf;
}

double IdfCorpus::weight(const NGram& g, std::size_t order) const {
  if (documents_ <= 1) return 1.0;
  auto it = df_[order].find(g);
  double df = it == df_[order].end() ? 0.0 : static_cast<double>(it->second);
  return log_m_ - std::log(std::max(1.0, df));
}

// ---------------------------------------------------------------------------
// BLEU
// ---------------------------------------------------------------------------

namespace {

struct BleuCounts {
  std::array<long long, 4> clipped{};
  std::array<long long, 4> total{};
  long long cand_len = 0;
  long long ref_len = 0;  // closest reference length, ties -> shorter
};

BleuCounts bleu_counts(const TokenSeq& cand, const std::vector<TokenSeq>& refs) {
  BleuCounts out;
  out.cand_len = static_cast<long long>(cand.size());

  long long best = -1;
  for (const auto& r : refs) {
    long long rl = static_cast<long long>(r.size());
    if (best < 0 ||
        std::llabs(rl - out.cand_len) < std::llabs(best - out.cand_len) ||
        (std::llabs(rl - out.cand_len) == std::llabs(best - out.cand_len) && rl < best))
      best = rl;
  }
  out.ref_len = best < 0 ? 0 : best;

  NGramCounts cc = NGramCounts::from(cand);
  std::vector<NGramCounts> rcs;
  rcs.reserve(refs.size());
  for (const auto& r : refs) rcs.push_back(NGramCounts::from(r));

  for (std::size_t n = 0; n < 4; ++n) {
    for (const auto& [g, cnt] : cc.by_order[n]) {
      int max_ref = 0;
      for (const auto& rc : rcs) {
        auto it = rc.by_order[n].find(g);
        if (it != rc.by_order[n].end()) max_ref = std::max(max_ref, it->second);
      }
      out.clipped[n] += std::min(cnt, max_ref);
      out.total[n] += cnt;
    }
  }
  return out;
}

BleuResult bleu_from_counts(const std::array<long long, 4>& clipped,
                            const std::array<long long, 4>& total,
                            long long cand_len, long long ref_len, bool smooth) {
  BleuResult r;
  if (cand_len == 0) return r;
  double log_sum = 0.0;
  for (std::size_t n = 0; n < 4; ++n) {
    double p = total[n] > 0
                   ? static_cast<double>(clipped[n]) / static_cast<double>(total[n])
                   : 0.0;
    if (p <= 0.0) {
      if (!smooth) {
        r.precisions[n] = 0.0;
        return r;  // unsmoothed BLEU is 0 when any precision vanishes
      }
      p = kBleuEps;
    }
    r.precisions[n] = p;
    log_sum += std::log(p);
  }
  r.brevity_penalty =
      cand_len >= ref_len ? 1.0
                          : std::exp(1.0 - static_cast<double>(ref_len) /
                                               static_cast<double>(cand_len));
  r.score = r.brevity_penalty * std::exp(log_sum / 4.0);
  return r;
}

}  // namespace

BleuResult bleu4(const TokenSeq& candidate, const std::vector<TokenSeq>& refs,
                 bool smooth) {
  if (refs.empty()) return {};
  if (candidate.empty()) return {};
  BleuCounts c = bleu_counts(candidate, refs);
  return bleu_from_counts(c.clipped, c.total, c.cand_len, c.ref_len, smooth);
}

void CorpusBleu::add(const TokenSeq& candidate, const std::vector<TokenSeq>& refs) {
  if (refs.empty()) return;
  BleuCounts c = bleu_counts(candidate, refs);
  for (std::size_t n = 0; n < 4; ++n) {
    clipped_[n] += c.clipped[n];
    total_[n] += c.total[n];
  }
  cand_len_ += c.cand_len;
  ref_len_ += c.ref_len;
}

BleuResult CorpusBleu::finalize() const {
  return bleu_from_counts(clipped_, total_, cand_len_, ref_len_, /*smooth=*/false);
}

// ---------------------------------------------------------------------------
// ROUGE-L
// ---------------------------------------------------------------------------

namespace {
std::size_t lcs_length(const TokenSeq& a, const TokenSeq& b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      if (a[i - 1] == b[j - 1])
        cur[j] = prev[j - 1] + 1;
      else
        cur[j] = std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}
}  // namespace

double rouge_l(const TokenSeq& candidate, const std::vector<TokenSeq>& refs) {
  if (candidate.empty() || refs.empty()) return 0.0;
  double best = 0.0;
  for (const auto& ref : refs) {
    if (ref.empty()) continue;
    double lcs = static_cast<double>(lcs_length(candidate, ref));
    if (lcs == 0.0) continue;
    double rec = lcs / static_cast<double>(ref.size());
    double prec = lcs / static_cast<double>(candidate.size());
    double b2 = kRougeBeta * kRougeBeta;
    double f = (1.0 + b2) * rec * prec / (rec + b2 * prec);
    best = std::max(best, f);
  }
  return best;
}

// ---------------------------------------------------------------------------
// CIDEr-D
// ---------------------------------------------------------------------------

namespace {

struct TfidfVec {
  std::array<std::map<NGram, double>, 4> w;
  std::array<double, 4> norm{};
};

TfidfVec tfidf(const TokenSeq& seq, const IdfCorpus& idf) {
  TfidfVec v;
  NGramCounts c = NGramCounts::from(seq);
  for (std::size_t n = 0; n < 4; ++n) {
    double sq = 0.0;
    for (const auto& [g, cnt] : c.by_order[n]) {
      double x = static_cast<double>(cnt) * idf.weight(g, n);
      v.w[n][g] = x;
      sq += x * x;
    }
    v.norm[n] = std::sqrt(sq);
  }
  return v;
}

}  // namespace

double cider_d(const TokenSeq& candidate, const std::vector<TokenSeq>& refs,
               const IdfCorpus& idf) {
  if (candidate.empty() || refs.empty()) return 0.0;
  TfidfVec cv = tfidf(candidate, idf);
  std::vector<double> per_ref;
  per_ref.reserve(refs.size());
  for (const auto& ref : refs) {
    TfidfVec rv = tfidf(ref, idf);
    double delta = static_cast<double>(candidate.size()) -
                   static_cast<double>(ref.size());
    double penalty = std::exp(-delta * delta / (2.0 * kCiderSigma * kCiderSigma));
    double sum_n = 0.0;
    for (std::size_t n = 0; n < 4; ++n) {
      double num = 0.0;
      for (const auto& [g, cw] : cv.w[n]) {
        auto it = rv.w[n].find(g);
        if (it != rv.w[n].end()) num += std::min(cw, it->second) * it->second;
      }
      if (cv.norm[n] > 0.0 && rv.norm[n] > 0.0)
        num /= cv.norm[n] * rv.norm[n];
      else
        num = 0.0;
      sum_n += num * penalty;
    }
    per_ref.push_back(sum_n / 4.0);
  }
  // summation in sorted order keeps the score exactly invariant to the
  // ordering of the reference list
  std::sort(per_ref.begin(), per_ref.end());
  double total = 0.0;
  for (double s : per_ref) total += s;
  return 10.0 * total / static_cast<double>(refs.size());
}

double reward(RewardMetric metric, const TokenSeq& candidate,
              const std::vector<TokenSeq>& refs, const IdfCorpus& idf) {
  switch (metric) {
    case RewardMetric::CiderD:
      return cider_d(candidate, refs, idf);
    case RewardMetric::Bleu4:
      return bleu4(candidate, refs, /*smooth=*/true).score;
    case RewardMetric::RougeL:
      return rouge_l(candidate, refs);
  }
  return 0.0;
}

RewardRecord advantage(const TokenSeq& sampled, const TokenSeq& greedy,
                       const std::vector<TokenSeq>& refs, const IdfCorpus& idf,
                       RewardMetric metric) {
  RewardRecord rec;
  rec.r_sample = reward(metric, sampled, refs, idf);
  rec.r_greedy = reward(metric, greedy, refs, idf);
  rec.advantage = rec.r_sample - rec.r_greedy;
  return rec;
}

}  // namespace caag::metrics
