#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "caag/metrics.hpp"
#include "caag/rng.hpp"

using namespace caag;
using namespace caag::metrics;

namespace {

// toy word ids (metrics work on bare token ids)
enum Word : int { A = 10, RED, BALL, ON, TABLE, BLUE, BOX, THE, CAT, MAT, IS };

IdfCorpus two_image_idf() {
  // image A: "a red ball on a table"; image B: "a blue box on a table"
  return IdfCorpus::build({
      {{A, RED, BALL, ON, A, TABLE}},
      {{A, BLUE, BOX, ON, A, TABLE}},
  });
}

}  // namespace

TEST_CASE("ngram counts: order totals follow the length rule") {
  TokenSeq s = {1, 2, 3};
  NGramCounts c = NGramCounts::from(s);
  CHECK(c.total(0) == 3);
  CHECK(c.total(1) == 2);
  CHECK(c.total(2) == 1);
  CHECK(c.total(3) == 0);
}

TEST_CASE("bleu4: candidate equal to a long-enough reference scores 1.0") {
  TokenSeq ref = {A, RED, BALL, ON, TABLE};
  BleuResult r = bleu4(ref, {ref});
  CHECK(r.score == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.brevity_penalty == 1.0);
}

TEST_CASE("bleu4: clipped modified unigram precision is exactly 2/7") {
  // "the the the the the the the" vs "the cat is on the mat"
  TokenSeq cand(7, THE);
  TokenSeq ref = {THE, CAT, IS, ON, THE, MAT};
  BleuResult r = bleu4(cand, {ref});
  CHECK(r.precisions[0] == 2.0 / 7.0);
}

TEST_CASE("bleu4: disjoint vocabulary stays at the epsilon floor") {
  TokenSeq cand = {1, 2, 3, 4, 5};
  TokenSeq ref = {6, 7, 8, 9, 10};
  BleuResult r = bleu4(cand, {ref});
  CHECK(r.score > 0.0);
  CHECK(r.score <= 1e-8);
  CHECK(bleu4(cand, {ref}, /*smooth=*/false).score == 0.0);
}

TEST_CASE("bleu4: empty candidate scores zero") {
  CHECK(bleu4({}, {{1, 2, 3}}).score == 0.0);
}

TEST_CASE("bleu4: brevity penalty uses the closest reference length") {
  TokenSeq cand = {1, 2, 3, 4};
  TokenSeq ref_long = {1, 2, 3, 4, 5, 6, 7, 8};
  TokenSeq ref_near = {1, 2, 3, 4, 5};
  BleuResult r = bleu4(cand, {ref_long, ref_near});
  CHECK(r.brevity_penalty == doctest::Approx(std::exp(1.0 - 5.0 / 4.0)));
}

TEST_CASE("corpus bleu: identity corpus scores 1.0, unsmoothed zero stays zero") {
  CorpusBleu cb;
  cb.add({1, 2, 3, 4, 5}, {{1, 2, 3, 4, 5}});
  cb.add({7, 8, 9, 10}, {{7, 8, 9, 10}});
  CHECK(cb.finalize().score == doctest::Approx(1.0).epsilon(1e-12));

  CorpusBleu zero;
  zero.add({1, 2, 3, 4}, {{5, 6, 7, 8}});
  CHECK(zero.finalize().score == 0.0);
}

TEST_CASE("rouge_l: identity, disjoint, and the crossed-pair oracle") {
  TokenSeq s = {1, 2, 3, 4, 5};
  CHECK(rouge_l(s, {s}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rouge_l({1, 2}, {{3, 4}}) == 0.0);
  CHECK(rouge_l({}, {{1}}) == 0.0);

  // LCS([a,b,c,d], [a,c,b,d]) = 3; with beta=1.2 and P == R the F-measure
  // collapses to 3/4 (frozen from the direct formula)
  CHECK(rouge_l({1, 2, 3, 4}, {{1, 3, 2, 4}}) ==
        doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("rouge_l: max over references") {
  TokenSeq cand = {1, 2, 3, 4};
  CHECK(rouge_l(cand, {{5, 6, 7}, {1, 2, 3, 4}}) ==
        doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("cider_d: single-document identity corpus scores exactly 10") {
  TokenSeq ref = {A, RED, BALL, ON, A, TABLE};
  IdfCorpus idf = IdfCorpus::build({{ref}});
  CHECK(cider_d(ref, {ref}, idf) == doctest::Approx(10.0).epsilon(1e-6));
}

TEST_CASE("cider_d: zero overlap scores zero, empty candidate scores zero") {
  IdfCorpus idf = two_image_idf();
  CHECK(cider_d({CAT, MAT, IS}, {{A, RED, BALL, ON, A, TABLE}}, idf) == 0.0);
  CHECK(cider_d({}, {{A, RED}}, idf) == 0.0);
}

TEST_CASE("cider_d: two-image corpus matches the frozen first-principles value") {
  IdfCorpus idf = two_image_idf();
  CHECK(idf.documents() == 2);
  // hand-checkable document frequencies drive the weights: df[a] = df[on] =
  // df[table] = 2 (weight 0), df[red] = df[ball] = 1 (weight ln 2)
  CHECK(idf.weight({A}, 0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(idf.weight({RED}, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  TokenSeq cand = {A, RED, BALL, ON, THE, TABLE};
  TokenSeq ref = {A, RED, BALL, ON, A, TABLE};
  double score = cider_d(cand, {ref}, idf);
  CHECK(score == doctest::Approx(6.2544421317304213).epsilon(1e-6));
}

TEST_CASE("metrics: permutation invariance over the reference list") {
  Rng rng(3);
  IdfCorpus idf = two_image_idf();
  TokenSeq cand = {A, RED, BALL, ON, TABLE};
  std::vector<TokenSeq> refs = {{A, RED, BALL, ON, A, TABLE},
                                {A, BLUE, BOX, ON, A, TABLE},
                                {THE, RED, BALL}};
  std::vector<TokenSeq> shuffled = refs;
  for (int i = 0; i < 5; ++i) {
    rng.shuffle(shuffled);
    CHECK(bleu4(cand, refs).score == bleu4(cand, shuffled).score);
    CHECK(rouge_l(cand, refs) == rouge_l(cand, shuffled));
    CHECK(cider_d(cand, refs, idf) == cider_d(cand, shuffled, idf));
  }
}

TEST_CASE("metrics: pure functions, bitwise repeatable") {
  IdfCorpus idf = two_image_idf();
  TokenSeq cand = {A, RED, BALL};
  std::vector<TokenSeq> refs = {{A, RED, BALL, ON, A, TABLE}};
  CHECK(bleu4(cand, refs).score == bleu4(cand, refs).score);
  CHECK(rouge_l(cand, refs) == rouge_l(cand, refs));
  CHECK(cider_d(cand, refs, idf) == cider_d(cand, refs, idf));
}

TEST_CASE("advantage: trivial identities") {
  IdfCorpus idf = two_image_idf();
  std::vector<TokenSeq> refs = {{A, RED, BALL, ON, A, TABLE}};
  TokenSeq sampled = {A, RED, BALL};
  RewardRecord same = advantage(sampled, sampled, refs, idf);
  CHECK(same.advantage == 0.0);
  CHECK(same.r_sample == same.r_greedy);
}

TEST_CASE("advantage: arithmetic and the record invariant") {
  RewardRecord rec;
  rec.r_sample = 1.2;
  rec.r_greedy = 0.7;
  rec.advantage = rec.r_sample - rec.r_greedy;
  CHECK(rec.advantage == doctest::Approx(0.5));
}

TEST_CASE("advantage: sampled reference beats a wrong greedy") {
  TokenSeq ref = {A, RED, BALL, ON, A, TABLE};
  IdfCorpus idf = IdfCorpus::build({{ref}});
  TokenSeq greedy = {A, BLUE, BOX};
  RewardRecord rec = advantage(ref, greedy, {ref}, idf);
  CHECK(rec.r_sample == doctest::Approx(10.0).epsilon(1e-6));
  CHECK(rec.advantage > 0.0);
}

TEST_CASE("reward metric selection is honoured") {
  TokenSeq ref = {A, RED, BALL, ON, TABLE};
  IdfCorpus idf = IdfCorpus::build({{ref}});
  CHECK(reward(RewardMetric::Bleu4, ref, {ref}, idf) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(reward(RewardMetric::RougeL, ref, {ref}, idf) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(reward(RewardMetric::CiderD, ref, {ref}, idf) ==
        doctest::Approx(10.0).epsilon(1e-6));
}
