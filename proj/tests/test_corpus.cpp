#include <doctest.h>

#include <cstdio>
#include <cstdint>
#include <unistd.h>
#include <filesystem>
#include <fstream>
#include <map>

#include "caag/data.hpp"
#include "caag/metrics.hpp"
#include "caag/synth.hpp"
#include "caag/vocab.hpp"

using namespace caag;
using namespace caag::corpus;

namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("caag_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { std::error_code ec; fs::remove_all(path, ec); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("tokenize: lowercase, whitespace runs, terminal punctuation") {
  CHECK(tokenize("A Boy is") == std::vector<std::string>{"a", "boy", "is"});
  CHECK(tokenize("").empty());
  CHECK(tokenize("  A   red\tball.  ") == std::vector<std::string>{"a", "red", "ball"});
  CHECK(tokenize("on, the mat,") == std::vector<std::string>{"on", "the", "mat"});
}

TEST_CASE("tokenize: truncation reserves the EOS slot") {
  std::string long_sentence;
  for (int i = 0; i < 20; ++i) long_sentence += "w" + std::to_string(i) + " ";
  auto toks = tokenize(long_sentence, 16);
  CHECK(toks.size() == 15);
  CHECK(toks.front() == "w0");
  CHECK(toks.back() == "w14");
}

TEST_CASE("build_vocab: empty corpus keeps only the specials") {
  auto v = Vocabulary::build({}, 5);
  CHECK(v.size() == 4);
  CHECK(v.id("anything") == kUnk);
}

TEST_CASE("build_vocab: min_count threshold boundary") {
  std::vector<std::vector<std::string>> caps;
  for (int i = 0; i < 5; ++i) caps.push_back({"cat"});
  for (int i = 0; i < 4; ++i) caps.push_back({"dog"});
  auto v = Vocabulary::build(caps, 5);
  CHECK(v.size() == 5);
  CHECK(v.id("cat") == 4);
  CHECK(v.id("dog") == kUnk);
}

TEST_CASE("build_vocab: size matches an independent frequency count") {
  // 100 templated captions
  std::vector<std::vector<std::string>> caps;
  for (int i = 0; i < 100; ++i) {
    std::string noun = "noun" + std::to_string(i % 7);
    std::string attr = "attr" + std::to_string(i % 3);
    caps.push_back({"a", attr, noun, "here"});
  }
  std::map<std::string, int> counts;
  for (const auto& c : caps)
    for (const auto& tok : c) counts[tok] += 1;
  std::size_t expected = 4;  // specials
  for (const auto& [tok, n] : counts)
    if (n >= 5) expected += 1;

  auto v = Vocabulary::build(caps, 5);
  CHECK(v.size() == expected);
  // ordering: count desc then lexicographic; "a" and "here" are the most
  // frequent tokens
  CHECK(v.token(4) == "a");
  CHECK(v.token(5) == "here");
}

TEST_CASE("vocabulary: encode/decode identity and stable UNK") {
  std::vector<std::vector<std::string>> caps(6, {"red", "ball"});
  auto v = Vocabulary::build(caps, 5);
  auto ids = v.encode({"red", "ball", "zebra"});
  CHECK(ids[2] == kUnk);
  auto toks = v.decode(ids);
  CHECK(toks[0] == "red");
  CHECK(toks[1] == "ball");
  CHECK(toks[2] == "<unk>");
  CHECK(v.encode({"zebra"})[0] == v.encode({"quux"})[0]);
}

TEST_CASE("vocabulary: save/load round trip preserves ids and hash") {
  TempDir dir;
  std::vector<std::vector<std::string>> caps(6, {"red", "ball", "on"});
  auto v = Vocabulary::build(caps, 5);
  v.save(dir.file("vocab.json"));
  auto v2 = Vocabulary::load(dir.file("vocab.json"));
  CHECK(v2.size() == v.size());
  CHECK(v2.hash() == v.hash());
  for (int i = 0; i < static_cast<int>(v.size()); ++i)
    CHECK(v2.token(i) == v.token(i));
}

TEST_CASE("fvec: known record round trip") {
  TempDir dir;
  RegionFeatureSet one{"a", Tensor({1, 4}, {1.0, 2.0, 3.0, 4.0})};
  write_fvec(dir.file("f.fvec"), {one});
  auto recs = read_fvec(dir.file("f.fvec"));
  REQUIRE(recs.size() == 1);
  CHECK(recs[0].set.image_id == "a");
  CHECK(recs[0].set.features.v == std::vector<double>{1.0, 2.0, 3.0, 4.0});
  CHECK(recs[0].offset == 10);  // 6-byte magic + u32 count

  auto direct = read_fvec_at(dir.file("f.fvec"), recs[0].offset);
  CHECK(direct.image_id == "a");
  CHECK(direct.features.v == recs[0].set.features.v);
}

TEST_CASE("fvec: random write-then-read is bitwise identical") {
  TempDir dir;
  Rng rng(17);
  std::vector<RegionFeatureSet> sets;
  for (int i = 0; i < 8; ++i) {
    std::size_t k = 1 + rng.index(4);
    Tensor f = Tensor::zeros({k, 6});
    for (double& x : f.v) x = rng.uniform(-1e3, 1e3) * std::pow(10.0, -rng.index(300));
    sets.push_back(RegionFeatureSet{"img" + std::to_string(i), std::move(f)});
  }
  write_fvec(dir.file("r.fvec"), sets);
  auto back = read_fvec(dir.file("r.fvec"));
  REQUIRE(back.size() == sets.size());
  for (std::size_t i = 0; i < sets.size(); ++i) {
    CHECK(back[i].set.image_id == sets[i].image_id);
    REQUIRE(back[i].set.features.numel() == sets[i].features.numel());
    for (std::size_t j = 0; j < sets[i].features.numel(); ++j)
      CHECK(back[i].set.features.v[j] == sets[i].features.v[j]);
  }
}

TEST_CASE("fvec: corrupted magic is rejected with a byte offset") {
  TempDir dir;
  write_fvec(dir.file("x.fvec"), {{"a", Tensor({1, 2}, {1.0, 2.0})}});
  {
    std::fstream f(dir.file("x.fvec"),
                   std::ios::in | std::ios::out | std::ios::binary);
    f.put('X');
  }
  try {
    read_fvec(dir.file("x.fvec"));
    FAIL("expected a format error");
  } catch (const Error& e) {
    std::string w = e.what();
    CHECK(w.find("bad magic") != std::string::npos);
    CHECK(w.find("offset 0") != std::string::npos);
  }
}

TEST_CASE("fvec: truncated file and non-finite values are format errors") {
  TempDir dir;
  write_fvec(dir.file("t.fvec"), {{"ab", Tensor({2, 3}, {1, 2, 3, 4, 5, 6})}});
  auto full = fs::file_size(dir.file("t.fvec"));
  fs::resize_file(dir.file("t.fvec"), full - 5);
  CHECK_THROWS_WITH_AS(read_fvec(dir.file("t.fvec")),
                       doctest::Contains("truncated"), Error);

  Tensor bad = Tensor({1, 2}, {1.0, std::nan("")});
  CHECK_THROWS_AS(write_fvec(dir.file("n.fvec"), {{"a", bad}}), Error);
}

TEST_CASE("manifest: build, round trip, referential integrity") {
  TempDir dir;
  SynthConfig cfg;
  cfg.n_images = 30;
  auto out = synth_generate(5, cfg);
  write_fvec(dir.file("f.fvec"), out.features);
  auto recs = read_fvec(dir.file("f.fvec"));

  std::vector<std::vector<std::string>> tokenized;
  for (const auto& img : out.captions)
    for (const auto& c : img.captions) tokenized.push_back(tokenize(c));
  auto vocab = Vocabulary::build(tokenized, 5);

  auto manifest = build_manifest(recs, out.captions, vocab);
  CHECK(manifest.vocab_hash == vocab.hash());
  CHECK(manifest.split("train").entries.size() == 24);
  CHECK(manifest.split("val").entries.size() == 3);
  CHECK(manifest.split("test").entries.size() == 3);

  write_manifest(dir.file("m.json"), manifest);
  auto m2 = read_manifest(dir.file("m.json"));
  CHECK(m2.vocab_hash == manifest.vocab_hash);
  CHECK(m2.feature_dim == manifest.feature_dim);

  // every entry resolves to exactly one feature record with >= 1 reference
  for (const auto& split : m2.splits) {
    auto d = load_split(m2, split.name, dir.file("f.fvec"));
    CHECK(d.size() == split.entries.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
      CHECK(d.features[i].image_id == d.entries[i].image_id);
      CHECK(d.entries[i].refs.size() == 3);
    }
  }
}

TEST_CASE("synth: fixed seed gives bitwise identical output") {
  SynthConfig cfg;
  cfg.n_images = 12;
  auto a = synth_generate(99, cfg);
  auto b = synth_generate(99, cfg);
  REQUIRE(a.features.size() == b.features.size());
  for (std::size_t i = 0; i < a.features.size(); ++i) {
    CHECK(a.features[i].image_id == b.features[i].image_id);
    CHECK(a.features[i].features.v == b.features[i].features.v);
    CHECK(a.captions[i].captions == b.captions[i].captions);
  }
}

TEST_CASE("synth: every caption tokenizes within the length budget") {
  SynthConfig cfg;
  cfg.n_images = 40;
  auto out = synth_generate(7, cfg);
  for (const auto& img : out.captions)
    for (const auto& cap : img.captions)
      CHECK(tokenize(cap).size() <= kMaxLen - 1);
}

TEST_CASE("synth: nearest-neighbor baseline clears CIDEr-D 5.0 on the test split") {
  // operational check that the features determine the captions: decode each
  // region back to the closest one-hot code and emit the first template
  SynthConfig cfg;
  cfg.n_images = 62;
  auto out = synth_generate(21, cfg);

  std::vector<std::vector<std::string>> tokenized;
  for (const auto& img : out.captions)
    for (const auto& c : img.captions) tokenized.push_back(tokenize(c));
  auto vocab = Vocabulary::build(tokenized, 5);

  std::size_t n = out.features.size();
  std::size_t n_test = n / 10;
  std::size_t first_test = n - n_test;

  std::vector<std::vector<metrics::TokenSeq>> train_refs;
  for (std::size_t i = 0; i < n - 2 * n_test; ++i) {
    std::vector<metrics::TokenSeq> refs;
    for (const auto& c : out.captions[i].captions)
      refs.push_back(vocab.encode(tokenize(c)));
    train_refs.push_back(refs);
  }
  auto idf = metrics::IdfCorpus::build(train_refs);

  const auto& attrs = synth_attributes();
  const auto& nouns = synth_nouns();
  double total = 0.0;
  for (std::size_t i = first_test; i < n; ++i) {
    const Tensor& f = out.features[i].features;
    std::vector<SynthObject> objs;
    for (std::size_t r = 0; r < f.rows(); ++r) {
      int best_attr = 0, best_noun = 0;
      for (std::size_t a = 1; a < attrs.size(); ++a)
        if (f.at(r, a) > f.at(r, best_attr)) best_attr = static_cast<int>(a);
      for (std::size_t m = 1; m < nouns.size(); ++m)
        if (f.at(r, attrs.size() + m) > f.at(r, attrs.size() + best_noun))
          best_noun = static_cast<int>(m);
      objs.push_back(SynthObject{best_attr, best_noun});
    }
    auto caption = synth_captions_for(objs)[0];
    std::vector<metrics::TokenSeq> refs;
    for (const auto& c : out.captions[i].captions)
      refs.push_back(vocab.encode(tokenize(c)));
    total += metrics::cider_d(vocab.encode(tokenize(caption)), refs, idf);
  }
  double mean = total / static_cast<double>(n_test);
  INFO("nearest-neighbor CIDEr-D = " << mean);
  CHECK(mean > 5.0);
}

TEST_CASE("strip_specials drops BOS/EOS/PAD and keeps UNK") {
  std::vector<int> ids = {kBos, 5, kUnk, 7, kPad, kEos};
  CHECK(strip_specials(ids) == std::vector<int>{5, kUnk, 7});
}
