#include "caag/synth.hpp"

namespace caag::corpus {

const std::vector<std::string>& synth_attributes() {
  static const std::vector<std::string> attrs = {"red",   "blue", "green", "yellow",
                                                 "small", "big",  "old",   "shiny"};
  return attrs;
}

const std::vector<std::string>& synth_nouns() {
  static const std::vector<std::string> nouns = {"ball", "box", "cat", "dog",
                                                 "cup",  "tree", "car", "hat"};
  return nouns;
}

std::size_t synth_feature_dim() {
  return synth_attributes().size() + synth_nouns().size();
}

std::vector<std::string> synth_captions_for(const std::vector<SynthObject>& objs) {
  const auto& attrs = synth_attributes();
  const auto& nouns = synth_nouns();
  auto phrase = [&](const SynthObject& o) {
    return attrs[o.attribute] + " " + nouns[o.noun];
  };
  std::string plain, with_a, with_the;
  for (std::size_t i = 0; i < objs.size(); ++i) {
    if (i) {
      plain += " and ";
      with_a += " and ";
      with_the += " and ";
    }
    plain += phrase(objs[i]);
    with_a += "a " + phrase(objs[i]);
    with_the += "the " + phrase(objs[i]);
  }
  return {with_a, with_the, plain};
}

SynthOutput synth_generate(std::uint64_t seed, const SynthConfig& cfg) {
  if (cfg.n_images < 1) throw Error("synth: n_images must be >= 1");
  if (cfg.max_objects < 1 || cfg.max_objects > 4)
    throw Error("synth: max_objects must be in [1, 4]");

  Rng rng(seed);
  const auto& attrs = synth_attributes();
  const auto& nouns = synth_nouns();
  std::size_t d = synth_feature_dim();

  SynthOutput out;
  for (int img = 0; img < cfg.n_images; ++img) {
    std::size_t n_obj = 1 + rng.index(static_cast<std::size_t>(cfg.max_objects));
    std::vector<SynthObject> objs;
    for (std::size_t i = 0; i < n_obj; ++i)
      objs.push_back(SynthObject{static_cast<int>(rng.index(attrs.size())),
                                 static_cast<int>(rng.index(nouns.size()))});

    Tensor f = Tensor::zeros({n_obj, d});
    for (std::size_t i = 0; i < n_obj; ++i) {
      f.at(i, static_cast<std::size_t>(objs[i].attribute)) = 1.0;
      f.at(i, attrs.size() + static_cast<std::size_t>(objs[i].noun)) = 1.0;
      for (std::size_t j = 0; j < d; ++j)
        f.at(i, j) += cfg.noise_sigma * rng.gaussian();
    }

    std::string id = "img" + std::to_string(img);
    out.features.push_back(RegionFeatureSet{id, std::move(f)});
    out.captions.push_back(ImageCaptions{id, synth_captions_for(objs)});
    out.objects.push_back(std::move(objs));
  }
  return out;
}

}  // namespace caag::corpus
