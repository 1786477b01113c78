#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "caag/data.hpp"
#include "caag/rng.hpp"

namespace caag::corpus {

/// Toy-world generator standing in for real detector features. Each image
/// holds 1..max_objects (attribute, noun) objects drawn from small closed
/// sets; region features are one-hot attribute/noun codes plus Gaussian
/// noise, and every caption is a deterministic template over the objects, so
/// the mapping from features to text is learnable by construction.
struct SynthConfig {
  int n_images = 50;
  int max_objects = 4;
  double noise_sigma = 0.1;
};

struct SynthObject {
  int attribute = 0;
  int noun = 0;
};

const std::vector<std::string>& synth_attributes();  // 8 entries
const std::vector<std::string>& synth_nouns();       // 8 entries
std::size_t synth_feature_dim();                     // one-hot attr + noun

struct SynthOutput {
  std::vector<RegionFeatureSet> features;
  std::vector<ImageCaptions> captions;
  std::vector<std::vector<SynthObject>> objects;  // ground truth per image
};

SynthOutput synth_generate(std::uint64_t seed, const SynthConfig& cfg);

/// The three reference templates for one object list.
std::vector<std::string> synth_captions_for(const std::vector<SynthObject>& objs);

}  // namespace caag::corpus
