#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "caag/tensor.hpp"
#include "caag/vocab.hpp"

namespace caag::corpus {

/// Spatial region features for one image: k rows of width d, k >= 1 and
/// variable per image.
struct RegionFeatureSet {
  std::string image_id;
  Tensor features;  // [k x d]

  std::size_t regions() const { return features.rows(); }
  std::size_t dim() const { return features.cols(); }
};

// ---------------------------------------------------------------------------
// FVEC container (bit-exact):
//   magic "FVEC1\0", u32 LE image count; per image: u32 id length, UTF-8 id,
//   u32 k, u32 d, then k*d little-endian f64 row-major.
// ---------------------------------------------------------------------------

struct FvecRecord {
  RegionFeatureSet set;
  std::uint64_t offset;  // byte offset of this record in the file
};

void write_fvec(const std::string& path, const std::vector<RegionFeatureSet>& sets);
std::vector<FvecRecord> read_fvec(const std::string& path);
/// Random access read of a single record (offset as reported by read_fvec and
/// stored in manifests).
RegionFeatureSet read_fvec_at(const std::string& path, std::uint64_t offset);

// ---------------------------------------------------------------------------
// Captions JSON: {"images": [{"id": str, "captions": [str, ...]}]}
// ---------------------------------------------------------------------------

struct ImageCaptions {
  std::string id;
  std::vector<std::string> captions;
};

void write_captions_json(const std::string& path,
                         const std::vector<ImageCaptions>& images);
std::vector<ImageCaptions> read_captions_json(const std::string& path);

// ---------------------------------------------------------------------------
// Dataset manifest: split assignments with encoded references and feature
// file offsets.
// ---------------------------------------------------------------------------

struct ManifestEntry {
  std::string image_id;
  std::uint64_t feature_offset = 0;
  std::vector<std::vector<int>> refs;  // encoded, no specials
};

struct Split {
  std::string name;
  std::vector<ManifestEntry> entries;
};

struct DatasetManifest {
  std::uint64_t vocab_hash = 0;
  std::size_t feature_dim = 0;
  std::vector<Split> splits;

  const Split& split(const std::string& name) const;
};

/// Deterministic split assignment by image order: last 10% test, preceding
/// 10% val, rest train (at least one image each when possible).
DatasetManifest build_manifest(const std::vector<FvecRecord>& features,
                               const std::vector<ImageCaptions>& captions,
                               const Vocabulary& vocab,
                               std::size_t max_len = kMaxLen);

void write_manifest(const std::string& path, const DatasetManifest& m);
DatasetManifest read_manifest(const std::string& path);

/// One split materialized in memory, features aligned with entries.
struct Dataset {
  std::vector<ManifestEntry> entries;
  std::vector<RegionFeatureSet> features;

  std::size_t size() const { return entries.size(); }
};

Dataset load_split(const DatasetManifest& m, const std::string& split_name,
                   const std::string& fvec_path);

}  // namespace caag::corpus
