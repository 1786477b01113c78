#include "caag/data.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

namespace caag::corpus {

namespace {

constexpr char kMagic[6] = {'F', 'V', 'E', 'C', '1', '\0'};

void put_u32(std::ostream& os, std::uint32_t x) {
  unsigned char b[4] = {static_cast<unsigned char>(x & 0xff),
                        static_cast<unsigned char>((x >> 8) & 0xff),
                        static_cast<unsigned char>((x >> 16) & 0xff),
                        static_cast<unsigned char>((x >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& os, double x) {
  std::uint64_t bits;
  std::memcpy(&bits, &x, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

struct Reader {
  std::ifstream is;
  std::string path;
  std::uint64_t pos = 0;

  explicit Reader(const std::string& p) : is(p, std::ios::binary), path(p) {
    if (!is) throw Error("fvec: cannot open '" + p + "'");
  }

  void fail(const std::string& why) const {
    throw Error("fvec: " + why + " in '" + path + "' at byte offset " +
                std::to_string(pos));
  }

  void bytes(void* dst, std::size_t n) {
    is.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n) fail("truncated file");
    pos += n;
  }

  std::uint32_t u32() {
    unsigned char b[4];
    bytes(b, 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) |
           (static_cast<std::uint32_t>(b[3]) << 24);
  }

  double f64() {
    unsigned char b[8];
    bytes(b, 8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double x;
    std::memcpy(&x, &bits, 8);
    return x;
  }

  RegionFeatureSet record() {
    std::uint32_t id_len = u32();
    if (id_len > (1u << 20)) fail("implausible id length");
    std::string id(id_len, '\0');
    if (id_len) bytes(id.data(), id_len);
    std::uint32_t k = u32();
    std::uint32_t d = u32();
    if (k == 0 || d == 0) fail("zero region count or dimension");
    Tensor f = Tensor::zeros({k, d});
    for (std::size_t i = 0; i < f.numel(); ++i) {
      std::uint64_t at = pos;
      f.v[i] = f64();
      if (!std::isfinite(f.v[i])) {
        pos = at;
        fail("non-finite feature value");
      }
    }
    return RegionFeatureSet{std::move(id), std::move(f)};
  }
};

}  // namespace

void write_fvec(const std::string& path, const std::vector<RegionFeatureSet>& sets) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("fvec: cannot open '" + path + "' for writing");
  os.write(kMagic, 6);
  put_u32(os, static_cast<std::uint32_t>(sets.size()));
  for (const auto& s : sets) {
    if (s.features.rank() != 2 || s.regions() == 0)
      throw Error("fvec: feature set for '" + s.image_id + "' must be [k x d], k >= 1");
    if (!s.features.all_finite())
      throw Error("fvec: non-finite feature for '" + s.image_id + "'");
    put_u32(os, static_cast<std::uint32_t>(s.image_id.size()));
    os.write(s.image_id.data(), static_cast<std::streamsize>(s.image_id.size()));
    put_u32(os, static_cast<std::uint32_t>(s.regions()));
    put_u32(os, static_cast<std::uint32_t>(s.dim()));
    for (double x : s.features.v) put_f64(os, x);
  }
  if (!os) throw Error("fvec: write failed for '" + path + "'");
}

std::vector<FvecRecord> read_fvec(const std::string& path) {
  Reader r(path);
  char magic[6];
  r.bytes(magic, 6);
  if (std::memcmp(magic, kMagic, 6) != 0) {
    r.pos = 0;
    r.fail("bad magic");
  }
  std::uint32_t count = r.u32();
  std::vector<FvecRecord> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint64_t off = r.pos;
    out.push_back(FvecRecord{r.record(), off});
  }
  return out;
}

RegionFeatureSet read_fvec_at(const std::string& path, std::uint64_t offset) {
  Reader r(path);
  char magic[6];
  r.bytes(magic, 6);
  if (std::memcmp(magic, kMagic, 6) != 0) {
    r.pos = 0;
    r.fail("bad magic");
  }
  r.is.seekg(static_cast<std::streamoff>(offset));
  if (!r.is) r.fail("seek failed");
  r.pos = offset;
  return r.record();
}

void write_captions_json(const std::string& path,
                         const std::vector<ImageCaptions>& images) {
  nlohmann::json j;
  j["images"] = nlohmann::json::array();
  for (const auto& img : images)
    j["images"].push_back({{"id", img.id}, {"captions", img.captions}});
  std::ofstream os(path);
  if (!os) throw Error("captions: cannot open '" + path + "' for writing");
  os << j.dump(2) << "\n";
}

std::vector<ImageCaptions> read_captions_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("captions: cannot open '" + path + "'");
  nlohmann::json j;
  is >> j;
  std::vector<ImageCaptions> out;
  for (const auto& img : j.at("images"))
    out.push_back(ImageCaptions{img.at("id").get<std::string>(),
                                img.at("captions").get<std::vector<std::string>>()});
  return out;
}

const Split& DatasetManifest::split(const std::string& name) const {
  for (const auto& s : splits)
    if (s.name == name) return s;
  throw Error("manifest: no split named '" + name + "'");
}

DatasetManifest build_manifest(const std::vector<FvecRecord>& features,
                               const std::vector<ImageCaptions>& captions,
                               const Vocabulary& vocab, std::size_t max_len) {
  std::unordered_map<std::string, const ImageCaptions*> by_id;
  for (const auto& c : captions) by_id[c.id] = &c;

  DatasetManifest m;
  m.vocab_hash = vocab.hash();
  m.feature_dim = features.empty() ? 0 : features[0].set.dim();

  std::vector<ManifestEntry> entries;
  for (const auto& rec : features) {
    auto it = by_id.find(rec.set.image_id);
    if (it == by_id.end() || it->second->captions.empty())
      throw Error("manifest: image '" + rec.set.image_id + "' has no captions");
    if (rec.set.dim() != m.feature_dim)
      throw Error("manifest: feature dim mismatch for '" + rec.set.image_id + "'");
    ManifestEntry e;
    e.image_id = rec.set.image_id;
    e.feature_offset = rec.offset;
    for (const auto& text : it->second->captions)
      e.refs.push_back(vocab.encode(tokenize(text, max_len)));
    entries.push_back(std::move(e));
  }

  std::size_t n = entries.size();
  std::size_t n_test = n >= 10 ? n / 10 : (n >= 3 ? 1 : 0);
  std::size_t n_val = n_test;
  std::size_t n_train = n - n_val - n_test;

  Split train{"train", {}}, val{"val", {}}, test{"test", {}};
  for (std::size_t i = 0; i < n; ++i) {
    if (i < n_train)
      train.entries.push_back(entries[i]);
    else if (i < n_train + n_val)
      val.entries.push_back(entries[i]);
    else
      test.entries.push_back(entries[i]);
  }
  m.splits = {std::move(train), std::move(val), std::move(test)};
  return m;
}

void write_manifest(const std::string& path, const DatasetManifest& m) {
  nlohmann::json j;
  j["vocab_hash"] = m.vocab_hash;
  j["feature_dim"] = m.feature_dim;
  j["splits"] = nlohmann::json::array();
  for (const auto& s : m.splits) {
    nlohmann::json js;
    js["name"] = s.name;
    js["entries"] = nlohmann::json::array();
    for (const auto& e : s.entries)
      js["entries"].push_back({{"image_id", e.image_id},
                               {"offset", e.feature_offset},
                               {"refs", e.refs}});
    j["splits"].push_back(std::move(js));
  }
  std::ofstream os(path);
  if (!os) throw Error("manifest: cannot open '" + path + "' for writing");
  os << j.dump(2) << "\n";
}

DatasetManifest read_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("manifest: cannot open '" + path + "'");
  nlohmann::json j;
  is >> j;
  DatasetManifest m;
  m.vocab_hash = j.at("vocab_hash").get<std::uint64_t>();
  m.feature_dim = j.at("feature_dim").get<std::size_t>();
  for (const auto& js : j.at("splits")) {
    Split s;
    s.name = js.at("name").get<std::string>();
    for (const auto& je : js.at("entries")) {
      ManifestEntry e;
      e.image_id = je.at("image_id").get<std::string>();
      e.feature_offset = je.at("offset").get<std::uint64_t>();
      e.refs = je.at("refs").get<std::vector<std::vector<int>>>();
      if (e.refs.empty())
        throw Error("manifest: image '" + e.image_id + "' has no references");
      s.entries.push_back(std::move(e));
    }
    m.splits.push_back(std::move(s));
  }
  return m;
}

Dataset load_split(const DatasetManifest& m, const std::string& split_name,
                   const std::string& fvec_path) {
  const Split& s = m.split(split_name);
  Dataset d;
  for (const auto& e : s.entries) {
    RegionFeatureSet f = read_fvec_at(fvec_path, e.feature_offset);
    if (f.image_id != e.image_id)
      throw Error("manifest: offset " + std::to_string(e.feature_offset) +
                  " resolves to '" + f.image_id + "', expected '" + e.image_id + "'");
    d.entries.push_back(e);
    d.features.push_back(std::move(f));
  }
  return d;
}

}  // namespace caag::corpus
