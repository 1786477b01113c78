#include "caag/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

namespace caag::ckpt {

namespace {

constexpr char kMagic[6] = {'C', 'K', 'P', 'T', '1', '\0'};

void put_u32(std::ostream& os, std::uint32_t x) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((x >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t x) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((x >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t x = 0;
  for (int i = 0; i < 4; ++i) x |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return x;
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t x = 0;
  for (int i = 0; i < 8; ++i) x |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return x;
}

void write_doubles(std::ostream& os, const std::vector<double>& v) {
  for (double d : v) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    put_u64(os, bits);
  }
}

void read_doubles(std::istream& is, std::vector<double>& v) {
  for (double& d : v) {
    std::uint64_t bits = get_u64(is);
    std::memcpy(&d, &bits, 8);
  }
}

nlohmann::json header_and_seek(std::istream& is, const std::string& path) {
  char magic[6];
  is.read(magic, 6);
  if (!is || std::memcmp(magic, kMagic, 6) != 0)
    throw Error("checkpoint: bad magic in '" + path + "'");
  std::uint32_t version = get_u32(is);
  if (version != kVersion)
    throw Error("checkpoint: version " + std::to_string(version) +
                " in '" + path + "' is not supported (expected " +
                std::to_string(kVersion) + ")");
  std::uint64_t hlen = get_u64(is);
  std::string hbytes(hlen, '\0');
  is.read(hbytes.data(), static_cast<std::streamsize>(hlen));
  if (!is) throw Error("checkpoint: truncated header in '" + path + "'");
  return nlohmann::json::parse(hbytes);
}

CheckpointMeta meta_from_header(const nlohmann::json& h) {
  CheckpointMeta meta;
  meta.epoch = h.at("epoch").get<int>();
  meta.best_val = h.at("best_val").get<double>();
  meta.vocab_hash = h.at("vocab_hash").get<std::uint64_t>();
  meta.run_config = h.value("run_config", nlohmann::json::object());
  meta.extra = h.value("extra", nlohmann::json::object());
  return meta;
}

}  // namespace

void save_checkpoint(const std::string& path, model::Model& m,
                     const diff::Adam* opt, const CheckpointMeta& meta) {
  nlohmann::json header;
  header["epoch"] = meta.epoch;
  header["best_val"] = meta.best_val;
  header["vocab_hash"] = meta.vocab_hash;
  header["run_config"] = meta.run_config;
  header["extra"] = meta.extra;

  auto params = m.all_params();
  std::uint64_t offset = 0;
  header["tensors"] = nlohmann::json::array();
  for (const diff::Parameter* p : params) {
    header["tensors"].push_back(
        {{"name", p->name}, {"shape", p->value.shape}, {"offset", offset}});
    offset += p->value.numel();
  }

  header["adam"] = nlohmann::json::object();
  header["adam"]["present"] = opt != nullptr;
  if (opt) {
    auto& slots = const_cast<diff::Adam*>(opt)->slots();
    header["adam"]["t"] = opt->steps();
    header["adam"]["entries"] = nlohmann::json::array();
    for (std::size_t i = 0; i < opt->params().size(); ++i) {
      header["adam"]["entries"].push_back({{"name", opt->params()[i]->name},
                                           {"m_offset", offset},
                                           {"v_offset", offset + slots[i].m.numel()}});
      offset += 2 * slots[i].m.numel();
    }
  }

  std::string hbytes = header.dump();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("checkpoint: cannot open '" + path + "' for writing");
  os.write(kMagic, 6);
  put_u32(os, kVersion);
  put_u64(os, hbytes.size());
  os.write(hbytes.data(), static_cast<std::streamsize>(hbytes.size()));
  for (const diff::Parameter* p : params) write_doubles(os, p->value.v);
  if (opt) {
    auto& slots = const_cast<diff::Adam*>(opt)->slots();
    for (std::size_t i = 0; i < slots.size(); ++i) {
      write_doubles(os, slots[i].m.v);
      write_doubles(os, slots[i].v.v);
    }
  }
  if (!os) throw Error("checkpoint: write failed for '" + path + "'");
}

CheckpointMeta load_checkpoint(const std::string& path, model::Model& m,
                               diff::Adam* opt) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("checkpoint: cannot open '" + path + "'");
  nlohmann::json header = header_and_seek(is, path);
  std::streampos data_start = is.tellg();

  std::map<std::string, diff::Parameter*> by_name;
  for (diff::Parameter* p : m.all_params()) by_name[p->name] = p;

  std::size_t loaded = 0;
  for (const auto& entry : header.at("tensors")) {
    std::string name = entry.at("name").get<std::string>();
    auto it = by_name.find(name);
    if (it == by_name.end())
      throw Error("checkpoint: unknown tensor '" + name + "' in '" + path + "'");
    auto shape = entry.at("shape").get<std::vector<std::size_t>>();
    if (shape != it->second->value.shape)
      throw Error("checkpoint: tensor '" + name + "' has shape " +
                  shape_str(shape) + ", model expects " +
                  shape_str(it->second->value.shape));
    std::uint64_t off = entry.at("offset").get<std::uint64_t>();
    is.seekg(data_start + static_cast<std::streamoff>(off * 8));
    read_doubles(is, it->second->value.v);
    if (!is) throw Error("checkpoint: truncated data in '" + path + "'");
    loaded += 1;
  }
  if (loaded != by_name.size())
    throw Error("checkpoint: '" + path + "' holds " + std::to_string(loaded) +
                " tensors, model has " + std::to_string(by_name.size()));

  if (opt && header.at("adam").at("present").get<bool>()) {
    std::map<std::string, std::size_t> slot_by_name;
    for (std::size_t i = 0; i < opt->params().size(); ++i)
      slot_by_name[opt->params()[i]->name] = i;
    opt->set_steps(header.at("adam").at("t").get<std::uint64_t>());
    for (const auto& entry : header.at("adam").at("entries")) {
      std::string name = entry.at("name").get<std::string>();
      auto it = slot_by_name.find(name);
      if (it == slot_by_name.end()) continue;  // optimizer covers fewer params
      auto& slot = opt->slots()[it->second];
      is.seekg(data_start +
               static_cast<std::streamoff>(entry.at("m_offset").get<std::uint64_t>() * 8));
      read_doubles(is, slot.m.v);
      is.seekg(data_start +
               static_cast<std::streamoff>(entry.at("v_offset").get<std::uint64_t>() * 8));
      read_doubles(is, slot.v.v);
      if (!is) throw Error("checkpoint: truncated optimizer state in '" + path + "'");
    }
  }

  return meta_from_header(header);
}

CheckpointMeta peek_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("checkpoint: cannot open '" + path + "'");
  return meta_from_header(header_and_seek(is, path));
}

}  // namespace caag::ckpt
