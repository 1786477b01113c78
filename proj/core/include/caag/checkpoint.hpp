#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "caag/adam.hpp"
#include "caag/model.hpp"

namespace caag::ckpt {

inline constexpr std::uint32_t kVersion = 1;

struct CheckpointMeta {
  int epoch = 0;
  double best_val = 0.0;
  std::uint64_t vocab_hash = 0;
  nlohmann::json run_config;                       // verbatim snapshot
  nlohmann::json extra = nlohmann::json::object();  // e.g. trainer RNG state
};

/// Binary container: magic "CKPT1\0", u32 version, u64 JSON header length,
/// header bytes, then raw little-endian f64 data. The header carries a named
/// tensor index with element offsets into the data section, so any reader
/// can load tensors without knowing the model layout. Round-trips are
/// bitwise.
void save_checkpoint(const std::string& path, model::Model& m,
                     const diff::Adam* opt, const CheckpointMeta& meta);

/// Loads parameters by name into an existing model (shapes must match).
/// Optimizer state is restored when both the file and `opt` carry it.
CheckpointMeta load_checkpoint(const std::string& path, model::Model& m,
                               diff::Adam* opt);

/// Header-only peek (dims validation, config recovery).
CheckpointMeta peek_checkpoint(const std::string& path);

}  // namespace caag::ckpt
