#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "jigsaw/mlp.hpp"

namespace jigsaw {

/// Flat binary container: a JSON header followed by raw float64 blocks.
///
///   offset 0   8 bytes   magic "JIGCKPT1"
///   offset 8   8 bytes   header length H, unsigned little-endian
///   offset 16  H bytes   UTF-8 JSON header
///   offset 16+H          blocks, each `count` IEEE-754 doubles, little-endian,
///                        in the order listed by header["blocks"]
///
/// header["blocks"] is written by the encoder as [{"name", "count"}, ...];
/// any other header keys are caller metadata. Doubles are copied bit for bit.
struct Checkpoint {
  struct Block {
    std::string name;
    std::vector<double> values;
  };

  nlohmann::json header = nlohmann::json::object();
  std::vector<Block> blocks;

  void add(std::string name, std::span<const double> values);
  const Block& block(std::string_view name) const;
  bool has_block(std::string_view name) const;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::string_view bytes);

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Stores an MLP as header entry `header[name] = {"layers": [...]}` plus a
/// parameter block named `name`.
void store_mlp(Checkpoint& ckpt, const std::string& name, const Mlp& net);
Mlp load_mlp(const Checkpoint& ckpt, const std::string& name);

/// Adam moments go to blocks `<name>.m` / `<name>.v`; scalars to the header.
void store_adam(Checkpoint& ckpt, const std::string& name, const AdamState& state);
AdamState load_adam(const Checkpoint& ckpt, const std::string& name);

}  // namespace jigsaw
