#include "jigsaw/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <iterator>
#include <sstream>

#include "jigsaw/dataset.hpp"
#include "jigsaw/error.hpp"

namespace jigsaw {

namespace {

constexpr std::string_view kMagic = "JIGCKPT2";

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint64_t checksum(std::string_view bytes) {
  return fnv1a64({reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()});
}

std::uint64_t get_u64(std::string_view in, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

}  // namespace

void Checkpoint::add(std::string name, std::span<const double> values) {
  blocks.push_back(Block{std::move(name), std::vector<double>(values.begin(), values.end())});
}

const Checkpoint::Block& Checkpoint::block(std::string_view name) const {
  for (const auto& b : blocks) {
    if (b.name == name) return b;
  }
  throw DataError("checkpoint has no block '" + std::string(name) + "'");
}

bool Checkpoint::has_block(std::string_view name) const {
  for (const auto& b : blocks) {
    if (b.name == name) return true;
  }
  return false;
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  nlohmann::json header = ckpt.header;
  header["blocks"] = nlohmann::json::array();
  std::size_t payload = 0;
  for (const auto& b : ckpt.blocks) {
    header["blocks"].push_back({{"name", b.name}, {"count", b.values.size()}});
    payload += b.values.size() * 8;
  }
  const std::string text = header.dump();
  std::string out;
  out.reserve(24 + text.size() + payload);
  out.append(kMagic);
  put_u64(out, text.size());
  out.append(text);
  for (const auto& b : ckpt.blocks) {
    for (double v : b.values) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  // trailing FNV-1a of everything before it
  put_u64(out, checksum(out));
  return out;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  if (bytes.size() < 24 || bytes.substr(0, 8) != kMagic) throw DataError("not a checkpoint (bad magic)");
  if (get_u64(bytes, bytes.size() - 8) != checksum(bytes.substr(0, bytes.size() - 8)))
    throw DataError("checkpoint checksum mismatch");
  bytes.remove_suffix(8);
  const std::uint64_t header_len = get_u64(bytes, 8);
  if (header_len > bytes.size() - 16) throw DataError("checkpoint header truncated");
  Checkpoint ckpt;
  try {
    ckpt.header = nlohmann::json::parse(bytes.substr(16, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  std::size_t at = 16 + header_len;
  if (!ckpt.header.is_object() || !ckpt.header.contains("blocks") || !ckpt.header["blocks"].is_array())
    throw DataError("checkpoint header has no block list");
  for (const auto& entry : ckpt.header["blocks"]) {
    Checkpoint::Block b;
    b.name = entry.at("name").get<std::string>();
    const auto count = entry.at("count").get<std::size_t>();
    if (count > (bytes.size() - at) / 8) throw DataError("checkpoint block '" + b.name + "' truncated");
    b.values.resize(count);
    for (std::size_t i = 0; i < count; ++i, at += 8) b.values[i] = std::bit_cast<double>(get_u64(bytes, at));
    ckpt.blocks.push_back(std::move(b));
  }
  if (at != bytes.size()) throw DataError("checkpoint has trailing bytes");
  ckpt.header.erase("blocks");
  return ckpt;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::string bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

void store_mlp(Checkpoint& ckpt, const std::string& name, const Mlp& net) {
  ckpt.header[name] = {{"layers", net.layer_sizes()}};
  ckpt.add(name, net.parameters());
}

Mlp load_mlp(const Checkpoint& ckpt, const std::string& name) {
  if (!ckpt.header.contains(name)) throw DataError("checkpoint has no network '" + name + "'");
  Mlp net(ckpt.header.at(name).at("layers").get<std::vector<std::size_t>>());
  const auto& b = ckpt.block(name);
  if (b.values.size() != net.parameter_count()) throw DataError("network '" + name + "' parameter count mismatch");
  std::copy(b.values.begin(), b.values.end(), net.parameters().begin());
  return net;
}

void store_adam(Checkpoint& ckpt, const std::string& name, const AdamState& s) {
  // Scalars travel as bit patterns so the JSON header cannot perturb them.
  ckpt.header[name] = {{"step", s.step},
                       {"learning_rate", std::bit_cast<std::uint64_t>(s.learning_rate)},
                       {"beta1", std::bit_cast<std::uint64_t>(s.beta1)},
                       {"beta2", std::bit_cast<std::uint64_t>(s.beta2)},
                       {"epsilon", std::bit_cast<std::uint64_t>(s.epsilon)}};
  ckpt.add(name + ".m", s.m);
  ckpt.add(name + ".v", s.v);
}

AdamState load_adam(const Checkpoint& ckpt, const std::string& name) {
  if (!ckpt.header.contains(name)) throw DataError("checkpoint has no optimizer '" + name + "'");
  const auto& h = ckpt.header.at(name);
  AdamState s;
  s.step = h.at("step").get<std::uint64_t>();
  s.learning_rate = std::bit_cast<double>(h.at("learning_rate").get<std::uint64_t>());
  s.beta1 = std::bit_cast<double>(h.at("beta1").get<std::uint64_t>());
  s.beta2 = std::bit_cast<double>(h.at("beta2").get<std::uint64_t>());
  s.epsilon = std::bit_cast<double>(h.at("epsilon").get<std::uint64_t>());
  s.m = ckpt.block(name + ".m").values;
  s.v = ckpt.block(name + ".v").values;
  return s;
}

}  // namespace jigsaw
