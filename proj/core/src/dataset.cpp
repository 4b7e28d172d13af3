#include "jigsaw/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>

#include "jigsaw/error.hpp"
#include "jigsaw/rng.hpp"

namespace jigsaw {

namespace fs = std::filesystem;

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t parse_hex64(const std::string& s) {
  if (s.size() != 16 || s.find_first_not_of("0123456789abcdef") != std::string::npos) {
    throw ManifestError("checksum '" + s + "' is not 16 lowercase hex digits");
  }
  return std::stoull(s, nullptr, 16);
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFragmentError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint64_t aggregate_checksum(std::span<const std::uint64_t> parts) {
  std::vector<std::uint8_t> bytes;
  for (std::uint64_t v : parts) {
    for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  return fnv1a64(bytes);
}

}  // namespace

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t h) {
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string fragment_file_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frag_%04d.ppm", index);
  return buf;
}

nlohmann::json PuzzleManifest::to_json() const {
  nlohmann::json j;
  j["format"] = "jigsaw-instance";
  j["version"] = 1;
  j["image_id"] = image_id;
  j["rows"] = rows;
  j["cols"] = cols;
  j["fragment_px"] = fragment_px;
  j["gap_px"] = gap_px;
  j["shuffle_seed"] = shuffle_seed;
  j["initial_placement"] = initial_placement;
  j["checksum"] = hex64(checksum);
  j["fragments"] = nlohmann::json::array();
  for (std::size_t i = 0; i < fragment_checksums.size(); ++i) {
    j["fragments"].push_back({{"file", "fragments/" + fragment_file_name(static_cast<int>(i))},
                              {"checksum", hex64(fragment_checksums[i])}});
  }
  return j;
}

PuzzleManifest PuzzleManifest::from_json(const nlohmann::json& j) {
  PuzzleManifest m;
  try {
    if (j.at("format").get<std::string>() != "jigsaw-instance") throw ManifestError("manifest format is not jigsaw-instance");
    if (j.at("version").get<int>() != 1) throw ManifestError("unsupported manifest version");
    m.image_id = j.at("image_id").get<std::string>();
    m.rows = j.at("rows").get<int>();
    m.cols = j.at("cols").get<int>();
    m.fragment_px = j.at("fragment_px").get<int>();
    m.gap_px = j.at("gap_px").get<int>();
    m.shuffle_seed = j.at("shuffle_seed").get<std::uint64_t>();
    m.initial_placement = j.at("initial_placement").get<std::vector<int>>();
    m.checksum = parse_hex64(j.at("checksum").get<std::string>());
    for (const auto& f : j.at("fragments")) m.fragment_checksums.push_back(parse_hex64(f.at("checksum").get<std::string>()));
  } catch (const nlohmann::json::exception& e) {
    throw ManifestError(std::string("malformed manifest: ") + e.what());
  }
  if (m.rows < 2 || m.cols < 2) throw ManifestError("manifest board must be at least 2x2");
  const auto cells = static_cast<std::size_t>(m.rows * m.cols);
  if (m.initial_placement.size() != cells) {
    throw ManifestError("initial_placement has " + std::to_string(m.initial_placement.size()) + " entries, expected " +
                        std::to_string(cells));
  }
  if (m.fragment_checksums.size() != cells) throw ManifestError("manifest lists the wrong number of fragments");
  try {
    Permutation check(m.initial_placement);
  } catch (const ValidationError& e) {
    throw ManifestError(std::string("initial_placement is not a permutation: ") + e.what());
  }
  if (aggregate_checksum(m.fragment_checksums) != m.checksum) throw ManifestError("aggregate checksum does not match fragment list");
  return m;
}

int fit_fragment_px(int side, int n, int gap_px) {
  if (n < 1 || gap_px < 0) throw ValidationError("invalid board geometry");
  const int usable = side - (n - 1) * gap_px;
  return usable < 0 ? 0 : usable / n;
}

int required_extent(int n, int fragment_px, int gap_px) { return n * fragment_px + (n - 1) * gap_px; }

Raster fit_image(const Raster& image, int w, int h) {
  if (image.empty()) throw ValidationError("empty image");
  if (image.width >= w && image.height >= h) return center_crop(image, w, h);
  const double scale = std::max(static_cast<double>(w) / image.width, static_cast<double>(h) / image.height);
  const int sw = std::max(w, static_cast<int>(std::ceil(image.width * scale)));
  const int sh = std::max(h, static_cast<int>(std::ceil(image.height * scale)));
  return center_crop(resize_bilinear(image, sw, sh), w, h);
}

PuzzleSpec slice(const Raster& image, BoardShape shape, int fragment_px, int gap_px) {
  if (shape.rows < 2 || shape.cols < 2) throw ValidationError("board must be at least 2x2");
  if (fragment_px < 1 || gap_px < 0) throw ValidationError("fragment size must be >= 1 and gap >= 0");
  const int w = required_extent(shape.cols, fragment_px, gap_px);
  const int h = required_extent(shape.rows, fragment_px, gap_px);
  if (image.width < w || image.height < h) {
    throw ValidationError("image " + std::to_string(image.width) + "x" + std::to_string(image.height) +
                          " is smaller than the required " + std::to_string(w) + "x" + std::to_string(h));
  }
  const Raster fitted = center_crop(image, w, h);
  std::vector<Raster> tiles;
  tiles.reserve(static_cast<std::size_t>(shape.cells()));
  for (int r = 0; r < shape.rows; ++r) {
    for (int c = 0; c < shape.cols; ++c) {
      tiles.push_back(crop(fitted, c * (fragment_px + gap_px), r * (fragment_px + gap_px), fragment_px, fragment_px));
    }
  }
  return PuzzleSpec(shape, fragment_px, gap_px, std::move(tiles));
}

Permutation shuffle(const PuzzleSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  for (;;) {
    auto p = random_permutation(spec.shape().cells(), rng);
    if (!p.is_identity()) return p;
  }
}

PuzzleInstance make_instance(const Raster& image, const std::string& id, BoardShape shape, int fragment_px,
                             int gap_px, std::uint64_t shuffle_seed) {
  int fp = fragment_px;
  Raster source = image;
  if (fp <= 0) {
    fp = std::min(fit_fragment_px(image.width, shape.cols, gap_px), fit_fragment_px(image.height, shape.rows, gap_px));
    if (fp < 1) throw ValidationError("image is too small for this board and gap");
  } else {
    source = fit_image(image, required_extent(shape.cols, fp, gap_px), required_extent(shape.rows, fp, gap_px));
  }
  PuzzleSpec spec = slice(source, shape, fp, gap_px);
  Permutation initial = shuffle(spec, shuffle_seed);
  return PuzzleInstance{id, std::move(spec), std::move(initial)};
}

PuzzleManifest save_instance(const fs::path& dir, const PuzzleInstance& inst, const std::string& image_id,
                             std::uint64_t shuffle_seed) {
  const auto& spec = inst.spec;
  fs::create_directories(dir / "fragments");
  PuzzleManifest m;
  m.image_id = image_id;
  m.rows = spec.rows();
  m.cols = spec.cols();
  m.fragment_px = spec.fragment_px();
  m.gap_px = spec.gap_px();
  m.shuffle_seed = shuffle_seed;
  m.initial_placement = inst.initial.values();
  for (int i = 0; i < spec.shape().cells(); ++i) {
    const fs::path file = dir / "fragments" / fragment_file_name(i);
    write_ppm(file, spec.fragment(i));
    m.fragment_checksums.push_back(fnv1a64(read_bytes(file)));
  }
  m.checksum = aggregate_checksum(m.fragment_checksums);
  std::ofstream out(dir / "manifest.json");
  if (!out) throw DataError("cannot write " + (dir / "manifest.json").string());
  out << m.to_json().dump(2) << '\n';
  if (!out) throw DataError("write failed: " + (dir / "manifest.json").string());
  return m;
}

LoadedInstance load_instance(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw ManifestError("missing manifest " + manifest_path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ManifestError("manifest " + manifest_path.string() + " is not valid JSON: " + e.what());
  }
  PuzzleManifest m = PuzzleManifest::from_json(j);

  std::vector<Raster> tiles;
  for (int i = 0; i < m.rows * m.cols; ++i) {
    const std::string name = fragment_file_name(i);
    const fs::path file = dir / "fragments" / name;
    if (!fs::exists(file)) throw MissingFragmentError("fragment " + name + " is missing from " + dir.string());
    const auto bytes = read_bytes(file);
    if (fnv1a64(bytes) != m.fragment_checksums[static_cast<std::size_t>(i)]) {
      throw ChecksumError("fragment " + name + " does not match its checksum");
    }
    tiles.push_back(read_ppm(file));
  }
  try {
    PuzzleSpec spec({m.rows, m.cols}, m.fragment_px, m.gap_px, std::move(tiles));
    const fs::path name = dir.filename().empty() ? dir.parent_path().filename() : dir.filename();
    PuzzleInstance inst{name.string(), std::move(spec), Permutation(m.initial_placement)};
    return {std::move(m), std::move(inst)};
  } catch (const ValidationError& e) {
    throw ManifestError(std::string("manifest geometry disagrees with its fragments: ") + e.what());
  }
}

}  // namespace jigsaw
