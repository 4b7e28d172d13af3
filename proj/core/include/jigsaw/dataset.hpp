#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "jigsaw/puzzle.hpp"
#include "jigsaw/raster.hpp"

namespace jigsaw {

/// On-disk description of one instance directory:
///
///   <dir>/manifest.json
///   <dir>/fragments/frag_0000.ppm ... frag_<MN-1>.ppm   (binary P6, named by
///                                                        ground-truth index)
///
/// Checksums are FNV-1a 64 over each fragment file's bytes; the aggregate
/// checksum is FNV-1a 64 over the per-fragment checksums in index order
/// (each as 8 little-endian bytes). Both are stored as 16-digit hex.
struct PuzzleManifest {
  std::string image_id;
  int rows = 0;
  int cols = 0;
  int fragment_px = 0;
  int gap_px = 0;
  std::uint64_t shuffle_seed = 0;
  std::vector<int> initial_placement;
  std::uint64_t checksum = 0;
  std::vector<std::uint64_t> fragment_checksums;

  nlohmann::json to_json() const;
  /// Throws ManifestError on any schema violation.
  static PuzzleManifest from_json(const nlohmann::json& j);

  friend bool operator==(const PuzzleManifest&, const PuzzleManifest&) = default;
};

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

/// Largest fragment side that fits: floor((side - (n - 1) * gap) / n).
int fit_fragment_px(int side, int n, int gap_px);

/// Pixels needed along one axis: n * fragment_px + (n - 1) * gap_px.
int required_extent(int n, int fragment_px, int gap_px);

/// Scales `image` up (bilinear, aspect preserved) only if it is smaller than
/// w×h, then center-crops it to exactly w×h.
Raster fit_image(const Raster& image, int w, int h);

/// Cuts a board out of an image that is at least the required size. The
/// image is center-cropped to the exact extent; the gap_px strips between
/// neighbouring fragments are discarded.
PuzzleSpec slice(const Raster& image, BoardShape shape, int fragment_px, int gap_px);

/// Seeded uniform permutation, redrawn until it is not the identity.
Permutation shuffle(const PuzzleSpec& spec, std::uint64_t seed);

/// Image to instance. fragment_px <= 0 picks the largest that fits the image
/// as is; otherwise the image is fitted to the required extent first.
PuzzleInstance make_instance(const Raster& image, const std::string& id, BoardShape shape, int fragment_px,
                             int gap_px, std::uint64_t shuffle_seed);

PuzzleManifest save_instance(const std::filesystem::path& dir, const PuzzleInstance& instance,
                             const std::string& image_id, std::uint64_t shuffle_seed);

struct LoadedInstance {
  PuzzleManifest manifest;
  PuzzleInstance instance;
};

/// Verifies every fragment against the manifest. Throws ManifestError,
/// MissingFragmentError or ChecksumError; nothing is returned on failure.
LoadedInstance load_instance(const std::filesystem::path& dir);

std::string fragment_file_name(int index);

}  // namespace jigsaw
