#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace jigsaw {

/// 8-bit interleaved RGB image, row-major.
struct Raster {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  Raster() = default;
  Raster(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, fill) {}

  std::uint8_t& at(int x, int y, int c) {
    return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  std::uint8_t at(int x, int y, int c) const {
    return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }

  bool empty() const { return width == 0 || height == 0; }

  friend bool operator==(const Raster&, const Raster&) = default;
};

/// Copies the w×h window whose top-left corner is (x, y).
Raster crop(const Raster& image, int x, int y, int w, int h);

/// Center crop; the odd leftover pixel goes to the right/bottom edge.
Raster center_crop(const Raster& image, int w, int h);

/// Bilinear resample to exactly w×h.
Raster resize_bilinear(const Raster& image, int w, int h);

/// Pastes `tile` with its top-left corner at (x, y). The tile must fit.
void blit(Raster& canvas, const Raster& tile, int x, int y);

Raster read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const Raster& image);

Raster read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Raster& image);

/// Dispatches on extension (.ppm / .png, case-insensitive).
Raster read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const Raster& image);

bool is_supported_image(const std::filesystem::path& path);

/// Smooth procedural test image: a few low-frequency color waves plus soft
/// blobs. Deterministic in `seed`.
Raster synthetic_image(int width, int height, std::uint64_t seed);

}  // namespace jigsaw
