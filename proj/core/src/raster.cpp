#include "jigsaw/raster.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <string>

#include "jigsaw/error.hpp"
#include "jigsaw/rng.hpp"

namespace jigsaw {

Raster crop(const Raster& image, int x, int y, int w, int h) {
  if (x < 0 || y < 0 || w < 0 || h < 0 || x + w > image.width || y + h > image.height) {
    throw ValidationError("crop window outside image");
  }
  Raster out(w, h);
  for (int row = 0; row < h; ++row) {
    const auto* src = &image.rgb[(static_cast<std::size_t>(y + row) * image.width + x) * 3];
    std::copy_n(src, static_cast<std::size_t>(w) * 3, &out.rgb[static_cast<std::size_t>(row) * w * 3]);
  }
  return out;
}

Raster center_crop(const Raster& image, int w, int h) {
  return crop(image, (image.width - w) / 2, (image.height - h) / 2, w, h);
}

Raster resize_bilinear(const Raster& image, int w, int h) {
  if (image.empty() || w <= 0 || h <= 0) throw ValidationError("resize of empty image");
  Raster out(w, h);
  const double sx = static_cast<double>(image.width) / w;
  const double sy = static_cast<double>(image.height) / h;
  for (int y = 0; y < h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, image.height - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, image.height - 1);
    const double ty = fy - y0;
    for (int x = 0; x < w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, image.width - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, image.width - 1);
      const double tx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        const double top = image.at(x0, y0, c) * (1 - tx) + image.at(x1, y0, c) * tx;
        const double bot = image.at(x0, y1, c) * (1 - tx) + image.at(x1, y1, c) * tx;
        out.at(x, y, c) = static_cast<std::uint8_t>(std::lround(top * (1 - ty) + bot * ty));
      }
    }
  }
  return out;
}

void blit(Raster& canvas, const Raster& tile, int x, int y) {
  if (x < 0 || y < 0 || x + tile.width > canvas.width || y + tile.height > canvas.height) {
    throw ValidationError("tile does not fit canvas");
  }
  for (int row = 0; row < tile.height; ++row) {
    std::copy_n(&tile.rgb[static_cast<std::size_t>(row) * tile.width * 3],
                static_cast<std::size_t>(tile.width) * 3,
                &canvas.rgb[(static_cast<std::size_t>(y + row) * canvas.width + x) * 3]);
  }
}

// ---------------------------------------------------------------------------
// PPM (binary P6, maxval 255)

namespace {

void skip_ws_and_comments(std::istream& in) {
  for (;;) {
    const int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      return;
    }
  }
}

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

}  // namespace

Raster read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::string magic;
  in >> magic;
  if (magic != "P6") throw DataError(path.string() + ": not a binary PPM");
  int w = 0, h = 0, maxval = 0;
  skip_ws_and_comments(in);
  in >> w;
  skip_ws_and_comments(in);
  in >> h;
  skip_ws_and_comments(in);
  in >> maxval;
  if (!in || w <= 0 || h <= 0 || maxval != 255) throw DataError(path.string() + ": bad PPM header");
  in.get();
  Raster img(w, h);
  in.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.rgb.size())) {
    throw DataError(path.string() + ": truncated PPM data");
  }
  return img;
}

void write_ppm(const std::filesystem::path& path, const Raster& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.rgb.data()), static_cast<std::streamsize>(image.rgb.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// PNG via the libpng simplified API

Raster read_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw DataError(path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  Raster img(static_cast<int>(image.width), static_cast<int>(image.height));
  if (!png_image_finish_read(&image, nullptr, img.rgb.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw DataError(path.string() + ": " + msg);
  }
  return img;
}

void write_png(const std::filesystem::path& path, const Raster& image) {
  png_image desc{};
  desc.version = PNG_IMAGE_VERSION;
  desc.width = static_cast<png_uint_32>(image.width);
  desc.height = static_cast<png_uint_32>(image.height);
  desc.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&desc, path.c_str(), 0, image.rgb.data(), 0, nullptr)) {
    throw DataError("cannot write " + path.string() + ": " + desc.message);
  }
}

bool is_supported_image(const std::filesystem::path& path) {
  const auto ext = lower_extension(path);
  return ext == ".ppm" || ext == ".png";
}

Raster read_image(const std::filesystem::path& path) {
  const auto ext = lower_extension(path);
  if (ext == ".ppm") return read_ppm(path);
  if (ext == ".png") return read_png(path);
  throw DataError("unsupported image format: " + path.string());
}

void write_image(const std::filesystem::path& path, const Raster& image) {
  const auto ext = lower_extension(path);
  if (ext == ".ppm") return write_ppm(path, image);
  if (ext == ".png") return write_png(path, image);
  throw DataError("unsupported image format: " + path.string());
}

Raster synthetic_image(int width, int height, std::uint64_t seed) {
  Rng rng(seed);
  struct Wave {
    double fx, fy, phase, amp;
  };
  struct Blob {
    double cx, cy, radius, strength;
  };
  Wave waves[3][4];
  Blob blobs[3][5];
  double base[3];
  for (int c = 0; c < 3; ++c) {
    base[c] = 60.0 + 135.0 * rng.uniform();
    for (auto& w : waves[c]) {
      w = {(rng.uniform() * 3.0 + 0.3) / width, (rng.uniform() * 3.0 + 0.3) / height,
           rng.uniform() * 6.283185307179586, 15.0 + 35.0 * rng.uniform()};
    }
    for (auto& b : blobs[c]) {
      b = {rng.uniform() * width, rng.uniform() * height, (0.05 + 0.2 * rng.uniform()) * std::min(width, height),
           (rng.uniform() - 0.5) * 160.0};
    }
  }
  Raster img(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < 3; ++c) {
        double v = base[c];
        for (const auto& w : waves[c]) v += w.amp * std::sin(6.283185307179586 * (w.fx * x + w.fy * y) + w.phase);
        for (const auto& b : blobs[c]) {
          const double dx = x - b.cx, dy = y - b.cy;
          v += b.strength * std::exp(-(dx * dx + dy * dy) / (2.0 * b.radius * b.radius));
        }
        img.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return img;
}

}  // namespace jigsaw
