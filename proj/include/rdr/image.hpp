#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "rdr/error.hpp"

namespace rdr {

// Owned 8-bit RGB raster, row-major, three bytes per pixel. The one in-memory
// format every kernel consumes and produces. Immutable by convention once
// built; safe to share across threads.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // width * height * 3

  static Image create(int w, int h) {
    if (w < 1 || h < 1) {
      throw ValidationError("Image: width and height must be >= 1");
    }
    Image img;
    img.width = w;
    img.height = h;
    img.pixels.assign(static_cast<std::size_t>(w) * h * 3, 0);
    return img;
  }

  static Image filled(int w, int h, std::uint8_t r, std::uint8_t g,
                      std::uint8_t b) {
    Image img = create(w, h);
    for (std::size_t i = 0; i < img.pixels.size(); i += 3) {
      img.pixels[i] = r;
      img.pixels[i + 1] = g;
      img.pixels[i + 2] = b;
    }
    return img;
  }

  std::size_t offset(int x, int y) const {
    return (static_cast<std::size_t>(y) * width + x) * 3;
  }

  std::array<std::uint8_t, 3> at(int x, int y) const {
    const std::size_t o = offset(x, y);
    return {pixels[o], pixels[o + 1], pixels[o + 2]};
  }

  void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    const std::size_t o = offset(x, y);
    pixels[o] = r;
    pixels[o + 1] = g;
    pixels[o + 2] = b;
  }

  bool operator==(const Image&) const = default;
};

}  // namespace rdr
