#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "tabraster/error.hpp"

namespace tabraster {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;

  std::uint8_t operator[](int c) const { return c == 0 ? r : (c == 1 ? g : b); }
  bool operator==(const Rgb&) const = default;
};

inline constexpr Rgb kWhite{255, 255, 255};

// 8-bit interleaved RGB raster, row-major, top row first.
class ImageCanvas {
 public:
  ImageCanvas() = default;
  ImageCanvas(int width, int height, Rgb fill = kWhite) : width_(width), height_(height) {
    if (width < 1 || height < 1) throw ConfigError("image dimensions must be positive");
    pixels_.resize(static_cast<std::size_t>(width) * height * 3);
    for (std::size_t i = 0; i < pixels_.size(); i += 3) {
      pixels_[i] = fill.r;
      pixels_[i + 1] = fill.g;
      pixels_[i + 2] = fill.b;
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }

  std::uint8_t* row(int y) { return pixels_.data() + static_cast<std::size_t>(y) * width_ * 3; }
  const std::uint8_t* row(int y) const {
    return pixels_.data() + static_cast<std::size_t>(y) * width_ * 3;
  }

  Rgb at(int x, int y) const {
    const auto* p = row(y) + 3 * x;
    return {p[0], p[1], p[2]};
  }
  void set(int x, int y, Rgb c) {
    auto* p = row(y) + 3 * x;
    p[0] = c.r;
    p[1] = c.g;
    p[2] = c.b;
  }

  std::vector<std::uint8_t>& pixels() { return pixels_; }
  const std::vector<std::uint8_t>& pixels() const { return pixels_; }

  bool operator==(const ImageCanvas&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

}  // namespace tabraster
