#pragma once

// Bar-image encoding. A sample with m normalized features becomes a W x H
// image divided into `rows` bands of `columns` cells; feature j is drawn as a
// left-anchored bar in cell j whose width is value * cell width.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "tabraster/error.hpp"
#include "tabraster/image.hpp"
#include "tabraster/rng.hpp"

namespace tabraster {

struct LayoutSpec {
  int width = 0;
  int height = 0;
  int requested_rows = 0;
  // Rows actually occupied: ceil(m / columns). Smaller than requested_rows
  // when the request would leave whole trailing rows empty.
  int rows = 0;
  int columns = 0;
  int features = 0;
  double bar_width = 0.0;   // b = W / columns
  double bar_height = 0.0;  // h = H / rows
  std::vector<Rgb> palette;
  Rgb background = kWhite;
  std::uint64_t palette_seed = 0;

  int row_of(int j) const { return j / columns; }
  int column_of(int j) const { return j % columns; }
  double cell_x(int j) const { return column_of(j) * bar_width; }
  double cell_y(int j) const { return row_of(j) * bar_height; }

  // Band owning pixel row py: the one containing the pixel centre.
  int band_of_pixel_row(int py) const {
    const int k = static_cast<int>(std::floor((py + 0.5) / bar_height));
    return std::clamp(k, 0, rows - 1);
  }

  // Half-open pixel-row range [first, last) of band k.
  std::pair<int, int> pixel_rows(int k) const {
    const auto first_centre_at_or_after = [&](double y) {
      return std::clamp(static_cast<int>(std::ceil(y - 0.5)), 0, height);
    };
    const int first = k == 0 ? 0 : first_centre_at_or_after(k * bar_height);
    const int last = k == rows - 1 ? height : first_centre_at_or_after((k + 1) * bar_height);
    return {first, last};
  }
};

namespace encode_detail {

inline constexpr int kHueSteps = 6 * 255;

// Fully saturated colour at position s on the discrete hue circle, scaled by
// value v. Every such colour has a zero channel.
inline Rgb hue_color(int s, double v) {
  const int seg = s / 255;
  const int t = s % 255;
  int r = 0, g = 0, b = 0;
  switch (seg) {
    case 0: r = 255, g = t, b = 0; break;
    case 1: r = 255 - t, g = 255, b = 0; break;
    case 2: r = 0, g = 255, b = t; break;
    case 3: r = 0, g = 255 - t, b = 255; break;
    case 4: r = t, g = 0, b = 255; break;
    default: r = 255, g = 0, b = 255 - t; break;
  }
  const auto scale = [v](int c) { return static_cast<std::uint8_t>(std::floor(c * v + 0.5)); };
  return {scale(r), scale(g), scale(b)};
}

inline std::uint32_t pack(Rgb c) { return (std::uint32_t{c.r} << 16) | (std::uint32_t{c.g} << 8) | c.b; }

}  // namespace encode_detail

// m hues evenly spaced around the HSV circle at full saturation and value,
// rotated by a seed-derived offset. Beyond the 1530 distinct fully saturated
// 8-bit colours, additional rings at lower value are used.
inline std::vector<Rgb> make_palette(int m, std::uint64_t seed, Rgb background = kWhite) {
  using namespace encode_detail;
  RngStream rng(seed, {static_cast<std::uint64_t>(Stage::palette)});
  const int offset = static_cast<int>(rng.uniform_int(0, kHueSteps - 1));
  const int rings = (m + kHueSteps - 1) / kHueSteps;
  std::vector<Rgb> palette(m);
  std::unordered_set<std::uint32_t> used{pack(background)};
  for (int j = 0; j < m; ++j) {
    const int ring = j % rings;
    const int idx = j / rings;
    const int in_ring = (m - ring + rings - 1) / rings;
    const double v = 1.0 - 0.5 * ring / rings;
    const int s = static_cast<int>((offset + static_cast<long long>(idx) * kHueSteps / in_ring) % kHueSteps);
    Rgb c = hue_color(s, v);
    // Rounding in the darker rings can collide; walk the hue until free.
    for (int step = 1; used.count(pack(c)); ++step) c = hue_color((s + step) % kHueSteps, v);
    used.insert(pack(c));
    palette[j] = c;
  }
  return palette;
}

inline LayoutSpec make_layout(int m, int r, int width, int height, std::uint64_t palette_seed = 0) {
  if (m < 1) throw ConfigError("feature count must be at least 1");
  if (r < 1 || r > m)
    throw ConfigError("rows must be in 1.." + std::to_string(m) + ", got " + std::to_string(r));
  const int c = (m + r - 1) / r;
  if (width < c)
    throw ConfigError("width " + std::to_string(width) + " is smaller than the " + std::to_string(c) +
                      " columns required");
  if (height < r)
    throw ConfigError("height " + std::to_string(height) + " is smaller than the " +
                      std::to_string(r) + " rows requested");
  LayoutSpec l;
  l.width = width;
  l.height = height;
  l.requested_rows = r;
  l.columns = c;
  l.rows = (m + c - 1) / c;
  l.features = m;
  l.bar_width = static_cast<double>(width) / c;
  l.bar_height = static_cast<double>(height) / l.rows;
  l.palette_seed = palette_seed;
  l.palette = make_palette(m, palette_seed, l.background);
  return l;
}

struct BarPlacement {
  int feature = 0;  // 0-based
  int row = 0;      // 0-based band
  int column = 0;   // 0-based cell within the band
  double x_start = 0.0;
  double y_start = 0.0;
  double width = 0.0;
  double height = 0.0;
};

inline void check_sample(std::span<const double> sample, const LayoutSpec& layout) {
  if (static_cast<int>(sample.size()) != layout.features)
    throw ConfigError("sample has " + std::to_string(sample.size()) + " values, layout expects " +
                      std::to_string(layout.features));
  for (double x : sample)
    if (!(x >= 0.0 && x <= 1.0)) throw ConfigError("sample value outside [0, 1]");
}

inline std::vector<BarPlacement> place_bars(std::span<const double> sample, const LayoutSpec& layout) {
  check_sample(sample, layout);
  std::vector<BarPlacement> out;
  out.reserve(sample.size());
  for (int j = 0; j < layout.features; ++j)
    out.push_back({j, layout.row_of(j), layout.column_of(j), layout.cell_x(j), layout.cell_y(j),
                   sample[j] * layout.bar_width, layout.bar_height});
  return out;
}

// Draws every bar onto a background canvas. Horizontal edges that fall inside
// a pixel are anti-aliased by exact area coverage: the pixel becomes
// background + sum(coverage_k * (colour_k - background)), rounded. Vertically
// a pixel row belongs to the band containing its centre.
inline ImageCanvas rasterize(std::span<const double> sample, const LayoutSpec& layout) {
  const auto bars = place_bars(sample, layout);
  ImageCanvas img(layout.width, layout.height, layout.background);
  const int W = layout.width;
  std::vector<double> acc(static_cast<std::size_t>(W) * 3);
  std::vector<std::uint8_t> line(static_cast<std::size_t>(W) * 3);
  for (int band = 0; band < layout.rows; ++band) {
    std::fill(acc.begin(), acc.end(), 0.0);
    const int j_begin = band * layout.columns;
    const int j_end = std::min(layout.features, j_begin + layout.columns);
    for (int j = j_begin; j < j_end; ++j) {
      const auto& bar = bars[j];
      if (bar.width <= 0.0) continue;
      const double x0 = bar.x_start;
      const double x1 = std::min<double>(W, x0 + bar.width);
      const Rgb color = layout.palette[j];
      const int px_end = std::min(W, static_cast<int>(std::ceil(x1)));
      for (int px = static_cast<int>(std::floor(x0)); px < px_end; ++px) {
        const double cov = std::min<double>(px + 1, x1) - std::max<double>(px, x0);
        if (cov <= 0.0) continue;
        for (int ch = 0; ch < 3; ++ch)
          acc[3 * px + ch] += cov * (static_cast<int>(color[ch]) - static_cast<int>(layout.background[ch]));
      }
    }
    for (int i = 0; i < 3 * W; ++i) {
      const double v = layout.background[i % 3] + acc[i];
      line[i] = static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
    }
    const auto [first, last] = layout.pixel_rows(band);
    for (int y = first; y < last; ++y) std::copy(line.begin(), line.end(), img.row(y));
  }
  return img;
}

}  // namespace tabraster
