#pragma once

// Image augmentation for bar images: an elastic warp followed by randomly
// chosen flat morphology (dilation only, erosion only, closing, opening).
//
// Morphology convention on the white-background images produced by
// rasterize(): dilation is the per-channel maximum over the structuring
// element, so it grows bright (background) regions and narrows bars; erosion
// is the per-channel minimum, so it grows dark (bar) regions and widens bars.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tabraster/error.hpp"
#include "tabraster/image.hpp"
#include "tabraster/rng.hpp"

namespace tabraster {

struct SeSize {
  int height = 1;
  int width = 1;

  bool operator==(const SeSize&) const = default;
};

struct AugmentConfig {
  double alpha = 50.0;
  double sigma = 4.0;
  double p_dilate = 0.7;
  double p_erode = 0.7;
  // "(2, 5)" read as an OpenCV kernel size, i.e. width 2 by height 5.
  SeSize se_dilate_max{5, 2};
  SeSize se_erode_max{5, 2};
  int k = 4;  // augmented copies per training image
  std::uint64_t seed = 0;

  void validate() const {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be >= 0");
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("sigma must be > 0");
    if (!(p_dilate >= 0.0 && p_dilate <= 1.0)) throw ConfigError("p_dilate must be in [0, 1]");
    if (!(p_erode >= 0.0 && p_erode <= 1.0)) throw ConfigError("p_erode must be in [0, 1]");
    for (const auto& se : {se_dilate_max, se_erode_max})
      if (se.height < 1 || se.width < 1) throw ConfigError("structuring element dims must be >= 1");
    if (k < 0) throw ConfigError("augmentation scale k must be >= 0");
  }

  // No warp and no morphology: augment_image returns its input unchanged.
  static AugmentConfig identity() {
    AugmentConfig c;
    c.alpha = 0.0;
    c.p_dilate = 0.0;
    c.p_erode = 0.0;
    return c;
  }
};

// Reflect-101 border: ... 2 1 | 0 1 2 ... n-1 | n-2 n-3 ...
inline int reflect101(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

// Normalised Gaussian taps for offsets -radius..radius, radius = ceil(3 sigma).
inline std::vector<double> gaussian_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) sum += k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (double& w : k) w /= sum;
  return k;
}

// Separable Gaussian blur of a width x height scalar field, reflect-101 border.
inline void gaussian_blur(std::vector<double>& field, int width, int height, double sigma) {
  const auto kernel = gaussian_kernel(sigma);
  const int radius = static_cast<int>(kernel.size() / 2);
  const int taps = 2 * radius + 1;
  std::vector<double> tmp(field.size());
  std::vector<double> padded(width + 2 * radius);
  std::vector<int> yi(height + 2 * radius);
  for (int i = 0; i < height + 2 * radius; ++i) yi[i] = reflect101(i - radius, height);
  for (int y = 0; y < height; ++y) {
    const double* src = &field[static_cast<std::size_t>(y) * width];
    for (int i = 0; i < width + 2 * radius; ++i) padded[i] = src[reflect101(i - radius, width)];
    double* dst = &tmp[static_cast<std::size_t>(y) * width];
    for (int x = 0; x < width; ++x) {
      const double* p = &padded[x];
      double s = 0.0;
      for (int t = 0; t < taps; ++t) s += kernel[t] * p[t];
      dst[x] = s;
    }
  }
  for (int y = 0; y < height; ++y) {
    double* dst = &field[static_cast<std::size_t>(y) * width];
    std::fill(dst, dst + width, 0.0);
    for (int t = 0; t < taps; ++t) {
      const double w = kernel[t];
      const double* src = &tmp[static_cast<std::size_t>(yi[y + t]) * width];
      for (int x = 0; x < width; ++x) dst[x] += w * src[x];
    }
  }
}

struct DisplacementField {
  int width = 0;
  int height = 0;
  std::vector<double> dx;
  std::vector<double> dy;
};

// Uniform [-1, 1] noise per pixel and axis, Gaussian-smoothed, scaled by alpha.
inline DisplacementField make_displacement_field(int width, int height, double alpha, double sigma,
                                                 RngStream& rng) {
  DisplacementField f{width, height, {}, {}};
  const std::size_t n = static_cast<std::size_t>(width) * height;
  f.dx.resize(n);
  f.dy.resize(n);
  for (auto& v : f.dx) v = rng.uniform(-1.0, 1.0);
  for (auto& v : f.dy) v = rng.uniform(-1.0, 1.0);
  gaussian_blur(f.dx, width, height, sigma);
  gaussian_blur(f.dy, width, height, sigma);
  for (auto& v : f.dx) v *= alpha;
  for (auto& v : f.dy) v *= alpha;
  return f;
}

// Backward warp: out(x, y) = in(x + dx, y + dy), bilinear, reflect-101 border.
inline ImageCanvas remap(const ImageCanvas& img, const DisplacementField& f) {
  const int W = img.width(), H = img.height();
  ImageCanvas out(W, H);
  for (int y = 0; y < H; ++y) {
    std::uint8_t* dst = out.row(y);
    for (int x = 0; x < W; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * W + x;
      const double sx = x + f.dx[i];
      const double sy = y + f.dy[i];
      const double fx0 = std::floor(sx), fy0 = std::floor(sy);
      const double ax = sx - fx0, ay = sy - fy0;
      const int x0 = static_cast<int>(fx0), y0 = static_cast<int>(fy0);
      int xa = x0, xb = x0 + 1, ya = y0, yb = y0 + 1;
      if (x0 < 0 || x0 + 1 >= W) xa = reflect101(x0, W), xb = reflect101(x0 + 1, W);
      if (y0 < 0 || y0 + 1 >= H) ya = reflect101(y0, H), yb = reflect101(y0 + 1, H);
      const std::uint8_t* pa = img.row(ya);
      const std::uint8_t* pb = img.row(yb);
      const double w00 = (1.0 - ax) * (1.0 - ay), w01 = ax * (1.0 - ay);
      const double w10 = (1.0 - ax) * ay, w11 = ax * ay;
      for (int ch = 0; ch < 3; ++ch) {
        const double v = w00 * pa[3 * xa + ch] + w01 * pa[3 * xb + ch] + w10 * pb[3 * xa + ch] +
                         w11 * pb[3 * xb + ch];
        dst[3 * x + ch] = static_cast<std::uint8_t>(std::min(std::floor(v + 0.5), 255.0));
      }
    }
  }
  return out;
}

inline ImageCanvas elastic_distort(const ImageCanvas& img, double alpha, double sigma, RngStream& rng) {
  if (!(alpha >= 0.0)) throw ConfigError("alpha must be >= 0");
  if (!(sigma > 0.0)) throw ConfigError("sigma must be > 0");
  if (alpha == 0.0) return img;
  return remap(img, make_displacement_field(img.width(), img.height(), alpha, sigma, rng));
}

// Binary structuring element with its anchor at (height / 2, width / 2).
struct StructuringElement {
  int height = 1;
  int width = 1;
  std::vector<std::uint8_t> mask{1};

  static StructuringElement rectangle(int h, int w) {
    if (h < 1 || w < 1) throw ConfigError("structuring element dims must be >= 1");
    return {h, w, std::vector<std::uint8_t>(static_cast<std::size_t>(h) * w, 1)};
  }

  int anchor_y() const { return height / 2; }
  int anchor_x() const { return width / 2; }
  bool solid() const { return std::all_of(mask.begin(), mask.end(), [](auto v) { return v != 0; }); }
  bool empty() const { return std::none_of(mask.begin(), mask.end(), [](auto v) { return v != 0; }); }

  bool operator==(const StructuringElement&) const = default;
};

// Solid rectangle with height ~ U{1..max.height}, width ~ U{1..max.width}.
inline StructuringElement make_structuring_element(SeSize max_dims, RngStream& rng) {
  if (max_dims.height < 1 || max_dims.width < 1)
    throw ConfigError("structuring element dims must be >= 1");
  const int h = static_cast<int>(rng.uniform_int(1, max_dims.height));
  const int w = static_cast<int>(rng.uniform_int(1, max_dims.width));
  return StructuringElement::rectangle(h, w);
}

namespace morph_detail {

// out(p) = op over b in B of in(p + sign * b), per channel, reflect-101.
template <typename Op>
ImageCanvas morph(const ImageCanvas& img, const StructuringElement& se, int sign, Op op) {
  if (se.empty()) throw ConfigError("structuring element is empty");
  const int W = img.width(), H = img.height();
  if (se.solid()) {
    // A rectangle decomposes into a horizontal then a vertical pass.
    const int x_lo = sign * -se.anchor_x(), x_hi = sign * (se.width - 1 - se.anchor_x());
    const int y_lo = sign * -se.anchor_y(), y_hi = sign * (se.height - 1 - se.anchor_y());
    const int dx0 = std::min(x_lo, x_hi), dx1 = std::max(x_lo, x_hi);
    const int dy0 = std::min(y_lo, y_hi), dy1 = std::max(y_lo, y_hi);
    ImageCanvas tmp(W, H);
    std::vector<std::uint8_t> padded(3 * static_cast<std::size_t>(W + dx1 - dx0));
    for (int y = 0; y < H; ++y) {
      const std::uint8_t* src = img.row(y);
      for (int i = 0; i < W + dx1 - dx0; ++i) {
        const int sx = reflect101(i + dx0, W);
        for (int ch = 0; ch < 3; ++ch) padded[3 * i + ch] = src[3 * sx + ch];
      }
      std::uint8_t* dst = tmp.row(y);
      for (int i = 0; i < 3 * W; ++i) {
        std::uint8_t v = padded[i];
        for (int d = 1; d <= dx1 - dx0; ++d) v = op(v, padded[i + 3 * d]);
        dst[i] = v;
      }
    }
    ImageCanvas out(W, H);
    for (int y = 0; y < H; ++y) {
      std::uint8_t* dst = out.row(y);
      std::copy(tmp.row(reflect101(y + dy0, H)), tmp.row(reflect101(y + dy0, H)) + 3 * W, dst);
      for (int d = dy0 + 1; d <= dy1; ++d) {
        const std::uint8_t* src = tmp.row(reflect101(y + d, H));
        for (int i = 0; i < 3 * W; ++i) dst[i] = op(dst[i], src[i]);
      }
    }
    return out;
  }
  std::vector<std::pair<int, int>> offsets;
  for (int i = 0; i < se.height; ++i)
    for (int j = 0; j < se.width; ++j)
      if (se.mask[static_cast<std::size_t>(i) * se.width + j])
        offsets.emplace_back(sign * (i - se.anchor_y()), sign * (j - se.anchor_x()));
  ImageCanvas out(W, H);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      for (int ch = 0; ch < 3; ++ch) {
        bool first = true;
        std::uint8_t v = 0;
        for (const auto& [dy, dx] : offsets) {
          const std::uint8_t s = img.row(reflect101(y + dy, H))[3 * reflect101(x + dx, W) + ch];
          v = first ? s : op(v, s);
          first = false;
        }
        out.row(y)[3 * x + ch] = v;
      }
  return out;
}

}  // namespace morph_detail

// Per-channel maximum over the reflected element: out(p) = max in(p - b).
inline ImageCanvas dilate(const ImageCanvas& img, const StructuringElement& se) {
  return morph_detail::morph(img, se, -1, [](std::uint8_t a, std::uint8_t b) { return std::max(a, b); });
}

// Per-channel minimum over the element: out(p) = min in(p + b).
inline ImageCanvas erode(const ImageCanvas& img, const StructuringElement& se) {
  return morph_detail::morph(img, se, +1, [](std::uint8_t a, std::uint8_t b) { return std::min(a, b); });
}

enum class MorphBranch { closing, opening, dilate_only, erode_only, none };

inline std::string_view to_string(MorphBranch b) {
  switch (b) {
    case MorphBranch::closing: return "closing";
    case MorphBranch::opening: return "opening";
    case MorphBranch::dilate_only: return "dilate";
    case MorphBranch::erode_only: return "erode";
    case MorphBranch::none: return "none";
  }
  return "?";
}

struct MorphologyPlan {
  MorphBranch branch = MorphBranch::none;
  StructuringElement se_dilate;
  StructuringElement se_erode;
};

// Draws u, v, both elements and (when both operations fire) the order coin a,
// in that sequence.
inline MorphologyPlan choose_morphology(const AugmentConfig& cfg, RngStream& rng) {
  MorphologyPlan plan;
  const double u = rng.uniform01();
  const double v = rng.uniform01();
  plan.se_dilate = make_structuring_element(cfg.se_dilate_max, rng);
  plan.se_erode = make_structuring_element(cfg.se_erode_max, rng);
  const bool d = u < cfg.p_dilate;
  const bool e = v < cfg.p_erode;
  if (d && e)
    plan.branch = rng.uniform01() < 0.5 ? MorphBranch::closing : MorphBranch::opening;
  else if (d)
    plan.branch = MorphBranch::dilate_only;
  else if (e)
    plan.branch = MorphBranch::erode_only;
  return plan;
}

inline ImageCanvas apply_morphology(const ImageCanvas& img, const MorphologyPlan& plan) {
  switch (plan.branch) {
    case MorphBranch::closing: return erode(dilate(img, plan.se_dilate), plan.se_erode);
    case MorphBranch::opening: return dilate(erode(img, plan.se_erode), plan.se_dilate);
    case MorphBranch::dilate_only: return dilate(img, plan.se_dilate);
    case MorphBranch::erode_only: return erode(img, plan.se_erode);
    case MorphBranch::none: break;
  }
  return img;
}

// One augmented copy. Randomness comes from two streams keyed by
// (cfg.seed, sample_id, aug_index), so the result does not depend on which
// other images were augmented before it or on which thread runs it.
inline ImageCanvas augment_image(const ImageCanvas& img, const AugmentConfig& cfg, std::uint64_t sample_id,
                                 std::uint64_t aug_index, MorphologyPlan* trace = nullptr) {
  cfg.validate();
  RngStream elastic_rng(cfg.seed, sample_id, aug_index, Stage::elastic);
  RngStream morph_rng(cfg.seed, sample_id, aug_index, Stage::morphology);
  const ImageCanvas warped = elastic_distort(img, cfg.alpha, cfg.sigma, elastic_rng);
  const MorphologyPlan plan = choose_morphology(cfg, morph_rng);
  if (trace) *trace = plan;
  return apply_morphology(warped, plan);
}

}  // namespace tabraster
