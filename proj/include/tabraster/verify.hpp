#pragma once

// Decoder oracle: recovers approximate feature values from a bar image by
// measuring bar widths. Used to check encoding fidelity and to bound how far
// augmentation moves the encoded values.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <string>
#include <vector>

#include "json.hpp"
#include "tabraster/augment.hpp"
#include "tabraster/encode.hpp"
#include "tabraster/error.hpp"
#include "tabraster/image.hpp"
#include "tabraster/ingest.hpp"
#include "tabraster/parallel.hpp"

namespace tabraster {

// Channel difference (out of 255) at or below which a pixel counts as background.
inline constexpr int kForegroundThreshold = 8;

struct DecodedSample {
  std::vector<double> values;      // in [0, 1]
  std::vector<double> confidence;  // fraction of pixel rows within 1 px of the median width
};

namespace verify_detail {

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  if (v.size() % 2) return v[mid];
  const double hi = v[mid];
  const double lo = *std::max_element(v.begin(), v.begin() + mid);
  return 0.5 * (lo + hi);
}

}  // namespace verify_detail

inline DecodedSample decode(const ImageCanvas& img, const LayoutSpec& layout) {
  if (img.width() != layout.width || img.height() != layout.height)
    throw ConfigError("image is " + std::to_string(img.width()) + "x" + std::to_string(img.height()) +
                      ", layout expects " + std::to_string(layout.width) + "x" +
                      std::to_string(layout.height));
  const Rgb bg = layout.background;
  int contrast = 255;
  for (const Rgb& c : layout.palette) {
    int d = 0;
    for (int ch = 0; ch < 3; ++ch) d = std::max(d, std::abs(int{c[ch]} - int{bg[ch]}));
    contrast = std::min(contrast, d);
  }
  if (contrast <= kForegroundThreshold) throw ConfigError("palette is indistinguishable from background");

  const int W = layout.width;
  const double b = layout.bar_width;
  DecodedSample out;
  out.values.assign(layout.features, 0.0);
  out.confidence.assign(layout.features, 0.0);
  std::vector<double> coverage(W);
  std::vector<std::vector<double>> widths(layout.features);

  for (int band = 0; band < layout.rows; ++band) {
    const int j_begin = band * layout.columns;
    const int j_end = std::min(layout.features, j_begin + layout.columns);
    const auto [first, last] = layout.pixel_rows(band);
    for (int y = first; y < last; ++y) {
      const std::uint8_t* p = img.row(y);
      for (int x = 0; x < W; ++x) {
        int d = 0;
        for (int ch = 0; ch < 3; ++ch) d = std::max(d, std::abs(int{p[3 * x + ch]} - int{bg[ch]}));
        coverage[x] = d > kForegroundThreshold ? std::min(1.0, static_cast<double>(d) / contrast) : 0.0;
      }
      for (int j = j_begin; j < j_end; ++j) {
        const double x0 = layout.cell_x(j);
        const double x1 = std::min<double>(W, x0 + b);
        double w = 0.0;
        const int px_end = std::min(W, static_cast<int>(std::ceil(x1)));
        for (int px = static_cast<int>(std::floor(x0)); px < px_end; ++px) {
          const double overlap = std::min<double>(px + 1, x1) - std::max<double>(px, x0);
          if (overlap > 0.0) w += coverage[px] * overlap;
        }
        widths[j].push_back(w);
      }
    }
  }
  for (int j = 0; j < layout.features; ++j) {
    const double med = verify_detail::median(widths[j]);
    out.values[j] = std::clamp(med / b, 0.0, 1.0);
    const auto agree = std::count_if(widths[j].begin(), widths[j].end(),
                                     [med](double w) { return std::abs(w - med) <= 1.0; });
    out.confidence[j] = widths[j].empty() ? 0.0 : static_cast<double>(agree) / widths[j].size();
  }
  return out;
}

struct FeatureDeviation {
  std::string name;
  double clean_mean = 0.0;
  double clean_max = 0.0;
  double augmented_mean = 0.0;
  double augmented_max = 0.0;
};

struct RoundtripReport {
  std::vector<FeatureDeviation> features;
  std::size_t trials = 0;
  // Over all features of all trials.
  double clean_mean = 0.0;
  double clean_max = 0.0;
  double augmented_mean = 0.0;
  double augmented_max = 0.0;
  // Largest per-image mean deviation among augmented trials.
  double augmented_worst_image_mean = 0.0;
  // Trial counts per morphology branch, indexed by MorphBranch.
  std::array<std::size_t, 5> branch_counts{};

  nlohmann::json summary_json() const {
    nlohmann::json branches;
    for (int b = 0; b < 5; ++b)
      branches[std::string(to_string(static_cast<MorphBranch>(b)))] = branch_counts[b];
    return {{"record", "summary"},
            {"trials", trials},
            {"clean_mean_abs_dev", clean_mean},
            {"clean_max_abs_dev", clean_max},
            {"augmented_mean_abs_dev", augmented_mean},
            {"augmented_max_abs_dev", augmented_max},
            {"augmented_worst_image_mean_abs_dev", augmented_worst_image_mean},
            {"branches", branches}};
  }

  // One record per feature followed by a summary record.
  std::string to_jsonl() const {
    std::string out;
    for (std::size_t j = 0; j < features.size(); ++j) {
      const auto& f = features[j];
      out += nlohmann::json{{"record", "feature"},
                            {"index", j},
                            {"name", f.name},
                            {"clean_mean_abs_dev", f.clean_mean},
                            {"clean_max_abs_dev", f.clean_max},
                            {"augmented_mean_abs_dev", f.augmented_mean},
                            {"augmented_max_abs_dev", f.augmented_max}}
                 .dump();
      out += '\n';
    }
    out += summary_json().dump();
    out += '\n';
    return out;
  }
};

// Trial t renders row t % n, augments it as copy t / n + 1 under cfg.seed and
// compares both the clean and the augmented decode with the true values.
inline RoundtripReport roundtrip_report(const NormalizedTable& table, const LayoutSpec& layout,
                                        const AugmentConfig& cfg, std::size_t n_trials,
                                        unsigned workers = 1) {
  if (n_trials < 1) throw ConfigError("roundtrip_report needs at least one trial");
  if (table.n() == 0) throw ConfigError("roundtrip_report needs a non-empty table");
  if (static_cast<int>(table.m()) != layout.features)
    throw ConfigError("table and layout disagree on feature count");
  cfg.validate();
  const std::size_t m = table.m();
  std::vector<double> clean(n_trials * m), augmented(n_trials * m);
  std::vector<MorphBranch> branches(n_trials);
  parallel_for(n_trials, workers, [&](std::size_t t) {
    const std::size_t row = t % table.n();
    const auto x = table.values.row(row);
    const ImageCanvas img = rasterize(x, layout);
    const auto dc = decode(img, layout);
    MorphologyPlan plan;
    const ImageCanvas aug = augment_image(img, cfg, row, t / table.n() + 1, &plan);
    const auto da = decode(aug, layout);
    branches[t] = plan.branch;
    for (std::size_t j = 0; j < m; ++j) {
      clean[t * m + j] = std::abs(dc.values[j] - x[j]);
      augmented[t * m + j] = std::abs(da.values[j] - x[j]);
    }
  });

  RoundtripReport r;
  r.trials = n_trials;
  r.features.resize(m);
  for (std::size_t j = 0; j < m; ++j) r.features[j].name = j < table.feature_names.size() ? table.feature_names[j] : "f" + std::to_string(j);
  for (std::size_t t = 0; t < n_trials; ++t) {
    double image_sum = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      auto& f = r.features[j];
      const double c = clean[t * m + j], a = augmented[t * m + j];
      f.clean_mean += c;
      f.augmented_mean += a;
      f.clean_max = std::max(f.clean_max, c);
      f.augmented_max = std::max(f.augmented_max, a);
      image_sum += a;
    }
    r.augmented_worst_image_mean = std::max(r.augmented_worst_image_mean, image_sum / m);
    ++r.branch_counts[static_cast<int>(branches[t])];
  }
  for (auto& f : r.features) {
    r.clean_mean += f.clean_mean;
    r.augmented_mean += f.augmented_mean;
    f.clean_mean /= n_trials;
    f.augmented_mean /= n_trials;
    r.clean_max = std::max(r.clean_max, f.clean_max);
    r.augmented_max = std::max(r.augmented_max, f.augmented_max);
  }
  r.clean_mean /= static_cast<double>(n_trials * m);
  r.augmented_mean /= static_cast<double>(n_trials * m);
  return r;
}

}  // namespace tabraster
