#pragma once

// Linear probe: multinomial logistic regression on decoded bar widths or on
// box-downsampled pixels, plus the macro-F1 and AUC metrics used to score it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "tabraster/error.hpp"
#include "tabraster/matrix.hpp"
#include "tabraster/parallel.hpp"
#include "tabraster/pipeline.hpp"
#include "tabraster/png.hpp"
#include "tabraster/rng.hpp"
#include "tabraster/verify.hpp"

namespace tabraster {

enum class Representation { decoded_features, pixels_downsampled };

inline std::string_view to_string(Representation r) {
  return r == Representation::decoded_features ? "decoded" : "pixels";
}

struct ProbeConfig {
  Representation representation = Representation::decoded_features;
  int side = 28;  // pixels_downsampled only
  double learning_rate = 0.5;
  int epochs = 200;
  double l2 = 1e-4;
  std::size_t batch_size = 32;  // 0 = full batch
  std::uint64_t seed = 0;

  void validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (!(l2 >= 0.0)) throw ConfigError("L2 weight must be >= 0");
    if (representation == Representation::pixels_downsampled && side < 1)
      throw ConfigError("downsample side must be >= 1");
  }

  // Pixel vectors have ~100x the squared norm of decoded features, so they
  // need a proportionally smaller step.
  static ProbeConfig for_representation(Representation r) {
    ProbeConfig c;
    c.representation = r;
    if (r == Representation::pixels_downsampled) c.learning_rate = 0.005;
    return c;
  }
};

struct LogisticModel {
  int classes = 0;
  Matrix weights;  // classes x dim
  std::vector<double> bias;

  LogisticModel() = default;
  LogisticModel(int c, std::size_t dim) : classes(c), weights(c, dim), bias(c, 0.0) {}

  std::size_t dim() const { return weights.cols(); }

  std::vector<double> probabilities(std::span<const double> x) const {
    std::vector<double> z(classes);
    for (int c = 0; c < classes; ++c) {
      double s = bias[c];
      const auto w = weights.row(c);
      for (std::size_t j = 0; j < x.size(); ++j) s += w[j] * x[j];
      z[c] = s;
    }
    const double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double& v : z) sum += v = std::exp(v - zmax);
    for (double& v : z) v /= sum;
    return z;
  }

  // 0-based class with the highest probability; ties go to the lower index.
  int predict(std::span<const double> x) const {
    const auto p = probabilities(x);
    return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
  }

  bool operator==(const LogisticModel&) const = default;
};

// Mean cross-entropy over `rows` plus (l2 / 2) * |W|^2; the bias is not
// penalised. Labels are 0-based. When grad is non-null it receives dL/dW and
// dL/db in the same shape as the model.
inline double loss_and_gradient(const LogisticModel& model, const Matrix& X, std::span<const int> y,
                                std::span<const std::size_t> rows, double l2, LogisticModel* grad) {
  const std::size_t d = model.dim();
  if (grad) *grad = LogisticModel(model.classes, d);
  double loss = 0.0;
  for (std::size_t i : rows) {
    const auto x = X.row(i);
    const auto p = model.probabilities(x);
    loss -= std::log(std::max(p[y[i]], 1e-300));
    if (!grad) continue;
    for (int c = 0; c < model.classes; ++c) {
      const double g = p[c] - (c == y[i] ? 1.0 : 0.0);
      auto gw = grad->weights.row(c);
      for (std::size_t j = 0; j < d; ++j) gw[j] += g * x[j];
      grad->bias[c] += g;
    }
  }
  const double inv = rows.empty() ? 0.0 : 1.0 / static_cast<double>(rows.size());
  loss *= inv;
  double wsq = 0.0;
  for (double w : model.weights.data()) wsq += w * w;
  loss += 0.5 * l2 * wsq;
  if (grad) {
    for (int c = 0; c < model.classes; ++c) {
      auto gw = grad->weights.row(c);
      const auto w = model.weights.row(c);
      for (std::size_t j = 0; j < d; ++j) gw[j] = gw[j] * inv + l2 * w[j];
      grad->bias[c] *= inv;
    }
  }
  return loss;
}

// Mini-batch gradient descent from zero weights. Batch order is reshuffled
// every epoch from (seed, epoch). If loss_history is given it receives the
// full-data loss after each epoch.
inline LogisticModel train_logistic(const Matrix& X, std::span<const int> y, int classes, const ProbeConfig& cfg,
                                    std::vector<double>* loss_history = nullptr) {
  cfg.validate();
  if (X.rows() == 0) throw ConfigError("cannot train on an empty set");
  if (y.size() != X.rows()) throw ConfigError("label count does not match rows");
  if (classes < 2) throw ConfigError("need at least two classes");
  LogisticModel model(classes, X.cols());
  std::vector<std::size_t> order(X.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t batch = cfg.batch_size == 0 ? order.size() : std::min(cfg.batch_size, order.size());
  LogisticModel grad;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (batch < order.size()) {
      RngStream rng(cfg.seed, static_cast<std::uint64_t>(epoch), 0, Stage::shuffle);
      rng.shuffle(order.begin(), order.end());
    }
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t len = std::min(batch, order.size() - start);
      loss_and_gradient(model, X, y, std::span(order).subspan(start, len), cfg.l2, &grad);
      for (int c = 0; c < classes; ++c) {
        auto w = model.weights.row(c);
        const auto g = grad.weights.row(c);
        for (std::size_t j = 0; j < w.size(); ++j) w[j] -= cfg.learning_rate * g[j];
        model.bias[c] -= cfg.learning_rate * grad.bias[c];
      }
    }
    if (loss_history) {
      std::vector<std::size_t> all(X.rows());
      std::iota(all.begin(), all.end(), std::size_t{0});
      loss_history->push_back(loss_and_gradient(model, X, y, all, cfg.l2, nullptr));
    }
  }
  return model;
}

// Unweighted mean of per-class F1 over classes that occur in y_true or y_pred.
inline double macro_f1(std::span<const int> y_true, std::span<const int> y_pred) {
  if (y_true.size() != y_pred.size()) throw ConfigError("macro_f1: length mismatch");
  std::set<int> classes(y_true.begin(), y_true.end());
  classes.insert(y_pred.begin(), y_pred.end());
  if (classes.empty()) throw ConfigError("macro_f1: no samples");
  double sum = 0.0;
  for (int c : classes) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
      const bool t = y_true[i] == c, p = y_pred[i] == c;
      tp += t && p;
      fp += !t && p;
      fn += t && !p;
    }
    sum += 2.0 * tp / static_cast<double>(2 * tp + fp + fn);
  }
  return sum / static_cast<double>(classes.size());
}

// Probability that a random positive outscores a random negative, ties
// counted as one half (Mann-Whitney U with midranks).
inline double auc_binary(std::span<const double> scores, std::span<const std::uint8_t> positive) {
  if (scores.size() != positive.size()) throw ConfigError("auc: length mismatch");
  const std::size_t n = scores.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[idx[j]] == scores[idx[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t)
      if (positive[idx[t]]) {
        rank_sum += midrank;
        ++n_pos;
      }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw ConfigError("AUC is undefined when only one class is present");
  const double np = static_cast<double>(n_pos);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

// probs is n x C; labels are 0-based. Binary problems use the class-1
// probability; otherwise the macro average of one-vs-rest AUCs over classes
// present in the labels.
inline double auc_macro(const Matrix& probs, std::span<const int> y) {
  const int C = static_cast<int>(probs.cols());
  std::set<int> present(y.begin(), y.end());
  if (present.size() < 2) throw ConfigError("AUC is undefined when only one class is present");
  const auto one_vs_rest = [&](int c) {
    std::vector<double> s(probs.rows());
    std::vector<std::uint8_t> pos(probs.rows());
    for (std::size_t i = 0; i < probs.rows(); ++i) {
      s[i] = probs(i, c);
      pos[i] = y[i] == c;
    }
    return auc_binary(s, pos);
  };
  if (C == 2) return one_vs_rest(1);
  double sum = 0.0;
  for (int c : present) sum += one_vs_rest(c);
  return sum / static_cast<double>(present.size());
}

struct ProbeMetrics {
  double macro_f1 = 0.0;
  double auc = 0.0;
  double accuracy = 0.0;
  std::size_t samples = 0;
};

inline ProbeMetrics evaluate_model(const LogisticModel& model, const Matrix& X, std::span<const int> y) {
  if (X.rows() == 0) throw ConfigError("cannot evaluate on an empty set");
  Matrix probs(X.rows(), model.classes);
  std::vector<int> pred(X.rows());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < X.rows(); ++i) {
    const auto p = model.probabilities(X.row(i));
    std::copy(p.begin(), p.end(), probs.row(i).begin());
    pred[i] = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
    correct += pred[i] == y[i];
  }
  return {macro_f1(y, pred), auc_macro(probs, y), static_cast<double>(correct) / X.rows(), X.rows()};
}

// Box average to side x side, RGB interleaved, scaled to [0, 1].
inline std::vector<double> downsample_pixels(const ImageCanvas& img, int side) {
  std::vector<double> out(static_cast<std::size_t>(side) * side * 3, 0.0);
  for (int oy = 0; oy < side; ++oy) {
    const int y0 = static_cast<int>(static_cast<long long>(oy) * img.height() / side);
    const int y1 = std::max(y0 + 1, static_cast<int>(static_cast<long long>(oy + 1) * img.height() / side));
    for (int ox = 0; ox < side; ++ox) {
      const int x0 = static_cast<int>(static_cast<long long>(ox) * img.width() / side);
      const int x1 = std::max(x0 + 1, static_cast<int>(static_cast<long long>(ox + 1) * img.width() / side));
      double acc[3] = {0, 0, 0};
      for (int y = y0; y < std::min(y1, img.height()); ++y)
        for (int x = x0; x < std::min(x1, img.width()); ++x)
          for (int ch = 0; ch < 3; ++ch) acc[ch] += img.row(y)[3 * x + ch];
      const double area = static_cast<double>((std::min(y1, img.height()) - y0) * (std::min(x1, img.width()) - x0));
      for (int ch = 0; ch < 3; ++ch)
        out[(static_cast<std::size_t>(oy) * side + ox) * 3 + ch] = acc[ch] / (255.0 * area);
    }
  }
  return out;
}

inline std::vector<double> featurize(const ImageCanvas& img, const LayoutSpec& layout, const ProbeConfig& cfg) {
  if (cfg.representation == Representation::decoded_features) return decode(img, layout).values;
  return downsample_pixels(img, cfg.side);
}

struct ProbeModel {
  LogisticModel model;
  ProbeConfig config;
};

namespace probe_detail {

inline std::pair<Matrix, std::vector<int>> load_split(const DatasetManifest& manifest,
                                                      const std::filesystem::path& root, int fold,
                                                      std::string_view split, const ProbeConfig& cfg,
                                                      unsigned workers) {
  if (fold < 0 || fold >= manifest.folds()) throw ConfigError("fold " + std::to_string(fold) + " out of range");
  const auto records = manifest.select(fold, split);
  if (records.empty())
    throw ConfigError("fold " + std::to_string(fold) + " has no " + std::string(split) + " images");
  const LayoutSpec layout = manifest.layout();
  std::vector<std::vector<double>> feats(records.size());
  parallel_for(records.size(), workers,
               [&](std::size_t i) { feats[i] = featurize(read_png(root / records[i]->image_path), layout, cfg); });
  Matrix X(records.size(), feats.front().size());
  std::vector<int> y(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    std::copy(feats[i].begin(), feats[i].end(), X.row(i).begin());
    y[i] = records[i]->label - 1;
  }
  return {std::move(X), std::move(y)};
}

}  // namespace probe_detail

inline ProbeModel train_probe(const DatasetManifest& manifest, const std::filesystem::path& root, int fold,
                              const ProbeConfig& cfg, unsigned workers = 1) {
  auto [X, y] = probe_detail::load_split(manifest, root, fold, "train", cfg, workers);
  const int classes = static_cast<int>(manifest.header.at("classes").size());
  return {train_logistic(X, y, classes, cfg), cfg};
}

inline ProbeMetrics evaluate_probe(const ProbeModel& model, const DatasetManifest& manifest,
                                   const std::filesystem::path& root, int fold, unsigned workers = 1) {
  auto [X, y] = probe_detail::load_split(manifest, root, fold, "test", model.config, workers);
  return evaluate_model(model.model, X, y);
}

// One row of the layout sweep: geometry, decoder round-trip error and the
// cross-fold mean of an in-memory probe trained on clean renders.
struct SweepPoint {
  int requested_rows = 0;
  int rows = 0;
  int columns = 0;
  double bar_width = 0.0;
  double bar_height = 0.0;
  RoundtripReport roundtrip;
  ProbeMetrics probe;

  nlohmann::json to_json() const {
    return {{"record", "sweep"},
            {"r", requested_rows},
            {"rows", rows},
            {"columns", columns},
            {"bar_width", bar_width},
            {"bar_height", bar_height},
            {"clean_mean_abs_dev", roundtrip.clean_mean},
            {"clean_max_abs_dev", roundtrip.clean_max},
            {"augmented_mean_abs_dev", roundtrip.augmented_mean},
            {"augmented_max_abs_dev", roundtrip.augmented_max},
            {"clean_mean_abs_dev_px", roundtrip.clean_mean * bar_width},
            {"augmented_mean_abs_dev_px", roundtrip.augmented_mean * bar_width},
            {"probe_macro_f1", probe.macro_f1},
            {"probe_auc", probe.auc},
            {"probe_accuracy", probe.accuracy}};
  }
};

struct SweepOptions {
  int width = 224;
  int height = 224;
  std::uint64_t palette_seed = 0;
  std::size_t trials = 200;
  int folds = 5;
  std::uint64_t split_seed = 0;
  unsigned workers = 1;
};

inline std::vector<SweepPoint> layout_sweep(const ExpandedTable& table, std::span<const int> r_list,
                                            const AugmentConfig& cfg, const ProbeConfig& pcfg,
                                            const SweepOptions& opt) {
  const int m = static_cast<int>(table.m());
  for (int r : r_list)
    if (r < 1 || r > m)
      throw ConfigError("invalid r " + std::to_string(r) + ": must be in 1.." + std::to_string(m));
  const NormalizedTable whole = normalize(table);
  const SplitPlan plan = make_splits(table.labels, opt.folds, opt.split_seed);
  std::vector<SweepPoint> out;
  for (int r : r_list) {
    const LayoutSpec layout = make_layout(m, r, opt.width, opt.height, opt.palette_seed);
    SweepPoint p;
    p.requested_rows = r;
    p.rows = layout.rows;
    p.columns = layout.columns;
    p.bar_width = layout.bar_width;
    p.bar_height = layout.bar_height;
    p.roundtrip = roundtrip_report(whole, layout, cfg, opt.trials, opt.workers);
    for (int f = 0; f < plan.folds; ++f) {
      const auto train = plan.train_rows(f), test = plan.test_rows(f);
      const auto stats = fit_normalization(table.values, train, FitScope::train_only);
      const Matrix norm = apply_normalization(table.values, stats);
      std::vector<std::vector<double>> feats(table.n());
      parallel_for(table.n(), opt.workers,
                   [&](std::size_t i) { feats[i] = featurize(rasterize(norm.row(i), layout), layout, pcfg); });
      const auto gather = [&](const std::vector<std::size_t>& rows) {
        Matrix X(rows.size(), feats.front().size());
        std::vector<int> y(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
          std::copy(feats[rows[i]].begin(), feats[rows[i]].end(), X.row(i).begin());
          y[i] = table.labels[rows[i]] - 1;
        }
        return std::pair{std::move(X), std::move(y)};
      };
      const auto [Xtr, ytr] = gather(train);
      const auto [Xte, yte] = gather(test);
      const auto model = train_logistic(Xtr, ytr, table.classes, pcfg);
      const auto metrics = evaluate_model(model, Xte, yte);
      p.probe.macro_f1 += metrics.macro_f1 / plan.folds;
      p.probe.auc += metrics.auc / plan.folds;
      p.probe.accuracy += metrics.accuracy / plan.folds;
      p.probe.samples += metrics.samples;
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace tabraster
