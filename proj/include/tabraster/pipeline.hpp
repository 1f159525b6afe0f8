#pragma once

// End-to-end dataset construction: fold assignment, per-fold normalization,
// encoding, train-only augmentation and a line-oriented manifest.
//
// Output tree under out_dir:
//   manifest.jsonl                       header record, then one record per image
//   {fold}/{train|test}/{row:06}_{aug:02}.png
// aug 00 is the original rendering; 01..K are augmented copies.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "tabraster/augment.hpp"
#include "tabraster/checksum.hpp"
#include "tabraster/encode.hpp"
#include "tabraster/error.hpp"
#include "tabraster/ingest.hpp"
#include "tabraster/parallel.hpp"
#include "tabraster/png.hpp"
#include "tabraster/rng.hpp"

namespace tabraster {

inline constexpr int kManifestVersion = 1;

// Row-to-fold assignment. For k-fold plans fold_of_row[i] is in [0, folds);
// fold f tests on its own rows and trains on all others. A holdout plan has a
// single fold: rows marked 0 are the test set, rows marked -1 only train.
struct SplitPlan {
  std::size_t n = 0;
  int folds = 0;
  std::vector<int> fold_of_row;
  std::uint64_t seed = 0;
  bool stratified = false;
  bool holdout = false;

  std::vector<std::size_t> test_rows(int f) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < n; ++i)
      if (fold_of_row[i] == f) out.push_back(i);
    return out;
  }

  std::vector<std::size_t> train_rows(int f) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < n; ++i)
      if (fold_of_row[i] != f) out.push_back(i);
    return out;
  }

  bool is_test(std::size_t row, int f) const { return fold_of_row[row] == f; }
};

// Stratified assignment shuffles each class independently, concatenates the
// classes in label order and deals rows to folds round-robin. Each fold then
// holds floor or ceil of n_c / k rows of every class c and fold sizes differ
// by at most one.
inline SplitPlan make_splits(std::span<const int> labels, int k, std::uint64_t seed, bool stratified = true) {
  if (k < 2) throw ConfigError("folds must be >= 2");
  if (labels.size() < static_cast<std::size_t>(k))
    throw ConfigError("need at least " + std::to_string(k) + " rows for " + std::to_string(k) + " folds");
  SplitPlan plan;
  plan.n = labels.size();
  plan.folds = k;
  plan.seed = seed;
  plan.stratified = stratified;
  plan.fold_of_row.assign(plan.n, -1);

  std::vector<std::size_t> order;
  if (stratified) {
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
    for (auto& [label, rows] : by_class) {
      if (rows.size() < static_cast<std::size_t>(k))
        throw ConfigError("class " + std::to_string(label) + " has " + std::to_string(rows.size()) +
                          " rows, fewer than the " + std::to_string(k) + " folds");
      RngStream rng(seed, static_cast<std::uint64_t>(label), 0, Stage::split);
      rng.shuffle(rows.begin(), rows.end());
      order.insert(order.end(), rows.begin(), rows.end());
    }
  } else {
    order.resize(plan.n);
    for (std::size_t i = 0; i < plan.n; ++i) order[i] = i;
    RngStream rng(seed, 0, 0, Stage::split);
    rng.shuffle(order.begin(), order.end());
  }
  for (std::size_t pos = 0; pos < order.size(); ++pos)
    plan.fold_of_row[order[pos]] = static_cast<int>(pos % k);
  return plan;
}

inline SplitPlan make_holdout(const std::vector<bool>& is_test) {
  SplitPlan plan;
  plan.n = is_test.size();
  plan.folds = 1;
  plan.holdout = true;
  plan.fold_of_row.resize(plan.n);
  std::size_t tests = 0;
  for (std::size_t i = 0; i < plan.n; ++i) {
    plan.fold_of_row[i] = is_test[i] ? 0 : -1;
    tests += is_test[i];
  }
  if (tests == 0 || tests == plan.n) throw ConfigError("holdout mask must select some but not all rows");
  return plan;
}

enum class Origin { original, augmented };

inline std::string_view to_string(Origin o) { return o == Origin::original ? "original" : "augmented"; }

struct ManifestRecord {
  std::string image_path;  // relative to the dataset root, '/'-separated
  int label = 0;           // 1..C
  int fold = 0;
  std::string split;  // "train" or "test"
  Origin origin = Origin::original;
  std::size_t source_row = 0;
  int aug_index = 0;
  std::string checksum;  // SHA-256 of the file bytes

  nlohmann::json to_json() const {
    return {{"record", "image"},   {"image_path", image_path}, {"label", label},
            {"fold", fold},        {"split", split},           {"origin", to_string(origin)},
            {"source_row", source_row}, {"aug_index", aug_index}, {"checksum", checksum}};
  }

  static ManifestRecord from_json(const nlohmann::json& j) {
    ManifestRecord r;
    r.image_path = j.at("image_path").get<std::string>();
    r.label = j.at("label").get<int>();
    r.fold = j.at("fold").get<int>();
    r.split = j.at("split").get<std::string>();
    const auto origin = j.at("origin").get<std::string>();
    if (origin != "original" && origin != "augmented") throw Error("bad origin '" + origin + "'");
    r.origin = origin == "original" ? Origin::original : Origin::augmented;
    r.source_row = j.at("source_row").get<std::size_t>();
    r.aug_index = j.at("aug_index").get<int>();
    r.checksum = j.at("checksum").get<std::string>();
    return r;
  }

  bool operator==(const ManifestRecord&) const = default;
};

struct DatasetManifest {
  nlohmann::json header;
  std::vector<ManifestRecord> records;

  std::string to_jsonl() const {
    std::string out = header.dump();
    out += '\n';
    for (const auto& r : records) {
      out += r.to_json().dump();
      out += '\n';
    }
    return out;
  }

  void write(const std::filesystem::path& path) const {
    const std::string text = to_jsonl();
    write_file(path, std::vector<std::uint8_t>(text.begin(), text.end()));
  }

  static DatasetManifest load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open manifest '" + path.string() + "'");
    DatasetManifest m;
    std::string line;
    std::size_t line_no = 0;
    try {
      while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        if (line_no == 1) {
          if (j.value("record", "") != "header") throw Error("first record is not a header");
          if (j.at("manifest_version").get<int>() != kManifestVersion)
            throw Error("unsupported manifest_version");
          m.header = std::move(j);
        } else {
          m.records.push_back(ManifestRecord::from_json(j));
        }
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (m.header.is_null()) throw Error("manifest '" + path.string() + "' is empty");
    return m;
  }

  int folds() const { return header.at("split").at("folds").get<int>(); }
  int k() const { return header.at("augment").at("k").get<int>(); }

  std::vector<const ManifestRecord*> select(int fold, std::string_view split) const {
    std::vector<const ManifestRecord*> out;
    for (const auto& r : records)
      if (r.fold == fold && r.split == split) out.push_back(&r);
    return out;
  }

  LayoutSpec layout() const {
    const auto& l = header.at("layout");
    return make_layout(l.at("features").get<int>(), l.at("requested_rows").get<int>(),
                       l.at("width").get<int>(), l.at("height").get<int>(),
                       l.at("palette_seed").get<std::uint64_t>());
  }
};

inline nlohmann::json layout_json(const LayoutSpec& l) {
  std::vector<std::string> palette;
  for (const Rgb& c : l.palette) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c.r, c.g, c.b);
    palette.emplace_back(buf);
  }
  return {{"width", l.width},         {"height", l.height},       {"requested_rows", l.requested_rows},
          {"rows", l.rows},           {"columns", l.columns},     {"features", l.features},
          {"bar_width", l.bar_width}, {"bar_height", l.bar_height}, {"palette_seed", l.palette_seed},
          {"palette", palette}};
}

inline nlohmann::json augment_json(const AugmentConfig& c) {
  return {{"alpha", c.alpha},
          {"sigma", c.sigma},
          {"p_dilate", c.p_dilate},
          {"p_erode", c.p_erode},
          {"se_dilate_max", {{"height", c.se_dilate_max.height}, {"width", c.se_dilate_max.width}}},
          {"se_erode_max", {{"height", c.se_erode_max.height}, {"width", c.se_erode_max.width}}},
          {"k", c.k},
          {"seed", c.seed}};
}

struct BuildOptions {
  std::filesystem::path out_dir;
  FitScope scope = FitScope::train_only;
  unsigned workers = 1;
  std::string schema_digest;
  // Replace an existing dataset (a directory holding manifest.jsonl).
  bool overwrite = false;
};

inline std::string image_name(int fold, bool test, std::size_t row, int aug) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%d/%s/%06zu_%02d.png", fold, test ? "test" : "train", row, aug);
  return buf;
}

struct LeakageReport {
  bool passed = true;
  std::vector<std::string> failures;
  std::size_t records_checked = 0;

  void fail(std::string why) {
    passed = false;
    failures.push_back(std::move(why));
  }
};

// Structural checks on a manifest: test records are originals, augmented
// records never come from a row in their fold's test set, each training row
// has exactly 1 + K records, and (when out_dir is given) every checksum
// matches the file on disk.
inline LeakageReport verify_no_leakage(const DatasetManifest& manifest,
                                       const std::filesystem::path& out_dir = {}) {
  LeakageReport rep;
  const int k = manifest.k();
  std::map<int, std::set<std::size_t>> test_rows;
  for (const auto& r : manifest.records)
    if (r.split == "test") test_rows[r.fold].insert(r.source_row);
  std::map<std::pair<int, std::size_t>, int> train_counts;
  for (const auto& r : manifest.records) {
    ++rep.records_checked;
    const bool augmented = r.origin == Origin::augmented;
    if (r.split == "test") {
      if (augmented || r.aug_index != 0)
        rep.fail("test record " + r.image_path + " is augmented (row " + std::to_string(r.source_row) + ")");
    } else if (r.split == "train") {
      if (test_rows[r.fold].count(r.source_row))
        rep.fail("train record " + r.image_path + " uses test row " + std::to_string(r.source_row) +
                 " of fold " + std::to_string(r.fold));
      ++train_counts[{r.fold, r.source_row}];
      if (augmented != (r.aug_index > 0))
        rep.fail("record " + r.image_path + " has origin inconsistent with aug_index");
    } else {
      rep.fail("record " + r.image_path + " has unknown split '" + r.split + "'");
    }
    if (!out_dir.empty()) {
      const auto path = out_dir / r.image_path;
      std::error_code ec;
      if (!std::filesystem::exists(path, ec)) {
        rep.fail("missing file " + r.image_path);
      } else if (sha256_hex(read_file(path)) != r.checksum) {
        rep.fail("checksum mismatch for " + r.image_path);
      }
    }
  }
  for (const auto& [key, count] : train_counts)
    if (count != 1 + k)
      rep.fail("fold " + std::to_string(key.first) + " train row " + std::to_string(key.second) + " has " +
               std::to_string(count) + " records, expected " + std::to_string(1 + k));
  return rep;
}

// Rebuild-and-compare check: the test images of two builds of the same table,
// layout and split (typically with different K) must be byte-identical.
inline LeakageReport compare_test_images(const DatasetManifest& a, const DatasetManifest& b) {
  LeakageReport rep;
  const auto collect = [](const DatasetManifest& m) {
    std::map<std::string, std::string> out;
    for (const auto& r : m.records)
      if (r.split == "test") out[r.image_path] = r.checksum;
    return out;
  };
  const auto ta = collect(a), tb = collect(b);
  for (const auto& [path, sum] : ta) {
    ++rep.records_checked;
    const auto it = tb.find(path);
    if (it == tb.end())
      rep.fail("test image " + path + " missing from second build");
    else if (it->second != sum)
      rep.fail("test image " + path + " differs between builds");
  }
  for (const auto& [path, sum] : tb)
    if (!ta.count(path)) rep.fail("test image " + path + " missing from first build");
  return rep;
}

inline DatasetManifest build_dataset(const ExpandedTable& table, const SplitPlan& plan, const LayoutSpec& layout,
                                     const AugmentConfig& cfg, const BuildOptions& opt) {
  namespace fs = std::filesystem;
  cfg.validate();
  if (static_cast<int>(table.m()) != layout.features)
    throw ConfigError("layout has " + std::to_string(layout.features) + " features, table has " +
                      std::to_string(table.m()));
  if (plan.n != table.n()) throw ConfigError("split plan does not match table size");
  if (opt.out_dir.empty()) throw ConfigError("output directory not set");

  std::error_code ec;
  if (fs::exists(opt.out_dir, ec) && !fs::is_empty(opt.out_dir, ec)) {
    if (!opt.overwrite || !fs::exists(opt.out_dir / "manifest.jsonl"))
      throw IoError("output directory '" + opt.out_dir.string() + "' is not empty");
    fs::remove_all(opt.out_dir, ec);
    if (ec) throw IoError("cannot clear '" + opt.out_dir.string() + "': " + ec.message());
  }
  fs::create_directories(opt.out_dir, ec);
  if (ec) throw IoError("cannot create '" + opt.out_dir.string() + "': " + ec.message());

  std::vector<NormalizationStats> stats(plan.folds);
  for (int f = 0; f < plan.folds; ++f) {
    if (opt.scope == FitScope::whole_dataset && f > 0) {
      stats[f] = stats[0];
      continue;
    }
    const auto fit_rows = plan.train_rows(f);
    stats[f] = fit_normalization(table.values, fit_rows, opt.scope);
  }

  struct Task {
    int fold;
    std::size_t row;
  };
  std::vector<Task> tasks;
  for (int f = 0; f < plan.folds; ++f)
    for (std::size_t i = 0; i < plan.n; ++i) tasks.push_back({f, i});

  std::vector<std::vector<ManifestRecord>> results(tasks.size());
  parallel_for(tasks.size(), opt.workers, [&](std::size_t t) {
    const auto [fold, row] = tasks[t];
    const bool test = plan.is_test(row, fold);
    std::vector<double> x(table.m());
    for (std::size_t j = 0; j < x.size(); ++j)
      x[j] = normalize_value(table.values(row, j), stats[fold].min[j], stats[fold].max[j]);
    const ImageCanvas base = rasterize(x, layout);
    const int copies = test ? 0 : cfg.k;
    auto& out = results[t];
    for (int a = 0; a <= copies; ++a) {
      const auto bytes = encode_png(a == 0 ? base : augment_image(base, cfg, row, static_cast<std::uint64_t>(a)));
      ManifestRecord r;
      r.image_path = image_name(fold, test, row, a);
      r.label = table.labels[row];
      r.fold = fold;
      r.split = test ? "test" : "train";
      r.origin = a == 0 ? Origin::original : Origin::augmented;
      r.source_row = row;
      r.aug_index = a;
      r.checksum = sha256_hex(bytes);
      write_file(opt.out_dir / r.image_path, bytes);
      out.push_back(std::move(r));
    }
  });

  DatasetManifest manifest;
  nlohmann::json norm = nlohmann::json::array();
  nlohmann::json counts = nlohmann::json::array();
  for (int f = 0; f < plan.folds; ++f) {
    norm.push_back({{"fold", f}, {"min", stats[f].min}, {"max", stats[f].max}});
    const std::size_t n_test = plan.test_rows(f).size();
    counts.push_back({{"fold", f},
                      {"train_rows", plan.n - n_test},
                      {"test_rows", n_test},
                      {"train_images", (plan.n - n_test) * (1 + cfg.k)},
                      {"test_images", n_test}});
  }
  manifest.header = {{"record", "header"},
                     {"manifest_version", kManifestVersion},
                     {"schema_version", kSchemaVersion},
                     {"schema_digest", opt.schema_digest},
                     {"n_rows", plan.n},
                     {"features", table.feature_names},
                     {"classes", table.class_names},
                     {"layout", layout_json(layout)},
                     {"augment", augment_json(cfg)},
                     {"split",
                      {{"folds", plan.folds},
                       {"seed", plan.seed},
                       {"stratified", plan.stratified},
                       {"holdout", plan.holdout},
                       {"fold_of_row", plan.fold_of_row}}},
                     {"seeds", {{"split", plan.seed}, {"augment", cfg.seed}, {"palette", layout.palette_seed}}},
                     {"normalization", {{"scope", to_string(opt.scope)}, {"per_fold", norm}}},
                     {"counts", counts}};
  for (auto& rs : results)
    for (auto& r : rs) manifest.records.push_back(std::move(r));

  const auto check = verify_no_leakage(manifest);
  if (!check.passed) throw InvariantError("dataset invariant violated: " + check.failures.front());
  manifest.write(opt.out_dir / "manifest.jsonl");
  return manifest;
}

}  // namespace tabraster
