#pragma once

// Class-conditional Gaussian tables for tests, the CLI `synth` command and
// the layout sweep.

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include "json.hpp"
#include "tabraster/error.hpp"
#include "tabraster/ingest.hpp"
#include "tabraster/rng.hpp"

namespace tabraster {

struct SynthConfig {
  std::size_t n = 200;
  int features = 9;
  int classes = 2;
  // Class means are drawn from N(0, separation^2) per feature; samples add N(0, 1).
  double separation = 1.0;
  std::uint64_t seed = 0;
};

// Row i belongs to class i % classes (labels 1..C, names "c0", "c1", ...).
inline ExpandedTable make_synthetic(const SynthConfig& cfg) {
  if (cfg.n < 1 || cfg.features < 1) throw ConfigError("synthetic table needs n >= 1 and m >= 1");
  if (cfg.classes < 2) throw ConfigError("synthetic table needs at least two classes");
  ExpandedTable t;
  t.values = Matrix(cfg.n, cfg.features);
  t.classes = cfg.classes;
  for (int j = 0; j < cfg.features; ++j) {
    std::ostringstream name;
    name << 'f' << std::setw(2) << std::setfill('0') << j;
    t.feature_names.push_back(name.str());
  }
  for (int c = 0; c < cfg.classes; ++c) t.class_names.push_back("c" + std::to_string(c));

  RngStream mean_rng(cfg.seed, 0, 0, Stage::synthetic);
  Matrix means(cfg.classes, cfg.features);
  for (double& v : means.data()) v = cfg.separation * mean_rng.normal();
  RngStream rng(cfg.seed, 1, 0, Stage::synthetic);
  t.labels.resize(cfg.n);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    const int c = static_cast<int>(i % cfg.classes);
    t.labels[i] = c + 1;
    for (int j = 0; j < cfg.features; ++j) t.values(i, j) = means(c, j) + rng.normal();
  }
  return t;
}

// Writes the table as CSV (features then "label") with a matching all-numeric schema.
inline void write_csv(const ExpandedTable& t, const std::string& csv_path, const std::string& schema_path) {
  std::ofstream csv(csv_path, std::ios::binary);
  if (!csv) throw IoError("cannot write '" + csv_path + "'");
  for (const auto& name : t.feature_names) csv << name << ',';
  csv << "label\n";
  csv << std::setprecision(17);
  for (std::size_t i = 0; i < t.n(); ++i) {
    for (std::size_t j = 0; j < t.m(); ++j) csv << t.values(i, j) << ',';
    csv << t.class_names[t.labels[i] - 1] << '\n';
  }
  if (!csv) throw IoError("write failed for '" + csv_path + "'");

  nlohmann::json cols = nlohmann::json::array();
  for (const auto& name : t.feature_names) cols.push_back({{"name", name}, {"kind", "numeric"}});
  const nlohmann::json schema = {{"schema_version", kSchemaVersion}, {"label", "label"}, {"columns", cols}};
  std::ofstream out(schema_path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + schema_path + "'");
  out << schema.dump(2) << '\n';
}

}  // namespace tabraster
