#pragma once

// Command-line front end. run_cli is the whole program; tools/main.cpp only
// forwards argv, which lets the tests drive every subcommand in-process.
//
// Exit status: 0 on success, 2 for usage, schema and configuration errors,
// 1 for I/O failures and violated invariants.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "tabraster/augment.hpp"
#include "tabraster/checksum.hpp"
#include "tabraster/encode.hpp"
#include "tabraster/error.hpp"
#include "tabraster/ingest.hpp"
#include "tabraster/pipeline.hpp"
#include "tabraster/png.hpp"
#include "tabraster/probe.hpp"
#include "tabraster/synth.hpp"
#include "tabraster/verify.hpp"

namespace tabraster {

inline constexpr const char* kVersion = "0.1.0";

inline constexpr const char* kOutEnv = "TABRASTER_OUT";

struct RunConfig {
  std::string input;
  std::string schema;
  std::string out;
  int width = 224;
  int height = 224;
  int size = 0;
  int rows = 1;
  int k = 4;
  double alpha = 50.0;
  double sigma = 4.0;
  double p_dilate = 0.7;
  double p_erode = 0.7;
  std::string se_max = "5x2";
  std::uint64_t seed = 0;
  int folds = 5;
  bool global_normalization = false;
  std::string representation = "decoded";
  unsigned workers = default_workers();
  bool force = false;

  // verify
  std::string dataset;
  std::string against;
  std::size_t trials = 1000;

  // probe
  int epochs = 200;
  double learning_rate = 0.0;
  double l2 = 1e-4;
  std::size_t batch = 32;

  // encode / augment-preview
  long long row = -1;
  int count = -1;

  // layout-sweep / synth
  std::string r_list = "1,2,4,8,16";
  std::size_t n = 200;
  int features = 37;
  int classes = 3;
  double separation = 1.0;
  std::string schema_out;
};

namespace cli_detail {

inline SeSize parse_se(const std::string& s) {
  const auto x = s.find('x');
  if (x == std::string::npos) throw ConfigError("--se-max must look like HxW, got '" + s + "'");
  SeSize se;
  try {
    std::size_t used = 0;
    se.height = std::stoi(s.substr(0, x), &used);
    if (used != x) throw std::invalid_argument(s);
    const auto w = s.substr(x + 1);
    se.width = std::stoi(w, &used);
    if (used != w.size()) throw std::invalid_argument(s);
  } catch (const std::logic_error&) {
    throw ConfigError("--se-max must look like HxW, got '" + s + "'");
  }
  return se;
}

inline std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw ConfigError("not an integer list: '" + s + "'");
    }
  }
  if (out.empty()) throw ConfigError("empty integer list");
  return out;
}

inline Representation parse_representation(const std::string& s) {
  if (s == "decoded") return Representation::decoded_features;
  if (s == "pixels") return Representation::pixels_downsampled;
  throw ConfigError("unknown representation '" + s + "' (expected decoded or pixels)");
}

inline AugmentConfig augment_config(const RunConfig& rc) {
  AugmentConfig c;
  c.alpha = rc.alpha;
  c.sigma = rc.sigma;
  c.p_dilate = rc.p_dilate;
  c.p_erode = rc.p_erode;
  c.se_dilate_max = c.se_erode_max = parse_se(rc.se_max);
  c.k = rc.k;
  c.seed = rc.seed;
  c.validate();
  return c;
}

inline ProbeConfig probe_config(const RunConfig& rc) {
  ProbeConfig c = ProbeConfig::for_representation(parse_representation(rc.representation));
  c.epochs = rc.epochs;
  c.l2 = rc.l2;
  c.batch_size = rc.batch;
  c.seed = rc.seed;
  if (rc.learning_rate > 0.0) c.learning_rate = rc.learning_rate;
  c.validate();
  return c;
}

inline std::filesystem::path output_dir(const RunConfig& rc) {
  if (!rc.out.empty()) return rc.out;
  if (const char* env = std::getenv(kOutEnv); env && *env) return env;
  throw ConfigError(std::string("no output directory: pass --out or set ") + kOutEnv);
}

inline LayoutSpec layout_for(const RunConfig& rc, int m) {
  const int w = rc.size > 0 ? rc.size : rc.width;
  const int h = rc.size > 0 ? rc.size : rc.height;
  return make_layout(m, rc.rows, w, h, rc.seed);
}

struct LoadedTable {
  ExpandedTable table;
  std::string schema_digest;
};

inline LoadedTable load(const RunConfig& rc) {
  if (rc.input.empty() || rc.schema.empty()) throw ConfigError("--input and --schema are required");
  const std::string schema_text = read_text_file(rc.schema);
  const FeatureSchema schema = parse_schema(schema_text);
  return {load_expanded(rc.input, schema), sha256_hex(schema_text)};
}

inline void add_input(CLI::App* sub, RunConfig& rc, bool required) {
  auto* in = sub->add_option("--input", rc.input, "Delimited table with a header row")->check(CLI::ExistingFile);
  auto* sc = sub->add_option("--schema", rc.schema, "JSON feature schema")->check(CLI::ExistingFile);
  if (required) {
    in->required();
    sc->required();
  }
}

inline void add_layout(CLI::App* sub, RunConfig& rc) {
  sub->add_option("--width", rc.width, "Image width in pixels")->capture_default_str();
  sub->add_option("--height", rc.height, "Image height in pixels")->capture_default_str();
  sub->add_option("--size", rc.size, "Square image side; overrides --width/--height");
  sub->add_option("--rows", rc.rows, "Requested bar rows r")->capture_default_str();
}

inline void add_augment(CLI::App* sub, RunConfig& rc) {
  sub->add_option("--k", rc.k, "Augmented copies per training image")->capture_default_str();
  sub->add_option("--alpha", rc.alpha, "Elastic displacement scale")->capture_default_str();
  sub->add_option("--sigma", rc.sigma, "Elastic smoothing sigma")->capture_default_str();
  sub->add_option("--p-dilate", rc.p_dilate, "Dilation probability")->capture_default_str();
  sub->add_option("--p-erode", rc.p_erode, "Erosion probability")->capture_default_str();
  sub->add_option("--se-max", rc.se_max, "Largest structuring element, HxW")->capture_default_str();
}

inline void add_seed(CLI::App* sub, RunConfig& rc) {
  sub->add_option("--seed", rc.seed, "Root seed for splits, palette and augmentation")->capture_default_str();
}

inline void add_workers(CLI::App* sub, RunConfig& rc) {
  sub->add_option("--workers", rc.workers, "Worker threads (output does not depend on it)");
}

inline void add_probe(CLI::App* sub, RunConfig& rc) {
  sub->add_option("--representation", rc.representation, "decoded or pixels")->capture_default_str();
  sub->add_option("--epochs", rc.epochs, "Training epochs")->capture_default_str();
  sub->add_option("--lr", rc.learning_rate, "Learning rate (default depends on representation)");
  sub->add_option("--l2", rc.l2, "L2 penalty on weights")->capture_default_str();
  sub->add_option("--batch", rc.batch, "Mini-batch size, 0 for full batch")->capture_default_str();
}

inline int cmd_encode(const RunConfig& rc, std::ostream& out) {
  const auto [table, digest] = load(rc);
  const auto dir = output_dir(rc);
  const LayoutSpec layout = layout_for(rc, static_cast<int>(table.m()));
  const NormalizedTable norm = normalize(table);
  if (rc.row >= static_cast<long long>(norm.n())) throw ConfigError("--row out of range");
  std::filesystem::create_directories(dir);
  std::size_t written = 0;
  for (std::size_t i = 0; i < norm.n(); ++i) {
    if (rc.row >= 0 && static_cast<long long>(i) != rc.row) continue;
    char name[48];
    std::snprintf(name, sizeof name, "%06zu.png", i);
    write_png(rasterize(norm.values.row(i), layout), dir / name);
    ++written;
  }
  out << nlohmann::json{{"record", "encode"}, {"images", written}, {"layout", layout_json(layout)}}.dump() << '\n';
  return 0;
}

inline int cmd_augment_preview(const RunConfig& rc, std::ostream& out) {
  const auto [table, digest] = load(rc);
  const auto dir = output_dir(rc);
  const AugmentConfig cfg = augment_config(rc);
  const LayoutSpec layout = layout_for(rc, static_cast<int>(table.m()));
  const NormalizedTable norm = normalize(table);
  const std::size_t row = rc.row < 0 ? 0 : static_cast<std::size_t>(rc.row);
  if (row >= norm.n()) throw ConfigError("--row out of range");
  const int count = rc.count < 0 ? cfg.k : rc.count;
  std::filesystem::create_directories(dir);
  const ImageCanvas base = rasterize(norm.values.row(row), layout);
  const auto name = [&](int a) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%06zu_%02d.png", row, a);
    return dir / buf;
  };
  write_png(base, name(0));
  for (int a = 1; a <= count; ++a) {
    MorphologyPlan plan;
    const ImageCanvas img = augment_image(base, cfg, row, static_cast<std::uint64_t>(a), &plan);
    write_png(img, name(a));
    const auto dec = decode(img, layout);
    double dev = 0.0;
    for (std::size_t j = 0; j < norm.m(); ++j) dev += std::abs(dec.values[j] - norm.values(row, j));
    out << nlohmann::json{{"record", "preview"},
                          {"row", row},
                          {"aug_index", a},
                          {"branch", to_string(plan.branch)},
                          {"se_dilate", {plan.se_dilate.height, plan.se_dilate.width}},
                          {"se_erode", {plan.se_erode.height, plan.se_erode.width}},
                          {"mean_abs_dev", dev / static_cast<double>(norm.m())}}
               .dump()
        << '\n';
  }
  return 0;
}

inline int cmd_build(const RunConfig& rc, std::ostream& out) {
  const auto [table, digest] = load(rc);
  const AugmentConfig cfg = augment_config(rc);
  const LayoutSpec layout = layout_for(rc, static_cast<int>(table.m()));
  const SplitPlan plan = make_splits(table.labels, rc.folds, rc.seed);
  BuildOptions opt;
  opt.out_dir = output_dir(rc);
  opt.scope = rc.global_normalization ? FitScope::whole_dataset : FitScope::train_only;
  opt.workers = rc.workers;
  opt.schema_digest = digest;
  opt.overwrite = rc.force;
  const DatasetManifest manifest = build_dataset(table, plan, layout, cfg, opt);
  std::size_t train = 0, test = 0;
  for (const auto& c : manifest.header.at("counts")) {
    out << nlohmann::json{{"record", "fold"},
                          {"fold", c.at("fold")},
                          {"train_rows", c.at("train_rows")},
                          {"test_rows", c.at("test_rows")},
                          {"train_images", c.at("train_images")},
                          {"test_images", c.at("test_images")}}
               .dump()
        << '\n';
    train += c.at("train_images").get<std::size_t>();
    test += c.at("test_images").get<std::size_t>();
  }
  out << nlohmann::json{{"record", "build"},
                        {"out", opt.out_dir.string()},
                        {"n_rows", table.n()},
                        {"features", table.m()},
                        {"rows", layout.rows},
                        {"columns", layout.columns},
                        {"bar_width", layout.bar_width},
                        {"k", cfg.k},
                        {"folds", plan.folds},
                        {"normalization", to_string(opt.scope)},
                        {"train_images", train},
                        {"test_images", test}}
             .dump()
      << '\n';
  return 0;
}

inline nlohmann::json leakage_json(std::string_view check, const LeakageReport& r) {
  return {{"record", check}, {"passed", r.passed}, {"records_checked", r.records_checked}, {"failures", r.failures}};
}

inline int cmd_verify(const RunConfig& rc, std::ostream& out) {
  if (!rc.dataset.empty()) {
    const auto manifest = DatasetManifest::load(std::filesystem::path(rc.dataset) / "manifest.jsonl");
    const auto rep = verify_no_leakage(manifest, rc.dataset);
    out << leakage_json("leakage", rep).dump() << '\n';
    bool ok = rep.passed;
    if (!rc.against.empty()) {
      const auto other = DatasetManifest::load(std::filesystem::path(rc.against) / "manifest.jsonl");
      const auto cmp = compare_test_images(manifest, other);
      out << leakage_json("test_images_match", cmp).dump() << '\n';
      ok = ok && cmp.passed;
    }
    return ok ? 0 : 1;
  }
  const auto [table, digest] = load(rc);
  const AugmentConfig cfg = augment_config(rc);
  const LayoutSpec layout = layout_for(rc, static_cast<int>(table.m()));
  const auto report = roundtrip_report(normalize(table), layout, cfg, rc.trials, rc.workers);
  out << report.to_jsonl();
  const double bound = 1.5 / layout.bar_width;
  if (report.clean_max > bound) {
    out << nlohmann::json{{"record", "violation"}, {"clean_max_abs_dev", report.clean_max}, {"bound", bound}}.dump()
        << '\n';
    return 1;
  }
  return 0;
}

inline int cmd_probe(const RunConfig& rc, std::ostream& out) {
  if (rc.dataset.empty()) throw ConfigError("--dataset is required");
  const ProbeConfig cfg = probe_config(rc);
  const std::filesystem::path root = rc.dataset;
  const auto manifest = DatasetManifest::load(root / "manifest.jsonl");
  ProbeMetrics mean;
  for (int f = 0; f < manifest.folds(); ++f) {
    const auto model = train_probe(manifest, root, f, cfg, rc.workers);
    const auto m = evaluate_probe(model, manifest, root, f, rc.workers);
    out << nlohmann::json{{"record", "fold"},
                          {"fold", f},
                          {"representation", to_string(cfg.representation)},
                          {"macro_f1", m.macro_f1},
                          {"auc", m.auc},
                          {"accuracy", m.accuracy},
                          {"test_images", m.samples}}
               .dump()
        << '\n';
    mean.macro_f1 += m.macro_f1 / manifest.folds();
    mean.auc += m.auc / manifest.folds();
    mean.accuracy += m.accuracy / manifest.folds();
    mean.samples += m.samples;
  }
  out << nlohmann::json{{"record", "mean"},
                        {"folds", manifest.folds()},
                        {"representation", to_string(cfg.representation)},
                        {"macro_f1", mean.macro_f1},
                        {"auc", mean.auc},
                        {"accuracy", mean.accuracy},
                        {"test_images", mean.samples}}
             .dump()
      << '\n';
  return 0;
}

inline int cmd_layout_sweep(const RunConfig& rc, std::ostream& out) {
  ExpandedTable table;
  if (!rc.input.empty() || !rc.schema.empty()) {
    table = load(rc).table;
  } else {
    SynthConfig sc;
    sc.n = rc.n;
    sc.features = rc.features;
    sc.classes = rc.classes;
    sc.separation = rc.separation;
    sc.seed = rc.seed;
    table = make_synthetic(sc);
  }
  const auto r_list = parse_int_list(rc.r_list);
  SweepOptions opt;
  opt.width = rc.size > 0 ? rc.size : rc.width;
  opt.height = rc.size > 0 ? rc.size : rc.height;
  opt.palette_seed = rc.seed;
  opt.trials = rc.trials;
  opt.folds = rc.folds;
  opt.split_seed = rc.seed;
  opt.workers = rc.workers;
  for (const auto& p : layout_sweep(table, r_list, augment_config(rc), probe_config(rc), opt))
    out << p.to_json().dump() << '\n';
  return 0;
}

inline int cmd_synth(const RunConfig& rc, std::ostream& out) {
  if (rc.out.empty()) throw ConfigError("--out is required");
  SynthConfig sc;
  sc.n = rc.n;
  sc.features = rc.features;
  sc.classes = rc.classes;
  sc.separation = rc.separation;
  sc.seed = rc.seed;
  const auto table = make_synthetic(sc);
  const std::string schema_path =
      rc.schema_out.empty() ? std::filesystem::path(rc.out).replace_extension(".schema.json").string() : rc.schema_out;
  write_csv(table, rc.out, schema_path);
  out << nlohmann::json{{"record", "synth"},
                        {"csv", rc.out},
                        {"schema", schema_path},
                        {"n_rows", table.n()},
                        {"features", table.m()},
                        {"classes", table.classes}}
             .dump()
      << '\n';
  return 0;
}

}  // namespace cli_detail

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  using namespace cli_detail;
  RunConfig rc;
  CLI::App app{"Render tabular datasets as bar images with leakage-safe augmentation", "tabraster"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("tabraster ") + kVersion + " (schema_version " +
                                        std::to_string(kSchemaVersion) + ", manifest_version " +
                                        std::to_string(kManifestVersion) + ")");

  auto* encode = app.add_subcommand("encode", "Render every row (or --row) as a PNG");
  add_input(encode, rc, true);
  encode->add_option("--out", rc.out, std::string("Output directory (default $") + kOutEnv + ")");
  add_layout(encode, rc);
  add_seed(encode, rc);
  encode->add_option("--row", rc.row, "Only this row (0-based)");

  auto* preview = app.add_subcommand("augment-preview", "Write one row and its augmented copies");
  add_input(preview, rc, true);
  preview->add_option("--out", rc.out, std::string("Output directory (default $") + kOutEnv + ")");
  add_layout(preview, rc);
  add_augment(preview, rc);
  add_seed(preview, rc);
  preview->add_option("--row", rc.row, "Row to render (0-based)");
  preview->add_option("--count", rc.count, "Number of augmented copies (default --k)");

  auto* build = app.add_subcommand("build", "Build the k-fold image dataset and manifest");
  add_input(build, rc, true);
  build->add_option("--out", rc.out, std::string("Output directory (default $") + kOutEnv + ")");
  add_layout(build, rc);
  add_augment(build, rc);
  add_seed(build, rc);
  add_workers(build, rc);
  build->add_option("--folds", rc.folds, "Cross-validation folds")->capture_default_str();
  build->add_flag("--global-normalization", rc.global_normalization,
                  "Fit min-max on the whole table instead of each training fold");
  build->add_flag("--force", rc.force, "Replace an existing dataset directory");

  auto* verify = app.add_subcommand("verify", "Leakage/checksum checks on a dataset, or a decode round-trip report");
  verify->add_option("--dataset", rc.dataset, "Dataset directory to check")->check(CLI::ExistingDirectory);
  verify->add_option("--against", rc.against, "Second build whose test images must match")
      ->check(CLI::ExistingDirectory);
  add_input(verify, rc, false);
  add_layout(verify, rc);
  add_augment(verify, rc);
  add_seed(verify, rc);
  add_workers(verify, rc);
  verify->add_option("--trials", rc.trials, "Round-trip trials")->capture_default_str();

  auto* probe = app.add_subcommand("probe", "Train and score a linear probe on every fold");
  probe->add_option("--dataset", rc.dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  add_probe(probe, rc);
  add_seed(probe, rc);
  add_workers(probe, rc);

  auto* sweep = app.add_subcommand("layout-sweep", "Decode error and probe metrics across bar-row counts");
  add_input(sweep, rc, false);
  sweep->add_option("--r-list", rc.r_list, "Comma-separated row counts")->capture_default_str();
  sweep->add_option("--n", rc.n, "Synthetic rows when no --input")->capture_default_str();
  sweep->add_option("--features", rc.features, "Synthetic features when no --input")->capture_default_str();
  sweep->add_option("--classes", rc.classes, "Synthetic classes when no --input")->capture_default_str();
  sweep->add_option("--separation", rc.separation, "Synthetic class separation")->capture_default_str();
  sweep->add_option("--trials", rc.trials, "Round-trip trials per r")->capture_default_str();
  sweep->add_option("--folds", rc.folds, "Probe folds")->capture_default_str();
  add_layout(sweep, rc);
  add_augment(sweep, rc);
  add_probe(sweep, rc);
  add_seed(sweep, rc);
  add_workers(sweep, rc);

  auto* synth = app.add_subcommand("synth", "Write a class-conditional Gaussian table and its schema");
  synth->add_option("--out", rc.out, "CSV path")->required();
  synth->add_option("--schema-out", rc.schema_out, "Schema path (default <out>.schema.json)");
  synth->add_option("--n", rc.n, "Rows")->capture_default_str();
  synth->add_option("--features", rc.features, "Features")->capture_default_str();
  synth->add_option("--classes", rc.classes, "Classes")->capture_default_str();
  synth->add_option("--separation", rc.separation, "Class mean scale")->capture_default_str();
  add_seed(synth, rc);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);
    err << "tabraster: error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*encode) return cmd_encode(rc, out);
    if (*preview) return cmd_augment_preview(rc, out);
    if (*build) return cmd_build(rc, out);
    if (*verify) return cmd_verify(rc, out);
    if (*probe) return cmd_probe(rc, out);
    if (*sweep) return cmd_layout_sweep(rc, out);
    if (*synth) return cmd_synth(rc, out);
  } catch (const ConfigError& e) {
    err << "tabraster: error: " << e.what() << '\n';
    return 2;
  } catch (const SchemaError& e) {
    err << "tabraster: error: " << e.what() << '\n';
    return 2;
  } catch (const ParseError& e) {
    err << "tabraster: error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "tabraster: error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace tabraster
