#include <gtest/gtest.h>

#include <cstdlib>
#include <map>
#include <sstream>

#include "helpers.hpp"
#include "tabraster/cli.hpp"

using namespace tabraster;
using testing_support::TempDir;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;

  std::vector<nlohmann::json> records() const {
    std::vector<nlohmann::json> v;
    std::istringstream in(out);
    std::string line;
    while (std::getline(in, line))
      if (!line.empty()) v.push_back(nlohmann::json::parse(line));
    return v;
  }
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "tabraster");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

// 9-feature synthetic table written through the CLI itself.
struct Table {
  TempDir dir{"cli_table"};
  std::string csv = (dir / "t.csv").string();
  std::string schema = (dir / "t.schema.json").string();

  explicit Table(int n = 20, int features = 9) {
    const auto r = run({"synth", "--out", csv, "--n", std::to_string(n), "--features", std::to_string(features),
                        "--classes", "2", "--separation", "3"});
    EXPECT_EQ(r.code, 0) << r.err;
  }
};

std::map<std::string, std::string> tree_digest(const std::filesystem::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[std::filesystem::relative(e.path(), root).string()] = sha256_hex(read_file(e.path()));
  return out;
}

}  // namespace

TEST(Cli, Version) {
  const auto r = run({"--version"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("schema_version 1"), std::string::npos);
  EXPECT_NE(r.out.find("manifest_version 1"), std::string::npos);
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"build", "--bogus"}).code, 2);
}

TEST(Cli, MissingSchemaNamesPath) {
  Table t;
  const auto r = run({"build", "--input", t.csv, "--schema", "/no/such/schema.json", "--out", (t.dir / "o").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("/no/such/schema.json"), std::string::npos);
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
}

TEST(Cli, BadParametersExitTwo) {
  Table t;
  const auto out = (t.dir / "o").string();
  EXPECT_EQ(run({"build", "--input", t.csv, "--schema", t.schema, "--out", out, "--se-max", "5by2"}).code, 2);
  EXPECT_EQ(run({"build", "--input", t.csv, "--schema", t.schema, "--out", out, "--rows", "10"}).code, 2);
  EXPECT_EQ(run({"build", "--input", t.csv, "--schema", t.schema, "--out", out, "--p-dilate", "2"}).code, 2);
  EXPECT_EQ(run({"build", "--input", t.csv, "--schema", t.schema, "--out", out, "--folds", "1"}).code, 2);
}

TEST(Cli, BuildSummaryArithmetic) {
  Table t;
  const auto out = (t.dir / "ds").string();
  const auto r = run({"build", "--input", t.csv, "--schema", t.schema, "--out", out, "--rows", "1", "--size", "224",
                      "--k", "4", "--folds", "2", "--workers", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto recs = r.records();
  ASSERT_EQ(recs.size(), 3u);
  for (int f = 0; f < 2; ++f) {
    EXPECT_EQ(recs[f]["train_images"].get<int>(), recs[f]["train_rows"].get<int>() * 5);
    EXPECT_EQ(recs[f]["test_images"], recs[f]["test_rows"]);
  }
  EXPECT_EQ(recs[2]["columns"], 9);
  EXPECT_EQ(recs[2]["train_images"], 100);
  const auto img = read_png(std::filesystem::path(out) / "0/test" /
                            std::filesystem::directory_iterator(std::filesystem::path(out) / "0/test")->path().filename());
  EXPECT_EQ(img.width(), 224);
  EXPECT_EQ(img.height(), 224);

  const auto v = run({"verify", "--dataset", out});
  EXPECT_EQ(v.code, 0) << v.out;
  EXPECT_EQ(v.records()[0]["passed"], true);

  const auto again = run({"build", "--input", t.csv, "--schema", t.schema, "--out", out, "--k", "4", "--folds", "2"});
  EXPECT_EQ(again.code, 1);
  EXPECT_EQ(run({"build", "--input", t.csv, "--schema", t.schema, "--out", out, "--k", "0", "--folds", "2",
                 "--force"})
                .code,
            0);

  const auto p = run({"probe", "--dataset", out, "--epochs", "50"});
  ASSERT_EQ(p.code, 0) << p.err;
  const auto pr = p.records();
  ASSERT_EQ(pr.size(), 3u);
  EXPECT_EQ(pr[0]["record"], "fold");
  EXPECT_EQ(pr[2]["record"], "mean");
  EXPECT_NEAR(pr[2]["macro_f1"].get<double>(),
              (pr[0]["macro_f1"].get<double>() + pr[1]["macro_f1"].get<double>()) / 2, 1e-12);
}

TEST(Cli, SameSeedSameTree) {
  Table t;
  const auto a = (t.dir / "a").string(), b = (t.dir / "b").string();
  const std::vector<std::string> common{"build", "--input", t.csv, "--schema", t.schema, "--size", "48",
                                        "--k", "2", "--folds", "2", "--seed", "7"};
  auto args = common;
  args.insert(args.end(), {"--out", a, "--workers", "1"});
  ASSERT_EQ(run(args).code, 0);
  args = common;
  args.insert(args.end(), {"--out", b, "--workers", "3"});
  ASSERT_EQ(run(args).code, 0);
  EXPECT_EQ(tree_digest(a), tree_digest(b));

  const auto cmp = run({"verify", "--dataset", a, "--against", b});
  EXPECT_EQ(cmp.code, 0);
  EXPECT_EQ(cmp.records()[1]["passed"], true);
}

TEST(Cli, VerifyDetectsTampering) {
  Table t;
  const auto out = (t.dir / "ds").string();
  ASSERT_EQ(run({"build", "--input", t.csv, "--schema", t.schema, "--out", out, "--size", "32", "--k", "1",
                 "--folds", "2"})
                .code,
            0);
  const auto victim = std::filesystem::path(out) / "1/test";
  const auto file = std::filesystem::directory_iterator(victim)->path();
  auto bytes = read_file(file);
  bytes[bytes.size() / 2] ^= 0x10;
  write_file(file, bytes);
  const auto r = run({"verify", "--dataset", out});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.records()[0]["passed"], false);
}

TEST(Cli, VerifyRoundtripReport) {
  Table t;
  const auto r = run({"verify", "--input", t.csv, "--schema", t.schema, "--trials", "20"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto recs = r.records();
  ASSERT_EQ(recs.size(), 10u);
  EXPECT_EQ(recs.back()["record"], "summary");
  EXPECT_LT(recs.back()["augmented_mean_abs_dev"].get<double>(), 0.1);
}

TEST(Cli, EncodeAndPreview) {
  Table t(6, 3);
  const auto enc = (t.dir / "enc").string();
  const auto r = run({"encode", "--input", t.csv, "--schema", t.schema, "--out", enc, "--size", "40"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.records()[0]["images"], 6);
  EXPECT_TRUE(std::filesystem::exists(std::filesystem::path(enc) / "000005.png"));

  const auto pv = (t.dir / "pv").string();
  const auto p = run({"augment-preview", "--input", t.csv, "--schema", t.schema, "--out", pv, "--row", "2",
                      "--count", "3", "--size", "40"});
  ASSERT_EQ(p.code, 0) << p.err;
  EXPECT_EQ(p.records().size(), 3u);
  EXPECT_TRUE(std::filesystem::exists(std::filesystem::path(pv) / "000002_03.png"));
  EXPECT_EQ(run({"augment-preview", "--input", t.csv, "--schema", t.schema, "--out", pv, "--row", "99"}).code, 2);
}

TEST(Cli, OutputDirectoryFromEnvironment) {
  Table t(6, 3);
  const auto dir = (t.dir / "env").string();
  ::setenv(kOutEnv, dir.c_str(), 1);
  const auto r = run({"encode", "--input", t.csv, "--schema", t.schema, "--size", "16"});
  ::unsetenv(kOutEnv);
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(std::filesystem::exists(std::filesystem::path(dir) / "000000.png"));
  EXPECT_EQ(run({"encode", "--input", t.csv, "--schema", t.schema}).code, 2);
}

TEST(Cli, LayoutSweepSynthetic) {
  const auto r = run({"layout-sweep", "--features", "37", "--n", "60", "--r-list", "1,37", "--trials", "5",
                      "--folds", "3", "--epochs", "10"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto recs = r.records();
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0]["columns"], 37);
  EXPECT_EQ(recs[1]["columns"], 1);
  EXPECT_DOUBLE_EQ(recs[1]["bar_width"].get<double>(), 224.0);
  EXPECT_TRUE(recs[0].contains("probe_macro_f1"));
  EXPECT_EQ(run({"layout-sweep", "--features", "5", "--r-list", "6"}).code, 2);
}
