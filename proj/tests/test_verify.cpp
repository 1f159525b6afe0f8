#include <gtest/gtest.h>

#include <sstream>

#include "helpers.hpp"
#include "tabraster/synth.hpp"
#include "tabraster/verify.hpp"

using namespace tabraster;

TEST(Decode, Extremes) {
  const auto l = make_layout(9, 1, 224, 224);
  const auto zero = decode(rasterize(std::vector<double>(9, 0.0), l), l);
  const auto one = decode(rasterize(std::vector<double>(9, 1.0), l), l);
  for (int j = 0; j < 9; ++j) {
    EXPECT_EQ(zero.values[j], 0.0);
    // boundary pixels are shared with the neighbouring color
    EXPECT_NEAR(one.values[j], 1.0, 0.5 / l.bar_width);
  }
}

TEST(Decode, RoundTripWithinBound) {
  for (auto [m, r] : {std::pair{9, 1}, {19, 1}, {37, 1}, {37, 2}, {40, 4}, {7, 3}}) {
    const auto l = make_layout(m, r, 224, 224);
    RngStream rng(1, {static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(r)});
    double worst = 0;
    for (int t = 0; t < 100; ++t) {
      const auto x = testing_support::random_sample(rng, m);
      const auto d = decode(rasterize(x, l), l);
      for (int j = 0; j < m; ++j) worst = std::max(worst, std::abs(d.values[j] - x[j]));
    }
    EXPECT_LE(worst, 1.5 / l.bar_width) << "m=" << m << " r=" << r;
  }
}

TEST(Decode, SmallCanvases) {
  const auto l = make_layout(5, 2, 33, 17);
  const std::vector<double> x{0.0, 0.33, 0.5, 0.91, 1.0};
  const auto d = decode(rasterize(x, l), l);
  for (int j = 0; j < 5; ++j) EXPECT_NEAR(d.values[j], x[j], 1.5 / l.bar_width);
}

TEST(Decode, DimensionMismatch) {
  const auto l = make_layout(3, 1, 30, 30);
  EXPECT_THROW(decode(ImageCanvas(31, 30), l), ConfigError);
}

TEST(Decode, SingleDarkRowDoesNotMoveMedian) {
  const auto l = make_layout(2, 1, 40, 21);
  auto img = rasterize(std::vector<double>{0.5, 0.25}, l);
  for (int x = 0; x < 40; ++x) img.set(x, 10, Rgb{0, 0, 0});
  const auto d = decode(img, l);
  EXPECT_NEAR(d.values[0], 0.5, 1e-9);
  EXPECT_NEAR(d.values[1], 0.25, 1e-9);
  EXPECT_LT(d.confidence[0], 1.0);
}

TEST(Roundtrip, DefaultsAreBounded) {
  SynthConfig sc;
  sc.n = 40;
  sc.features = 9;
  const auto table = normalize(make_synthetic(sc));
  const auto l = make_layout(9, 1, 224, 224);
  const auto rep = roundtrip_report(table, l, AugmentConfig{}, 120);
  EXPECT_EQ(rep.trials, 120u);
  EXPECT_LE(rep.clean_max, 1.5 / l.bar_width);
  EXPECT_LT(rep.augmented_mean, 0.05);
  EXPECT_GT(rep.augmented_mean, rep.clean_mean);
  std::size_t total = 0;
  for (auto c : rep.branch_counts) total += c;
  EXPECT_EQ(total, 120u);
}

TEST(Roundtrip, IdentityAugmentationMatchesClean) {
  SynthConfig sc;
  sc.n = 10;
  sc.features = 5;
  const auto table = normalize(make_synthetic(sc));
  const auto rep = roundtrip_report(table, make_layout(5, 2, 64, 64), AugmentConfig::identity(), 30);
  EXPECT_DOUBLE_EQ(rep.augmented_mean, rep.clean_mean);
  EXPECT_EQ(rep.branch_counts[static_cast<int>(MorphBranch::none)], 30u);
}

TEST(Roundtrip, JsonlHasRecordPerFeature) {
  SynthConfig sc;
  sc.n = 8;
  sc.features = 4;
  const auto table = normalize(make_synthetic(sc));
  const auto rep = roundtrip_report(table, make_layout(4, 1, 32, 32), AugmentConfig{}, 8, 2);
  std::istringstream in(rep.to_jsonl());
  std::string line;
  std::vector<nlohmann::json> recs;
  while (std::getline(in, line)) recs.push_back(nlohmann::json::parse(line));
  ASSERT_EQ(recs.size(), 5u);
  EXPECT_EQ(recs[0]["record"], "feature");
  EXPECT_EQ(recs[0]["name"], "f00");
  EXPECT_EQ(recs[4]["record"], "summary");
  EXPECT_EQ(recs[4]["trials"], 8);
}

TEST(Roundtrip, WorkerCountDoesNotMatter) {
  SynthConfig sc;
  sc.n = 12;
  sc.features = 6;
  const auto table = normalize(make_synthetic(sc));
  const auto l = make_layout(6, 1, 96, 96);
  EXPECT_EQ(roundtrip_report(table, l, AugmentConfig{}, 24, 1).to_jsonl(),
            roundtrip_report(table, l, AugmentConfig{}, 24, 3).to_jsonl());
}
