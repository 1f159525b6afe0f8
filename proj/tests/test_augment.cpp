#include <gtest/gtest.h>

#include <array>

#include "helpers.hpp"
#include "tabraster/augment.hpp"
#include "tabraster/encode.hpp"

using namespace tabraster;
using testing_support::image_from;
using testing_support::oracles;

namespace {

ImageCanvas bar_image(int w, int h, int x0, int x1, int y0, int y1, Rgb color) {
  ImageCanvas img(w, h);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) img.set(x, y, color);
  return img;
}

int colored_columns(const ImageCanvas& img, int y) {
  int n = 0;
  for (int x = 0; x < img.width(); ++x) n += !(img.at(x, y) == kWhite);
  return n;
}

ImageCanvas sample_image(std::uint64_t seed) {
  const auto l = make_layout(9, 1, 224, 224);
  RngStream rng(seed, {42});
  return rasterize(testing_support::random_sample(rng, 9), l);
}

}  // namespace

TEST(Border, Reflect101) {
  EXPECT_EQ(reflect101(-1, 5), 1);
  EXPECT_EQ(reflect101(-2, 5), 2);
  EXPECT_EQ(reflect101(5, 5), 3);
  EXPECT_EQ(reflect101(6, 5), 2);
  EXPECT_EQ(reflect101(13, 5), 3);
  EXPECT_EQ(reflect101(-7, 1), 0);
  for (int i = -30; i < 30; ++i) {
    const int r = reflect101(i, 4);
    EXPECT_GE(r, 0);
    EXPECT_LT(r, 4);
  }
}

TEST(Blur, KernelNormalised) {
  const auto k = gaussian_kernel(4.0);
  EXPECT_EQ(k.size(), 25u);
  double s = 0;
  for (double v : k) s += v;
  EXPECT_NEAR(s, 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(k[0], k[24]);
}

TEST(Blur, MatchesOpenCV) {
  const auto& o = oracles()["blur"];
  const int w = o["width"], h = o["height"];
  for (const auto& c : o["cases"]) {
    auto field = o["field"].get<std::vector<double>>();
    gaussian_blur(field, w, h, c["sigma"].get<double>());
    const auto expect = c["output"].get<std::vector<double>>();
    for (std::size_t i = 0; i < field.size(); ++i) ASSERT_NEAR(field[i], expect[i], 1e-9) << "sigma " << c["sigma"];
  }
}

TEST(Remap, MatchesOpenCVBilinear) {
  const auto& o = oracles()["remap"];
  const int w = o["width"], h = o["height"];
  const auto src = image_from(o["image"], w, h);
  DisplacementField f{w, h, o["dx"].get<std::vector<double>>(), o["dy"].get<std::vector<double>>()};
  const auto out = remap(src, f);
  const auto expect = image_from(o["output"], w, h);
  // OpenCV quantises the sampling position to 1/32 px for 8-bit images.
  int worst = 0;
  for (std::size_t i = 0; i < out.pixels().size(); ++i)
    worst = std::max(worst, std::abs(int{out.pixels()[i]} - int{expect.pixels()[i]}));
  EXPECT_LE(worst, 4);
}

TEST(Remap, ZeroFieldIsIdentity) {
  const auto img = sample_image(1);
  DisplacementField f{224, 224, std::vector<double>(224 * 224, 0.0), std::vector<double>(224 * 224, 0.0)};
  EXPECT_TRUE(remap(img, f) == img);
}

TEST(Morphology, MatchesOpenCV) {
  const auto& o = oracles()["morphology"];
  const int w = o["width"], h = o["height"];
  const auto img = image_from(o["image"], w, h);
  for (const auto& c : o["cases"]) {
    StructuringElement se{c["height"], c["width"], c["mask"].get<std::vector<std::uint8_t>>()};
    EXPECT_TRUE(erode(img, se) == image_from(c["erode"], w, h)) << se.height << "x" << se.width;
    EXPECT_TRUE(dilate(img, se) == image_from(c["dilate"], w, h)) << se.height << "x" << se.width;
  }
}

TEST(Morphology, UnitElementIsIdentity) {
  const auto img = sample_image(2);
  const auto one = StructuringElement::rectangle(1, 1);
  EXPECT_TRUE(dilate(img, one) == img);
  EXPECT_TRUE(erode(img, one) == img);
  RngStream rng(1, {1});
  EXPECT_EQ(make_structuring_element({1, 1}, rng), one);
}

TEST(Morphology, ErosionGrowsBarByTwo) {
  const Rgb red{200, 0, 0};
  for (int k : {1, 4, 9}) {
    const auto img = bar_image(40, 6, 10, 10 + k, 0, 6, red);
    const auto out = erode(img, StructuringElement::rectangle(1, 3));
    EXPECT_EQ(colored_columns(out, 3), k + 2);
    EXPECT_EQ(colored_columns(dilate(img, StructuringElement::rectangle(1, 3)), 3), std::max(0, k - 2));
  }
}

TEST(Morphology, OpenCloseIdempotentOnSolidRectangles) {
  const auto img = bar_image(40, 30, 8, 25, 5, 20, Rgb{0, 90, 255});
  for (auto [h, w] : {std::pair{2, 5}, {5, 2}, {3, 3}, {1, 4}}) {
    const auto se = StructuringElement::rectangle(h, w);
    EXPECT_TRUE(erode(dilate(img, se), se) == img) << h << "x" << w;
    EXPECT_TRUE(dilate(erode(img, se), se) == img) << h << "x" << w;
  }
}

TEST(Morphology, EmptyElementRejected) {
  const auto img = sample_image(3);
  StructuringElement se{2, 2, {0, 0, 0, 0}};
  EXPECT_THROW(dilate(img, se), ConfigError);
}

TEST(StructuringElement, RespectsBounds) {
  RngStream rng(9, {2});
  std::array<int, 3> hs{}, ws{};
  for (int i = 0; i < 5000; ++i) {
    const auto se = make_structuring_element({2, 5}, rng);
    ASSERT_GE(se.height, 1);
    ASSERT_LE(se.height, 2);
    ASSERT_GE(se.width, 1);
    ASSERT_LE(se.width, 5);
    ASSERT_TRUE(se.solid());
    ++hs[se.height];
    if (se.width <= 2) ++ws[se.width];
  }
  EXPECT_GT(hs[1], 0);
  EXPECT_GT(hs[2], 0);
  RngStream a(3, {3}), b(3, {3});
  EXPECT_EQ(make_structuring_element({5, 2}, a), make_structuring_element({5, 2}, b));
}

TEST(Augment, IdentityConfigIsNoOp) {
  const auto cfg = AugmentConfig::identity();
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto img = sample_image(s);
    EXPECT_TRUE(augment_image(img, cfg, s, 1) == img);
  }
}

TEST(Augment, ElasticZeroAlphaIdentity) {
  const auto img = sample_image(4);
  RngStream rng(1, {0});
  EXPECT_TRUE(elastic_distort(img, 0.0, 4.0, rng) == img);
  EXPECT_THROW(elastic_distort(img, -1.0, 4.0, rng), ConfigError);
  EXPECT_THROW(elastic_distort(img, 1.0, 0.0, rng), ConfigError);
}

TEST(Augment, DeterministicPerSampleAndCopy) {
  const auto img = sample_image(5);
  AugmentConfig cfg;
  cfg.seed = 17;
  const auto a = augment_image(img, cfg, 3, 1);
  EXPECT_TRUE(a == augment_image(img, cfg, 3, 1));
  EXPECT_FALSE(a == augment_image(img, cfg, 3, 2));
  EXPECT_FALSE(a == augment_image(img, cfg, 4, 1));
  EXPECT_EQ(a.width(), img.width());
  EXPECT_EQ(a.height(), img.height());
}

TEST(Augment, DilateOnlyWhenErosionDisabled) {
  AugmentConfig cfg;
  cfg.p_dilate = 1.0;
  cfg.p_erode = 0.0;
  for (int i = 0; i < 500; ++i) {
    RngStream rng(1, i, 0, Stage::morphology);
    EXPECT_EQ(choose_morphology(cfg, rng).branch, MorphBranch::dilate_only);
  }
  cfg.p_dilate = 0.0;
  cfg.p_erode = 1.0;
  RngStream rng(2, {0});
  EXPECT_EQ(choose_morphology(cfg, rng).branch, MorphBranch::erode_only);
}

TEST(Augment, BranchFrequencies) {
  AugmentConfig cfg;
  std::array<int, 5> counts{};
  const int n = 40000;
  for (int i = 0; i < n; ++i) {
    RngStream rng(cfg.seed, static_cast<std::uint64_t>(i), 0, Stage::morphology);
    ++counts[static_cast<int>(choose_morphology(cfg, rng).branch)];
  }
  EXPECT_NEAR(counts[0] / double(n), 0.245, 0.012);
  EXPECT_NEAR(counts[1] / double(n), 0.245, 0.012);
  EXPECT_NEAR(counts[2] / double(n), 0.21, 0.012);
  EXPECT_NEAR(counts[3] / double(n), 0.21, 0.012);
  EXPECT_NEAR(counts[4] / double(n), 0.09, 0.012);
}

TEST(Augment, PlanComposition) {
  const auto img = bar_image(30, 12, 5, 15, 0, 12, Rgb{10, 200, 30});
  MorphologyPlan p;
  p.se_dilate = StructuringElement::rectangle(1, 3);
  p.se_erode = StructuringElement::rectangle(1, 5);
  p.branch = MorphBranch::closing;
  EXPECT_TRUE(apply_morphology(img, p) == erode(dilate(img, p.se_dilate), p.se_erode));
  p.branch = MorphBranch::opening;
  EXPECT_TRUE(apply_morphology(img, p) == dilate(erode(img, p.se_erode), p.se_dilate));
  p.branch = MorphBranch::none;
  EXPECT_TRUE(apply_morphology(img, p) == img);
}

TEST(Augment, ConfigValidation) {
  AugmentConfig c;
  c.p_dilate = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.sigma = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.k = -1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.se_erode_max = {0, 2};
  EXPECT_THROW(c.validate(), ConfigError);
}
