#include <gtest/gtest.h>

#include <cmath>

#include "gcart/corruptions.hpp"
#include "gcart/random.hpp"

using namespace gcart;

namespace {

Image random_image(std::size_t h, std::size_t w, Rng& rng) {
  Image img(h, w, 3);
  for (double& v : img.pixels) v = rng.uniform();
  return img;
}

}  // namespace

TEST(Corruptions, SeverityTables) {
  EXPECT_EQ(kBrightnessShift, (std::array<double, 5>{0.1, 0.2, 0.3, 0.4, 0.5}));
  EXPECT_EQ(kContrastScale, (std::array<double, 5>{0.4, 0.3, 0.2, 0.1, 0.05}));
  EXPECT_EQ(kDarkenScale, (std::array<double, 5>{0.8, 0.6, 0.4, 0.25, 0.1}));
  EXPECT_EQ((CorruptionSpec{Corruption::darken, 4}.strength()), 0.25);
  EXPECT_THROW((CorruptionSpec{Corruption::darken, 0}.strength()), std::invalid_argument);
  EXPECT_THROW((CorruptionSpec{Corruption::darken, 6}.strength()), std::invalid_argument);
}

TEST(Corruptions, NamesRoundTrip) {
  for (Corruption c : kCorruptions) EXPECT_EQ(parse_corruption(to_string(c)), c);
  EXPECT_THROW(parse_corruption("fog"), std::invalid_argument);
}

TEST(Corruptions, IdentityParameters) {
  Rng rng(1);
  const Image img = random_image(8, 8, rng);
  EXPECT_EQ(corrupt_contrast(img, 1.0), img);
  EXPECT_EQ(corrupt_darken(img, 1.0), img);
  const Image b = corrupt_brightness(img, 0.0);
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_NEAR(b.pixels[i], img.pixels[i], 1e-12);
}

TEST(Corruptions, HsvRoundTrip) {
  Rng rng(2);
  for (int i = 0; i < 10000; ++i) {
    const double r = rng.uniform(), g = rng.uniform(), b = rng.uniform();
    const auto back = hsv_to_rgb(rgb_to_hsv(r, g, b));
    ASSERT_NEAR(back[0], r, 1e-12);
    ASSERT_NEAR(back[1], g, 1e-12);
    ASSERT_NEAR(back[2], b, 1e-12);
  }
}

TEST(Corruptions, BrightnessExamples) {
  Image gray(1, 1, 3, 0.5);
  const Image g = corrupt_brightness(gray, 0.3);
  for (double v : g.pixels) EXPECT_NEAR(v, 0.8, 1e-15);
  Image white(1, 1, 3, 1.0);
  EXPECT_EQ(corrupt_brightness(white, 0.5), white);
  EXPECT_THROW(corrupt_brightness(Image(2, 2, 1), 0.1), std::invalid_argument);
}

TEST(Corruptions, ContrastExamples) {
  Image img(1, 2, 1);
  img.pixels = {0.0, 1.0};
  const Image out = corrupt_contrast(img, 0.1);
  EXPECT_DOUBLE_EQ(out.pixels[0], 0.45);
  EXPECT_DOUBLE_EQ(out.pixels[1], 0.55);
  Image flat(3, 3, 3, 0.7);
  EXPECT_EQ(corrupt_contrast(flat, 0.05), flat);
  EXPECT_THROW(corrupt_contrast(flat, 0.0), std::invalid_argument);
}

TEST(Corruptions, ContrastPreservesChannelMean) {
  Rng rng(3);
  const Image img = random_image(6, 6, rng);
  const Image out = corrupt_contrast(img, 0.2);
  for (std::size_t c = 0; c < 3; ++c) {
    double a = 0.0, b = 0.0;
    for (std::size_t p = 0; p < 36; ++p) {
      a += img.pixels[p * 3 + c];
      b += out.pixels[p * 3 + c];
    }
    EXPECT_NEAR(a, b, 1e-12);
  }
}

TEST(Corruptions, DarkenExamples) {
  Image img(1, 1, 1, 0.8);
  EXPECT_DOUBLE_EQ(corrupt_darken(img, 0.5).pixels[0], 0.4);
  Rng rng(4);
  for (double v : corrupt_darken(random_image(5, 5, rng), 0.1).pixels) EXPECT_LE(v, 0.1);
  EXPECT_THROW(corrupt_darken(img, 1.5), std::invalid_argument);
}

TEST(Corruptions, OutputsStayInUnitRange) {
  Rng rng(5);
  const Image img = random_image(8, 8, rng);
  for (Corruption c : kCorruptions)
    for (int s = 1; s <= 5; ++s)
      for (double v : corrupt(img, {c, s}).pixels) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
      }
}

TEST(Augment, CenterCropWithoutFlipIsIdentity) {
  Rng rng(6);
  const Image img = random_image(32, 32, rng);
  EXPECT_EQ(augment(img, AugmentSpec{}, AugmentDraw{1.0, 4, 4, false}), img);
}

TEST(Augment, FlipMirrorsColumns) {
  Rng rng(7);
  const Image img = random_image(32, 32, rng);
  const Image out = augment(img, AugmentSpec{}, AugmentDraw{1.0, 4, 4, true});
  for (std::size_t y = 0; y < 32; ++y)
    for (std::size_t x = 0; x < 32; ++x)
      for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(out.at(y, x, c), img.at(y, 31 - x, c));
}

TEST(Augment, JitterIsDarkenThenCrop) {
  Rng rng(8);
  const Image img = random_image(32, 32, rng);
  const AugmentDraw d{0.5, 1, 7, true};
  EXPECT_EQ(augment(img, AugmentSpec{}, d), augment(corrupt_darken(img, 0.5), AugmentSpec{}, AugmentDraw{1.0, 1, 7, true}));
}

TEST(Augment, ShiftedCropPadsWithZeros) {
  Image img(4, 4, 1, 1.0);
  const Image out = augment(img, AugmentSpec{0.5, 1.0, 2, 0.5}, AugmentDraw{1.0, 0, 0, false});
  EXPECT_EQ(out.at(0, 0, 0), 0.0);
  EXPECT_EQ(out.at(1, 1, 0), 0.0);
  EXPECT_EQ(out.at(2, 2, 0), 1.0);
  EXPECT_THROW(augment(img, AugmentSpec{0.5, 1.0, 2, 0.5}, AugmentDraw{1.0, 5, 0, false}), std::invalid_argument);
}

TEST(Augment, DrawsStayInRangeAndAreSeeded) {
  Rng a = Rng::substream({42, 4, 1, 0});
  Rng b = Rng::substream({42, 4, 1, 0});
  for (int i = 0; i < 1000; ++i) {
    const AugmentDraw da = draw_augment(AugmentSpec{}, a);
    const AugmentDraw db = draw_augment(AugmentSpec{}, b);
    EXPECT_EQ(da.scale, db.scale);
    EXPECT_GE(da.scale, 0.5);
    EXPECT_LT(da.scale, 1.0);
    EXPECT_LE(da.offset_y, 8u);
    EXPECT_LE(da.offset_x, 8u);
  }
}
