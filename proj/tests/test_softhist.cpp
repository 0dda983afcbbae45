#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "gcart/random.hpp"
#include "gcart/softhist.hpp"

using namespace gcart;

namespace {

Image random_image(std::size_t h, std::size_t w, Rng& rng) {
  Image img(h, w, 3);
  for (double& v : img.pixels) v = rng.uniform();
  return img;
}

}  // namespace

TEST(SoftHistogram, CentersIncludeBothEndpoints) {
  const auto c = HistogramConfig{}.centers();
  ASSERT_EQ(c.size(), 16u);
  EXPECT_EQ(c.front(), 0.0);
  EXPECT_EQ(c.back(), 1.0);
  EXPECT_DOUBLE_EQ(c[3], 0.2);
}

TEST(SoftHistogram, SinglePixelAtCenterGivesOne) {
  Image img(1, 1, 3, 0.0);
  const auto h = soft_histogram(img);
  EXPECT_DOUBLE_EQ(h.at(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(h.at(0, 1), std::exp(-(1.0 / 15) * (1.0 / 15) / 0.01));
}

TEST(SoftHistogram, ConstantHalfGrayIsSymmetric) {
  Image img(4, 4, 3, 0.5);
  const auto h = soft_histogram(img);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(h.at(1, i), h.at(1, 15 - i), 1e-15);
  EXPECT_EQ(std::max_element(h.values.begin(), h.values.begin() + 16) - h.values.begin(), 7);
}

TEST(SoftHistogram, ValuesLieInUnitInterval) {
  Rng rng(3);
  const auto h = soft_histogram(random_image(8, 8, rng));
  for (double v : h.values) {
    EXPECT_GT(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(SoftHistogram, PermutationInvariantBitExact) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    Image img = random_image(16, 16, rng);
    Image shuffled = img;
    const auto perm = rng.permutation(img.pixel_count());
    for (std::size_t p = 0; p < perm.size(); ++p)
      for (std::size_t c = 0; c < 3; ++c) shuffled.pixels[p * 3 + c] = img.pixels[perm[p] * 3 + c];
    EXPECT_EQ(soft_histogram(img).values, soft_histogram(shuffled).values);
  }
}

TEST(SoftHistogram, MatchesTapeForward) {
  Rng rng(9);
  Image img = random_image(4, 5, rng);
  const auto plain = soft_histogram(img);
  Tensor px(Shape{1, 20, 3}, img.pixels);
  Var h = soft_histogram(Var(px), HistogramConfig{});
  ASSERT_EQ(h.shape(), (Shape{1, 3, 16}));
  for (std::size_t i = 0; i < plain.values.size(); ++i) EXPECT_EQ(h.value()[i], plain.values[i]);
}

TEST(SoftHistogram, SinglePixelGradientIsAnalyticRbfDerivative) {
  const HistogramConfig cfg;
  const auto centers = cfg.centers();
  for (double x : {0.0, 0.13, 0.5, 0.77, 1.0}) {
    for (std::size_t bin : {0u, 4u, 11u, 15u}) {
      Tape tape;
      Var px = tape.variable(Tensor(Shape{1, 1, 1}, x));
      Var h = soft_histogram(px, cfg);
      Tensor pick(Shape{1, 1, 16}, 0.0);
      pick[bin] = 1.0;
      auto g = tape.backward(sum(h * Var(pick)));
      const double d = x - centers[bin];
      const double expected = -2.0 * d / cfg.gamma * std::exp(-d * d / cfg.gamma);
      const double got = g[px].item();
      if (expected == 0.0) {
        EXPECT_EQ(got, 0.0);
      } else {
        EXPECT_LE(std::abs(got - expected) / std::abs(expected), 1e-8) << "x=" << x << " bin=" << bin;
      }
    }
  }
}

TEST(SoftHistogram, Errors) {
  EXPECT_THROW(soft_histogram(Image{}), std::invalid_argument);
  EXPECT_THROW(soft_histogram(Image(2, 2, 3), HistogramConfig{16, 0.0}), std::invalid_argument);
  EXPECT_THROW(soft_histogram(Image(2, 2, 3), HistogramConfig{1, 0.01}), std::invalid_argument);
  EXPECT_THROW(soft_histogram(Var(Tensor(Shape{4, 3})), HistogramConfig{}), std::invalid_argument);
}
