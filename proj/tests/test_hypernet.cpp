#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "gcart/hypernet.hpp"
#include "gcart/random.hpp"
#include "gcart/softhist.hpp"
#include "gcart/tonecurve.hpp"

using namespace gcart;

TEST(HyperNet, ParameterCountIs643) {
  const auto w = HyperNetWeights::init(42);
  EXPECT_EQ(w.param_count(), 643u);
  EXPECT_EQ(16u * 32u + 32u + 32u * 3u + 3u, 643u);
}

TEST(HyperNet, InitOutputIsBiasForAnyHistogram) {
  const auto w = HyperNetWeights::init(42);
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    std::vector<double> h(16);
    for (double& v : h) v = rng.uniform();
    const RawCurveParams r = predict_raw_params(h, w);
    EXPECT_EQ(r.a, 0.0);
    EXPECT_EQ(r.d_raw, -5.0);
    EXPECT_EQ(r.e_raw, -5.0);
  }
}

TEST(HyperNet, InitCurveIsNearIdentity) {
  const CurveParams p = effective_params(RawCurveParams{0.0, -5.0, -5.0});
  EXPECT_NEAR(p.d, std::log1p(std::exp(-5.0)), 1e-15);
  double worst = 0.0;
  for (int j = 0; j <= 1000; ++j) worst = std::max(worst, std::abs(curve_eval(p, j / 1000.0) - j / 1000.0));
  EXPECT_LE(worst, 0.01);
}

TEST(HyperNet, FirstLayerInitIsBoundedAndSeeded) {
  const auto a = HyperNetWeights::init(7);
  const auto b = HyperNetWeights::init(7);
  const auto c = HyperNetWeights::init(8);
  EXPECT_EQ(a.w1.data()[0], b.w1.data()[0]);
  EXPECT_NE(a.w1.data()[0], c.w1.data()[0]);
  for (double v : a.w1.data()) EXPECT_LE(std::abs(v), 0.25);
  for (double v : a.b1.data()) EXPECT_EQ(v, 0.0);
}

TEST(HyperNet, TapeMatchesPlain) {
  auto w = HyperNetWeights::init(3);
  Rng rng(2);
  for (double& v : w.w2.data()) v = rng.uniform(-1, 1);
  Tensor hist(Shape{4, 16});
  for (double& v : hist.data()) v = rng.uniform();
  const Var out = predict_raw_params(Var(hist), HyperNetVars{w.w1, w.b1, w.w2, w.b2});
  for (std::size_t n = 0; n < 4; ++n) {
    const RawCurveParams r = predict_raw_params(std::span<const double>(hist.data().data() + n * 16, 16), w);
    EXPECT_NEAR(out.value()[n * 3 + 0], r.a, 1e-14);
    EXPECT_NEAR(out.value()[n * 3 + 1], r.d_raw, 1e-14);
    EXPECT_NEAR(out.value()[n * 3 + 2], r.e_raw, 1e-14);
  }
}

TEST(HyperNet, JsonRoundTrip) {
  auto w = HyperNetWeights::init(11);
  w.b2[0] = 0.123456789012345678;
  const auto back = hypernet_from_json(to_json(w));
  EXPECT_EQ(back.w1.data()[5], w.w1.data()[5]);
  EXPECT_EQ(back.b2[0], w.b2[0]);
  EXPECT_EQ(back.param_count(), 643u);
}

TEST(HyperNet, Errors) {
  const auto w = HyperNetWeights::init(1);
  std::vector<double> wrong(15, 0.0);
  EXPECT_THROW(predict_raw_params(wrong, w), std::invalid_argument);
  auto j = to_json(w);
  j["version"] = 99;
  EXPECT_THROW(hypernet_from_json(j), std::invalid_argument);
  EXPECT_THROW(HyperNetWeights::init(1, 0, 32), std::invalid_argument);
}

TEST(HyperNet, ParameterCountForOtherWidths) {
  EXPECT_EQ(HyperNetWeights::init(1, 16, 64).param_count(), 1283u);
  EXPECT_EQ(HyperNetWeights::init(1, 16, 1).param_count(), 23u);
}

TEST(HyperNet, ZeroFirstLayerGivesBias) {
  auto w = HyperNetWeights::init(1);
  for (double& v : w.w1.data()) v = 0.0;
  for (double& v : w.w2.data()) v = 0.7;
  w.b2 = Tensor(Shape{3}, std::vector<double>{0.1, 0.2, 0.3});
  const std::vector<double> h(16, 0.5);
  const RawCurveParams r = predict_raw_params(h, w);
  EXPECT_EQ(r.a, 0.1);
  EXPECT_EQ(r.d_raw, 0.2);
  EXPECT_EQ(r.e_raw, 0.3);
}

TEST(HyperNet, ChannelPermutationPermutesParameters) {
  auto w = HyperNetWeights::init(2);
  Rng rng(3);
  for (double& v : w.w2.data()) v = rng.uniform(-1, 1);
  Image img(8, 8, 3);
  for (double& v : img.pixels) v = rng.uniform();
  Image rolled = img;  // channels (0,1,2) -> (1,2,0)
  for (std::size_t p = 0; p < 64; ++p)
    for (std::size_t c = 0; c < 3; ++c) rolled.pixels[p * 3 + c] = img.pixels[p * 3 + (c + 1) % 3];
  const auto h = soft_histogram(img), hr = soft_histogram(rolled);
  for (std::size_t c = 0; c < 3; ++c) {
    const RawCurveParams a = predict_raw_params(hr.channel(c), w);
    const RawCurveParams b = predict_raw_params(h.channel((c + 1) % 3), w);
    EXPECT_EQ(a.a, b.a);
    EXPECT_EQ(a.d_raw, b.d_raw);
    EXPECT_EQ(a.e_raw, b.e_raw);
  }
}
