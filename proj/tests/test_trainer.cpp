#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "gcart/cifar.hpp"
#include "gcart/gradcheck.hpp"
#include "gcart/trainer.hpp"

using namespace gcart;

TEST(CrossEntropy, UniformLogitsGiveLogTen) {
  const std::vector<int> labels{0, 9, 4};
  const Var l = cross_entropy(Var(Tensor(Shape{3, 10}, 0.7)), labels);
  EXPECT_NEAR(l.item(), std::log(10.0), 1e-15);
}

TEST(CrossEntropy, ConfidentCorrectLogitIsNearZero) {
  Tensor z(Shape{1, 10}, 0.0);
  z[2] = 30.0;
  const std::vector<int> labels{2};
  EXPECT_LT(cross_entropy(Var(z), labels).item(), 1e-9);
}

TEST(CrossEntropy, BatchIsMeanOfRows) {
  Tensor z(Shape{2, 10});
  for (std::size_t i = 0; i < 20; ++i) z[i] = std::sin(static_cast<double>(i));
  const std::vector<int> both{1, 6};
  auto row = [&](std::size_t b, int y) {
    double se = 0.0;
    for (std::size_t k = 0; k < 10; ++k) se += std::exp(z[b * 10 + k]);
    return std::log(se) - z[b * 10 + static_cast<std::size_t>(y)];
  };
  EXPECT_NEAR(cross_entropy(Var(z), both).item(), 0.5 * (row(0, 1) + row(1, 6)), 1e-14);
}

TEST(CrossEntropy, HugeLogitsStayFinite) {
  Tensor z(Shape{1, 10}, 0.0);
  z[0] = 1000.0;
  const std::vector<int> labels{3};
  EXPECT_NEAR(cross_entropy(Var(z), labels).item(), 1000.0, 1e-9);
}

TEST(CrossEntropy, BadLabelThrows) {
  const std::vector<int> labels{10};
  EXPECT_THROW(cross_entropy(Var(Tensor(Shape{1, 10})), labels), std::invalid_argument);
}

TEST(CosineLr, Schedule) {
  EXPECT_DOUBLE_EQ(cosine_lr(0, 100, 1e-3), 1e-3);
  EXPECT_NEAR(cosine_lr(100, 100, 1e-3), 0.0, 1e-19);
  EXPECT_NEAR(cosine_lr(50, 100, 1e-3), 5e-4, 1e-18);
  EXPECT_THROW(cosine_lr(101, 100, 1e-3), std::invalid_argument);
}

TEST(Adam, FirstStepMovesBySignTimesLr) {
  Tensor p(Shape{3}, std::vector<double>{1.0, 1.0, 1.0});
  const std::vector<Tensor> g{Tensor(Shape{3}, std::vector<double>{0.5, -2.0, 0.0})};
  std::vector<Tensor*> ps{&p};
  AdamState st;
  adam_step(ps, g, st, 0.01);
  EXPECT_NEAR(p[0], 0.99, 1e-9);
  EXPECT_NEAR(p[1], 1.01, 1e-9);
  EXPECT_EQ(p[2], 1.0);
}

TEST(Adam, ShapeMismatchThrows) {
  Tensor p(Shape{3});
  std::vector<Tensor*> ps{&p};
  const std::vector<Tensor> g{Tensor(Shape{2})};
  AdamState st;
  EXPECT_THROW(adam_step(ps, g, st, 0.1), std::invalid_argument);
}

TEST(Model, InitEnhancerIsNearIdentity) {
  const Model m = Model::init(Enhancer::parse("gcart"), 42);
  const Dataset ds = synthetic_cifar(4, 1);
  for (const Image& img : ds.images) {
    const Image out = m.enhance(img);
    for (std::size_t i = 0; i < img.size(); ++i) EXPECT_LE(std::abs(out.pixels[i] - img.pixels[i]), 0.01);
  }
}

TEST(Model, EnhancerParsing) {
  EXPECT_EQ(Enhancer::parse("gamma:2.2").name(), "gamma:2.2");
  EXPECT_TRUE(Enhancer::parse("gcart").learned());
  EXPECT_FALSE(Enhancer::parse("clahe").learned());
  EXPECT_THROW(Enhancer::parse("gamma:-1"), std::invalid_argument);
  EXPECT_THROW(Enhancer::parse("retinex"), std::invalid_argument);
}

TEST(Model, CheckpointRoundTripPredictsIdentically) {
  Model m = Model::init(Enhancer::parse("gcart"), 5);
  m.hyper.w2[4] = 0.3;
  const Model back = model_from_json(to_json(m));
  const Dataset ds = synthetic_cifar(8, 2);
  EXPECT_EQ(predict(m, ds.images), predict(back, ds.images));
  EXPECT_EQ(back.hyper.w2[4], 0.3);
}

TEST(Model, EnhancerIsPointwise) {
  Model m = Model::init(Enhancer::parse("gcart"), 5);
  Rng rng(3);
  for (double& v : m.hyper.w2.data()) v = rng.uniform(-1, 1);
  Image a = synthetic_cifar(1, 3).images[0];
  Image b = a;
  b.at(10, 12, 1) = 1.0 - b.at(10, 12, 1);
  b.at(10, 12, 0) = 0.0;
  // The histogram shifts slightly, so compare against each image's own curve.
  const auto cb = m.curves_for(b);
  const Image ob = m.enhance(b);
  for (std::size_t i = 0; i < b.size(); ++i) EXPECT_EQ(ob.pixels[i], curve_eval(cb[i % 3], b.pixels[i]));
}

TEST(Pipeline, GradientsMatchFiniteDifferences) {
  const auto problem = make_pipeline_problem(42);
  const auto r = check_pipeline(problem);
  EXPECT_TRUE(r.hypernet.pass()) << r.hypernet.max_rel_err;
  EXPECT_TRUE(r.head.pass()) << r.head.max_rel_err;
  EXPECT_EQ(r.hypernet.checked + r.hypernet.skipped, 643u);
  EXPECT_NEAR(r.loss_tape, r.loss_reference, 1e-12 * std::abs(r.loss_reference));
}

TEST(Pipeline, ProblemExercisesThePenalty) {
  const auto problem = make_pipeline_problem(42);
  std::vector<Tensor> g;
  const StepResult s = loss_and_gradients(problem.model, problem.pixels, problem.labels, &g);
  EXPECT_GT(s.mono, 0.0);
  EXPECT_NEAR(s.loss, s.ce + 10.0 * s.mono, 1e-12);
}

TEST(Train, PlainClassifierLossIsPositive) {
  TrainConfig cfg;
  cfg.enhancer = "none";
  cfg.lambda = 0.0;
  cfg.epochs = 1;
  cfg.batch_size = 32;
  const auto r = train(cfg, synthetic_cifar(64, 1));
  ASSERT_EQ(r.log.size(), 1u);
  EXPECT_GT(r.log[0].loss, 0.0);
  EXPECT_EQ(r.log[0].mono, 0.0);
}

TEST(Train, DeterministicAcrossRuns) {
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 32;
  const Dataset ds = synthetic_cifar(96, 7);
  const auto a = train(cfg, ds);
  const auto b = train(cfg, ds);
  EXPECT_EQ(to_json(a.model).dump(), to_json(b.model).dump());
  EXPECT_EQ(a.log[1].loss, b.log[1].loss);
}

TEST(Train, BadInputsThrow) {
  TrainConfig cfg;
  EXPECT_THROW(train(cfg, Dataset{}), std::invalid_argument);
  cfg.batch_size = 0;
  EXPECT_THROW(train(cfg, synthetic_cifar(4, 1)), std::invalid_argument);
  cfg = TrainConfig{};
  Dataset bad = synthetic_cifar(4, 1);
  bad.labels[0] = 12;
  EXPECT_THROW(train(cfg, bad), std::invalid_argument);
}
