#pragma once

// End-to-end training: loss = cross-entropy + lambda * monotonicity penalty,
// Adam with a per-step cosine schedule. Single-threaded and fully seeded, so
// a given config reproduces bit-identical weights on the same platform.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gcart/cifar.hpp"
#include "gcart/corruptions.hpp"
#include "gcart/diffengine.hpp"
#include "gcart/model.hpp"
#include "json.hpp"

namespace gcart {

// Mean over the batch of -log softmax(logits)[label], log-sum-exp stabilized.
inline Var cross_entropy(const Var& logits, std::span<const int> labels) {
  const Tensor& z = logits.value();
  if (z.rank() != 2 || z.shape()[0] != labels.size()) {
    throw std::invalid_argument("cross_entropy: logits " + shape_str(z.shape()) + " vs " +
                                std::to_string(labels.size()) + " labels");
  }
  const std::size_t batch = z.shape()[0];
  const std::size_t classes = z.shape()[1];
  Tensor row_max(Shape{batch, 1});
  Tensor onehot(Shape{batch, classes}, 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    if (labels[b] < 0 || static_cast<std::size_t>(labels[b]) >= classes) {
      throw std::invalid_argument("cross_entropy: label " + std::to_string(labels[b]) + " out of range");
    }
    double mx = z[b * classes];
    for (std::size_t k = 1; k < classes; ++k) mx = std::max(mx, z[b * classes + k]);
    row_max[b] = mx;
    onehot[b * classes + static_cast<std::size_t>(labels[b])] = 1.0;
  }
  // The shift is a constant; log-sum-exp is shift-invariant so gradients are exact.
  const Var shifted = logits - Var(std::move(row_max));
  const Var lse = log(sum(exp(shifted), 1));
  const Var picked = sum(shifted * Var(std::move(onehot)), 1);
  return mean(lse - picked);
}

inline double cosine_lr(std::size_t step, std::size_t total, double lr0) {
  if (total == 0 || step > total) throw std::invalid_argument("cosine_lr: need 0 <= step <= total, total > 0");
  return lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / static_cast<double>(total)));
}

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::size_t step = 0;
};

inline void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state, double lr,
                      const AdamConfig& cfg = {}) {
  if (params.size() != grads.size()) throw std::invalid_argument("adam: parameter/gradient count mismatch");
  if (state.m.empty()) {
    for (const Tensor* p : params) {
      state.m.emplace_back(p->shape(), 0.0);
      state.v.emplace_back(p->shape(), 0.0);
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = grads[i];
    if (g.shape() != p.shape()) throw std::invalid_argument("adam: gradient shape mismatch");
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      p[k] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

struct TrainConfig {
  std::size_t epochs = 5;
  std::size_t batch_size = 128;
  double lr0 = 1e-3;
  double lambda = 10.0;
  std::uint64_t seed = 42;
  std::string enhancer = "gcart";
  bool augment = true;
  AdamConfig adam;
  std::size_t hyper_hidden = 32;
  std::size_t head_hidden = 128;
  HistogramConfig hist;
  std::size_t mono_grid = 32;

  void validate() const {
    if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("train: batch size must be >= 1");
    if (!(lr0 > 0.0)) throw std::invalid_argument("train: lr0 must be > 0");
    if (!(lambda >= 0.0)) throw std::invalid_argument("train: lambda must be >= 0");
    if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0 && adam.eps > 0.0)) {
      throw std::invalid_argument("train: bad Adam hyperparameters");
    }
    hist.validate();
    MonoConfig{mono_grid, lambda}.validate();
    Enhancer::parse(enhancer);
  }

  // Full-scale recipe (100 epochs, batch 1024); too slow for the test suite.
  static TrainConfig full_scale(std::uint64_t seed) {
    TrainConfig c;
    c.epochs = 100;
    c.batch_size = 1024;
    c.seed = seed;
    return c;
  }
};

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"lr0", c.lr0},
          {"lambda", c.lambda},
          {"seed", c.seed},
          {"enhancer", c.enhancer},
          {"augment", c.augment},
          {"adam_beta1", c.adam.beta1},
          {"adam_beta2", c.adam.beta2},
          {"adam_eps", c.adam.eps},
          {"hyper_hidden", c.hyper_hidden},
          {"head_hidden", c.head_hidden},
          {"hist_bins", c.hist.bins},
          {"hist_gamma", c.hist.gamma},
          {"mono_grid", c.mono_grid}};
}

struct EpochLog {
  std::size_t epoch = 0;
  double loss = 0.0;  // ce + lambda * mono, sample-weighted mean over the epoch
  double ce = 0.0;
  double mono = 0.0;
  std::optional<double> clean_acc;
};

inline nlohmann::json to_json(const EpochLog& e) {
  nlohmann::json j{{"epoch", e.epoch}, {"loss", e.loss}, {"ce", e.ce}, {"mono", e.mono}};
  j["clean_acc"] = e.clean_acc ? nlohmann::json(*e.clean_acc) : nlohmann::json(nullptr);
  return j;
}

struct StepResult {
  double loss = 0.0;
  double ce = 0.0;
  double mono = 0.0;
};

// One forward/backward pass; returns the loss components and fills `grads`
// in Model::parameters() order.
inline StepResult loss_and_gradients(const Model& model, const Tensor& pixels, std::span<const int> labels,
                                     std::vector<Tensor>* grads) {
  Tape tape;
  const ModelVars vars = bind(model, grads ? &tape : nullptr);
  const ForwardPass fp = forward(model, vars, Var(pixels));
  const Var ce = cross_entropy(fp.logits, labels);
  const Var loss = ce + Var(model.mono.lambda) * fp.mono;
  if (grads) {
    const Gradients g = tape.backward(loss);
    grads->clear();
    for (const Var* v : parameter_vars(model, vars)) grads->push_back(g[*v]);
  }
  return StepResult{loss.item(), ce.item(), fp.mono.item()};
}

// Index of the largest logit per row; ties go to the lowest index.
inline std::vector<int> predict(const Model& model, std::span<const Image> images) {
  std::vector<int> out;
  const ModelVars vars = bind(model, nullptr);
  constexpr std::size_t kChunk = 256;
  for (std::size_t start = 0; start < images.size(); start += kChunk) {
    const std::size_t n = std::min(kChunk, images.size() - start);
    std::vector<Image> batch;
    batch.reserve(n);
    for (std::size_t i = 0; i < n; ++i) batch.push_back(model.enhancer.preprocess(images[start + i]));
    const ForwardPass fp = forward(model, vars, Var(stack_pixels(batch)));
    const Tensor& z = fp.logits.value();
    const std::size_t k = z.shape()[1];
    for (std::size_t b = 0; b < n; ++b) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < k; ++j)
        if (z[b * k + j] > z[b * k + best]) best = j;
      out.push_back(static_cast<int>(best));
    }
  }
  return out;
}

// Percent correct on (optionally corrupted) images; the corruption is applied
// before the enhancer.
inline double accuracy(const Model& model, const Dataset& data, const std::optional<CorruptionSpec>& corruption = {}) {
  if (data.empty()) throw std::invalid_argument("evaluate: empty dataset");
  std::vector<Image> images;
  images.reserve(data.size());
  for (const Image& img : data.images) images.push_back(corruption ? corrupt(img, *corruption) : img);
  const auto pred = predict(model, images);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == data.labels[i];
  return 100.0 * static_cast<double>(correct) / static_cast<double>(data.size());
}

struct TrainResult {
  Model model;
  std::vector<EpochLog> log;
};

using EpochCallback = std::function<void(const EpochLog&)>;

inline TrainResult train(const TrainConfig& cfg, const Dataset& train_set, const Dataset* eval_set = nullptr,
                         const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (train_set.empty()) throw std::invalid_argument("train: empty dataset");
  if (train_set.images.front().size() != 3072) throw std::invalid_argument("train: expects 32x32x3 images");
  for (int label : train_set.labels) {
    if (label < 0 || label >= kCifarClasses) throw std::invalid_argument("train: label out of range");
  }

  const Enhancer enhancer = Enhancer::parse(cfg.enhancer);
  TrainResult result;
  result.model = Model::init(enhancer, cfg.seed, cfg.hyper_hidden, cfg.head_hidden, cfg.hist,
                             MonoConfig{cfg.mono_grid, cfg.lambda});
  Model& model = result.model;

  const std::size_t n = train_set.size();
  const std::size_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = steps_per_epoch * cfg.epochs;
  const auto seed = static_cast<std::uint32_t>(cfg.seed);
  const AugmentSpec aug;

  AdamState adam;
  std::vector<Tensor> grads;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng order_rng = Rng::substream({seed, 3u, static_cast<std::uint32_t>(epoch)});
    const auto order = order_rng.permutation(n);
    double loss_sum = 0.0, ce_sum = 0.0, mono_sum = 0.0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, n - start);
      std::vector<Image> batch;
      std::vector<int> labels;
      batch.reserve(count);
      for (std::size_t i = 0; i < count; ++i) {
        const std::size_t idx = order[start + i];
        Image img = train_set.images[idx];
        if (cfg.augment) {
          Rng r = Rng::substream({seed, 4u, static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(idx)});
          img = augment(img, aug, r);
        }
        batch.push_back(enhancer.preprocess(img));
        labels.push_back(train_set.labels[idx]);
      }
      const StepResult s = loss_and_gradients(model, stack_pixels(batch), labels, &grads);
      const auto params = model.parameters();
      adam_step(params, grads, adam, cosine_lr(step, total_steps, cfg.lr0), cfg.adam);
      ++step;
      const double w = static_cast<double>(count);
      loss_sum += w * s.loss;
      ce_sum += w * s.ce;
      mono_sum += w * s.mono;
    }
    EpochLog e;
    e.epoch = epoch + 1;
    e.loss = loss_sum / static_cast<double>(n);
    e.ce = ce_sum / static_cast<double>(n);
    e.mono = mono_sum / static_cast<double>(n);
    if (eval_set && !eval_set->empty()) e.clean_acc = accuracy(model, *eval_set);
    result.log.push_back(e);
    if (on_epoch) on_epoch(e);
  }
  return result;
}

}  // namespace gcart
