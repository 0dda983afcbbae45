#pragma once

// Two-layer MLP (K -> hidden -> 3, ReLU) that maps one channel's soft
// histogram to raw curve parameters (a, d_raw, e_raw). Weights are shared
// across channels.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "gcart/diffengine.hpp"
#include "gcart/random.hpp"
#include "gcart/tonecurve.hpp"
#include "json.hpp"

namespace gcart {

struct HyperNetWeights {
  Tensor w1;  // [K, hidden]
  Tensor b1;  // [hidden]
  Tensor w2;  // [hidden, 3]
  Tensor b2;  // [3]

  std::size_t inputs() const { return w1.shape().at(0); }
  std::size_t hidden() const { return w1.shape().at(1); }

  std::size_t param_count() const { return w1.size() + b1.size() + w2.size() + b2.size(); }

  // w2 = 0 and b2 = (0, -5, -5), so every histogram maps to d = e =
  // softplus(-5) and the curve starts within 1% of the identity. w1 is
  // fan-in-scaled uniform in +-1/sqrt(K), b1 = 0.
  static HyperNetWeights init(std::uint64_t seed, std::size_t inputs = 16, std::size_t hidden = 32) {
    if (inputs == 0 || hidden == 0) throw std::invalid_argument("hypernet: dimensions must be positive");
    HyperNetWeights w;
    w.w1 = Tensor(Shape{inputs, hidden});
    w.b1 = Tensor(Shape{hidden}, 0.0);
    w.w2 = Tensor(Shape{hidden, 3}, 0.0);
    w.b2 = Tensor(Shape{3}, std::vector<double>{0.0, -5.0, -5.0});
    Rng rng(seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(inputs));
    for (double& v : w.w1.data()) v = rng.uniform(-bound, bound);
    return w;
  }

  void validate() const {
    if (w1.rank() != 2 || b1.shape() != Shape{w1.shape()[1]} || w2.shape() != Shape{w1.shape()[1], 3} ||
        b2.shape() != Shape{3}) {
      throw std::invalid_argument("hypernet: inconsistent weight shapes");
    }
  }

  std::vector<Tensor*> parameters() { return {&w1, &b1, &w2, &b2}; }
  std::vector<const Tensor*> parameters() const { return {&w1, &b1, &w2, &b2}; }
};

inline RawCurveParams predict_raw_params(std::span<const double> hist, const HyperNetWeights& w) {
  w.validate();
  const std::size_t k = w.inputs();
  const std::size_t h = w.hidden();
  if (hist.size() != k) {
    throw std::invalid_argument("hypernet: histogram has " + std::to_string(hist.size()) + " bins, expected " +
                                std::to_string(k));
  }
  std::vector<double> hidden(h);
  for (std::size_t j = 0; j < h; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i) s += hist[i] * w.w1[i * h + j];
    s += w.b1[j];
    hidden[j] = s > 0.0 ? s : 0.0;
  }
  double out[3];
  for (std::size_t o = 0; o < 3; ++o) {
    double s = 0.0;
    for (std::size_t j = 0; j < h; ++j) s += hidden[j] * w.w2[j * 3 + o];
    out[o] = s + w.b2[o];
  }
  return RawCurveParams{out[0], out[1], out[2]};
}

struct HyperNetVars {
  Var w1, b1, w2, b2;
};

// hist: [N, K] -> raw params [N, 3].
inline Var predict_raw_params(const Var& hist, const HyperNetVars& w) {
  if (hist.value().rank() != 2 || hist.shape()[1] != w.w1.shape().at(0)) {
    throw std::invalid_argument("hypernet: histogram batch " + shape_str(hist.shape()) + " does not match weights " +
                                shape_str(w.w1.shape()));
  }
  const Var hidden = relu(matmul(hist, w.w1) + w.b1);
  return matmul(hidden, w.w2) + w.b2;
}

inline nlohmann::json tensor_to_json(const Tensor& t) {
  if (t.rank() == 1) return nlohmann::json(std::vector<double>(t.data().begin(), t.data().end()));
  if (t.rank() != 2) throw std::invalid_argument("tensor_to_json: only rank 1 and 2 supported");
  nlohmann::json rows = nlohmann::json::array();
  const std::size_t cols = t.shape()[1];
  for (std::size_t r = 0; r < t.shape()[0]; ++r) {
    rows.push_back(std::vector<double>(t.data().begin() + static_cast<std::ptrdiff_t>(r * cols),
                                       t.data().begin() + static_cast<std::ptrdiff_t>((r + 1) * cols)));
  }
  return rows;
}

inline Tensor tensor_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) throw std::invalid_argument("checkpoint: expected a non-empty array");
  if (j.front().is_number()) {
    auto v = j.get<std::vector<double>>();
    const std::size_t n = v.size();
    return Tensor(Shape{n}, std::move(v));
  }
  std::vector<double> data;
  const std::size_t cols = j.front().size();
  for (const auto& row : j) {
    if (!row.is_array() || row.size() != cols) throw std::invalid_argument("checkpoint: ragged matrix");
    for (const auto& x : row) data.push_back(x.get<double>());
  }
  return Tensor(Shape{j.size(), cols}, std::move(data));
}

inline nlohmann::json to_json(const HyperNetWeights& w) {
  return {{"version", 1},
          {"w1", tensor_to_json(w.w1)},
          {"b1", tensor_to_json(w.b1)},
          {"w2", tensor_to_json(w.w2)},
          {"b2", tensor_to_json(w.b2)}};
}

inline HyperNetWeights hypernet_from_json(const nlohmann::json& j) {
  if (j.value("version", 0) != 1) throw std::invalid_argument("checkpoint: unsupported hypernet version");
  HyperNetWeights w{tensor_from_json(j.at("w1")), tensor_from_json(j.at("b1")), tensor_from_json(j.at("w2")),
                    tensor_from_json(j.at("b2"))};
  w.validate();
  return w;
}

}  // namespace gcart
