#pragma once

// Enhancer front-end + classifier head, on the tape or evaluated eagerly.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gcart/classical.hpp"
#include "gcart/diffengine.hpp"
#include "gcart/hypernet.hpp"
#include "gcart/image.hpp"
#include "gcart/random.hpp"
#include "gcart/softhist.hpp"
#include "gcart/tonecurve.hpp"
#include "json.hpp"

namespace gcart {

struct Enhancer {
  enum class Kind { none, gcart, he, clahe, gamma };

  Kind kind = Kind::gcart;
  double gamma = 2.2;
  ClaheConfig clahe_cfg;

  static Enhancer parse(const std::string& text) {
    Enhancer e;
    if (text == "none") {
      e.kind = Kind::none;
    } else if (text == "gcart") {
      e.kind = Kind::gcart;
    } else if (text == "he") {
      e.kind = Kind::he;
    } else if (text == "clahe") {
      e.kind = Kind::clahe;
    } else if (text.rfind("gamma:", 0) == 0) {
      e.kind = Kind::gamma;
      std::size_t used = 0;
      const std::string num = text.substr(6);
      try {
        e.gamma = std::stod(num, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (num.empty() || used != num.size() || !(e.gamma > 0.0)) {
        throw std::invalid_argument("enhancer: bad gamma value in '" + text + "'");
      }
    } else {
      throw std::invalid_argument("unknown enhancer '" + text + "' (none|gcart|he|clahe|gamma:<g>)");
    }
    return e;
  }

  std::string name() const {
    switch (kind) {
      case Kind::none: return "none";
      case Kind::gcart: return "gcart";
      case Kind::he: return "he";
      case Kind::clahe: return "clahe";
      case Kind::gamma: {
        nlohmann::json g = gamma;
        return "gamma:" + g.dump();
      }
    }
    return "?";
  }

  bool learned() const { return kind == Kind::gcart; }

  // Fixed pre-processing for the classical kinds; identity otherwise.
  Image preprocess(const Image& image) const {
    switch (kind) {
      case Kind::he: return hist_equalize(image);
      case Kind::clahe: return clahe(image, clahe_cfg);
      case Kind::gamma: return gamma_correct(image, gamma);
      default: return image;
    }
  }
};

// flatten(H*W*C) -> hidden ReLU -> classes
struct ClassifierHead {
  Tensor w1, b1, w2, b2;

  // Uniform in +-1/sqrt(fan_in) for weights and biases.
  static ClassifierHead init(std::uint64_t seed, std::size_t inputs = 3072, std::size_t hidden = 128,
                             std::size_t classes = 10) {
    ClassifierHead h;
    h.w1 = Tensor(Shape{inputs, hidden});
    h.b1 = Tensor(Shape{hidden});
    h.w2 = Tensor(Shape{hidden, classes});
    h.b2 = Tensor(Shape{classes});
    Rng rng(seed);
    const double bound1 = 1.0 / std::sqrt(static_cast<double>(inputs));
    const double bound2 = 1.0 / std::sqrt(static_cast<double>(hidden));
    for (double& v : h.w1.data()) v = rng.uniform(-bound1, bound1);
    for (double& v : h.b1.data()) v = rng.uniform(-bound1, bound1);
    for (double& v : h.w2.data()) v = rng.uniform(-bound2, bound2);
    for (double& v : h.b2.data()) v = rng.uniform(-bound2, bound2);
    return h;
  }

  std::size_t inputs() const { return w1.shape().at(0); }
  std::size_t hidden() const { return w1.shape().at(1); }
  std::size_t classes() const { return w2.shape().at(1); }
  std::size_t param_count() const { return w1.size() + b1.size() + w2.size() + b2.size(); }

  void validate() const {
    if (w1.rank() != 2 || b1.shape() != Shape{w1.shape()[1]} || w2.rank() != 2 || w2.shape()[0] != w1.shape()[1] ||
        b2.shape() != Shape{w2.shape()[1]}) {
      throw std::invalid_argument("classifier head: inconsistent weight shapes");
    }
  }

  std::vector<Tensor*> parameters() { return {&w1, &b1, &w2, &b2}; }
};

inline nlohmann::json to_json(const ClassifierHead& h) {
  return {{"version", 1},
          {"w1", tensor_to_json(h.w1)},
          {"b1", tensor_to_json(h.b1)},
          {"w2", tensor_to_json(h.w2)},
          {"b2", tensor_to_json(h.b2)}};
}

inline ClassifierHead head_from_json(const nlohmann::json& j) {
  if (j.value("version", 0) != 1) throw std::invalid_argument("checkpoint: unsupported head version");
  ClassifierHead h{tensor_from_json(j.at("w1")), tensor_from_json(j.at("b1")), tensor_from_json(j.at("w2")),
                   tensor_from_json(j.at("b2"))};
  h.validate();
  return h;
}

struct Model {
  Enhancer enhancer;
  HistogramConfig hist;
  MonoConfig mono;
  HyperNetWeights hyper;
  ClassifierHead head;

  static Model init(const Enhancer& enhancer, std::uint64_t seed, std::size_t hyper_hidden = 32,
                    std::size_t head_hidden = 128, const HistogramConfig& hist = {}, const MonoConfig& mono = {}) {
    Model m;
    m.enhancer = enhancer;
    m.hist = hist;
    m.mono = mono;
    m.hyper = HyperNetWeights::init(Rng::substream({static_cast<std::uint32_t>(seed), 1u}).next(), hist.bins,
                                    hyper_hidden);
    m.head = ClassifierHead::init(Rng::substream({static_cast<std::uint32_t>(seed), 2u}).next(), 3072, head_hidden);
    return m;
  }

  // Trainable tensors in a fixed order: hypernet first (gcart only), then head.
  std::vector<Tensor*> parameters() {
    std::vector<Tensor*> p;
    if (enhancer.learned()) p = hyper.parameters();
    for (Tensor* t : head.parameters()) p.push_back(t);
    return p;
  }

  // Per-channel curve parameters the hypernet assigns to this image.
  std::vector<CurveParams> curves_for(const Image& image) const {
    const SoftHistogram h = soft_histogram(image, hist);
    std::vector<CurveParams> out;
    for (std::size_t c = 0; c < h.channels; ++c) out.push_back(effective_params(predict_raw_params(h.channel(c), hyper)));
    return out;
  }

  // Full front-end on one image: fixed pre-processing or the learned curve.
  Image enhance(const Image& image) const {
    if (!enhancer.learned()) return enhancer.preprocess(image);
    const auto curves = curves_for(image);
    return apply_curve(image, curves);
  }
};

inline nlohmann::json to_json(const Model& m) {
  nlohmann::json j{{"version", 1},
                   {"enhancer", m.enhancer.name()},
                   {"hist_bins", m.hist.bins},
                   {"hist_gamma", m.hist.gamma},
                   {"mono_grid", m.mono.grid},
                   {"lambda", m.mono.lambda},
                   {"head", to_json(m.head)}};
  if (m.enhancer.learned()) j["hypernet"] = to_json(m.hyper);
  if (m.enhancer.kind == Enhancer::Kind::clahe) {
    j["clahe_tiles"] = m.enhancer.clahe_cfg.tiles;
    j["clahe_clip"] = m.enhancer.clahe_cfg.clip;
  }
  return j;
}

inline Model model_from_json(const nlohmann::json& j) {
  if (j.value("version", 0) != 1) throw std::invalid_argument("checkpoint: unsupported model version");
  Model m;
  m.enhancer = Enhancer::parse(j.at("enhancer").get<std::string>());
  m.hist.bins = j.at("hist_bins").get<std::size_t>();
  m.hist.gamma = j.at("hist_gamma").get<double>();
  m.mono.grid = j.at("mono_grid").get<std::size_t>();
  m.mono.lambda = j.at("lambda").get<double>();
  m.head = head_from_json(j.at("head"));
  if (m.enhancer.learned()) m.hyper = hypernet_from_json(j.at("hypernet"));
  if (j.contains("clahe_tiles")) {
    m.enhancer.clahe_cfg.tiles = j.at("clahe_tiles").get<std::size_t>();
    m.enhancer.clahe_cfg.clip = j.at("clahe_clip").get<double>();
  }
  return m;
}

// Model weights bound to a tape (trainable) or as constants (inference).
struct ModelVars {
  HyperNetVars hyper;
  Var w1, b1, w2, b2;
};

inline ModelVars bind(const Model& m, Tape* tape) {
  auto v = [tape](const Tensor& t) { return tape ? tape->variable(t) : Var(t); };
  ModelVars out;
  if (m.enhancer.learned()) out.hyper = HyperNetVars{v(m.hyper.w1), v(m.hyper.b1), v(m.hyper.w2), v(m.hyper.b2)};
  out.w1 = v(m.head.w1);
  out.b1 = v(m.head.b1);
  out.w2 = v(m.head.w2);
  out.b2 = v(m.head.b2);
  return out;
}

// Tensors of `vars` in the order of Model::parameters().
inline std::vector<const Var*> parameter_vars(const Model& m, const ModelVars& vars) {
  std::vector<const Var*> p;
  if (m.enhancer.learned()) p = {&vars.hyper.w1, &vars.hyper.b1, &vars.hyper.w2, &vars.hyper.b2};
  for (const Var* v : {&vars.w1, &vars.b1, &vars.w2, &vars.b2}) p.push_back(v);
  return p;
}

struct ForwardPass {
  Var enhanced;  // [B, P, C]
  Var logits;    // [B, classes]
  Var mono;      // scalar; 0 for non-learned enhancers
};

// pixels: [B, P, C], already through any fixed pre-processing.
inline ForwardPass forward(const Model& m, const ModelVars& vars, const Var& pixels) {
  if (pixels.value().rank() != 3) throw std::invalid_argument("forward: expected [B, P, C] pixels");
  const std::size_t batch = pixels.shape()[0];
  const std::size_t count = pixels.shape()[1];
  const std::size_t channels = pixels.shape()[2];
  ForwardPass out;
  out.mono = Var(0.0);
  out.enhanced = pixels;
  if (m.enhancer.learned()) {
    const Var hist = reshape(soft_histogram(pixels, m.hist), Shape{batch * channels, m.hist.bins});
    const CurveVars curves = effective_params(predict_raw_params(hist, vars.hyper), batch, channels);
    out.enhanced = apply_curve(pixels, curves);
    out.mono = mono_penalty(curves, m.mono);
  }
  const Var flat = reshape(out.enhanced, Shape{batch, count * channels});
  const Var hidden = relu(matmul(flat, vars.w1) + vars.b1);
  out.logits = matmul(hidden, vars.w2) + vars.b2;
  return out;
}

}  // namespace gcart
