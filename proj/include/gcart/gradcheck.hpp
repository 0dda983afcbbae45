#pragma once

// Central finite-difference checks of the tape's analytic gradients.
//
// The full-pipeline check differentiates a plain-double re-implementation of
// the loss (no tape involved), so the two routes share only the weights.
// Perturbations that flip any ReLU / max(0, .) branch between the + and -
// evaluations are kinks; they are skipped and counted.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "gcart/diffengine.hpp"
#include "gcart/model.hpp"
#include "gcart/random.hpp"
#include "gcart/trainer.hpp"

namespace gcart {

struct GradcheckResult {
  std::string name;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  double max_rel_err = 0.0;
  double tolerance = 0.0;

  bool pass() const { return checked > 0 && max_rel_err <= tolerance; }
};

// |a - n| / max(|a|, |n|, floor). The floor keeps exact zeros (both routes
// return 0 for a weight that meets a zero input) from dividing by zero.
inline double relative_error(double analytic, double numeric, double floor = 1e-8) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

// ---------------------------------------------------------------------------
// Primitive-level checks: loss = sum(weights * op(inputs)).

namespace detail {

using PrimitiveFn = std::function<Var(const std::vector<Var>&)>;

inline GradcheckResult check_primitive(const std::string& name, std::vector<Tensor> inputs, const PrimitiveFn& op,
                                       Rng& rng, double h, double tol) {
  GradcheckResult r{name, 0, 0, 0.0, tol};
  auto scalar_loss = [&](const std::vector<Var>& in, const Tensor& weights) {
    const Var y = op(in);
    return sum(y * Var(weights));
  };
  std::vector<Var> constants(inputs.begin(), inputs.end());
  const Tensor probe = op(constants).value();
  Tensor weights(probe.shape());
  for (double& w : weights.data()) w = rng.uniform(0.5, 1.5);

  Tape tape;
  std::vector<Var> vars;
  for (const Tensor& t : inputs) vars.push_back(tape.variable(t));
  const Gradients g = tape.backward(scalar_loss(vars, weights));

  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Tensor analytic = g[vars[i]];
    for (std::size_t k = 0; k < inputs[i].size(); ++k) {
      const double x0 = inputs[i][k];
      auto eval = [&](double x) {
        inputs[i][k] = x;
        std::vector<Var> in(inputs.begin(), inputs.end());
        return scalar_loss(in, weights).item();
      };
      const double numeric = (eval(x0 + h) - eval(x0 - h)) / (2.0 * h);
      inputs[i][k] = x0;
      r.max_rel_err = std::max(r.max_rel_err, relative_error(analytic[k], numeric));
      ++r.checked;
    }
  }
  return r;
}

inline Tensor random_tensor(Shape shape, Rng& rng, double lo, double hi) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

// Values in +-[0.1, 1]: clear of the ReLU kink at 0.
inline Tensor signed_away_from_zero(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(0.1, 1.0);
  return t;
}

}  // namespace detail

inline std::vector<GradcheckResult> check_primitives(std::uint64_t seed = 7, double h = 1e-5, double tol = 1e-6) {
  using detail::check_primitive;
  using detail::random_tensor;
  Rng rng(seed);
  std::vector<GradcheckResult> out;
  auto run = [&](const std::string& name, std::vector<Tensor> in, const detail::PrimitiveFn& f) {
    out.push_back(check_primitive(name, std::move(in), f, rng, h, tol));
  };
  run("add", {random_tensor({3, 4}, rng, -1, 1), random_tensor({4}, rng, -1, 1)},
      [](const auto& v) { return add(v[0], v[1]); });
  run("sub", {random_tensor({2, 3, 1}, rng, -1, 1), random_tensor({3, 4}, rng, -1, 1)},
      [](const auto& v) { return sub(v[0], v[1]); });
  run("mul", {random_tensor({3, 4}, rng, -1, 1), random_tensor({3, 1}, rng, -1, 1)},
      [](const auto& v) { return mul(v[0], v[1]); });
  run("div", {random_tensor({3, 4}, rng, -1, 1), random_tensor({4}, rng, 0.5, 2.0)},
      [](const auto& v) { return div(v[0], v[1]); });
  run("matmul", {random_tensor({3, 5}, rng, -1, 1), random_tensor({5, 2}, rng, -1, 1)},
      [](const auto& v) { return matmul(v[0], v[1]); });
  run("exp", {random_tensor({6}, rng, -2, 2)}, [](const auto& v) { return exp(v[0]); });
  run("log", {random_tensor({6}, rng, 0.5, 3)}, [](const auto& v) { return log(v[0]); });
  run("pow", {random_tensor({6}, rng, 0.5, 2)}, [](const auto& v) { return pow(v[0], 2.7); });
  run("relu", {detail::signed_away_from_zero({8}, rng)}, [](const auto& v) { return relu(v[0]); });
  run("max0", {detail::signed_away_from_zero({8}, rng)}, [](const auto& v) { return max0(v[0]); });
  run("softplus", {random_tensor({6}, rng, -6, 6)}, [](const auto& v) { return softplus(v[0]); });
  run("sum", {random_tensor({2, 3}, rng, -1, 1)}, [](const auto& v) { return sum(v[0]); });
  run("sum_axis", {random_tensor({2, 3, 4}, rng, -1, 1)}, [](const auto& v) { return sum(v[0], 1); });
  run("mean", {random_tensor({2, 3}, rng, -1, 1)}, [](const auto& v) { return mean(v[0]); });
  run("mean_axis", {random_tensor({2, 3, 4}, rng, -1, 1)}, [](const auto& v) { return mean(v[0], 2); });
  run("reshape", {random_tensor({2, 6}, rng, -1, 1)},
      [](const auto& v) { return exp(reshape(v[0], Shape{3, 4})); });
  return out;
}

// ---------------------------------------------------------------------------
// Full-pipeline check.

struct PipelineProblem {
  Model model;
  Tensor pixels;  // [B, H*W, C]
  std::vector<int> labels;
};

// Two random 32x32 images and a hypernet moved off its initialization so
// every path carries gradient and some curves are non-monotone (penalty on).
inline PipelineProblem make_pipeline_problem(std::uint64_t seed = 42) {
  PipelineProblem p;
  p.model = Model::init(Enhancer::parse("gcart"), seed);
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  for (double& v : p.model.hyper.w2.data()) v = rng.uniform(-1.5, 1.5);
  for (double& v : p.model.hyper.b1.data()) v = rng.uniform(-0.2, 0.2);
  p.model.hyper.b2 = Tensor(Shape{3}, std::vector<double>{2.0, -1.0, -0.5});
  const std::size_t batch = 2;
  p.pixels = Tensor(Shape{batch, 1024, 3});
  for (std::size_t b = 0; b < batch; ++b) {
    const double lo = rng.uniform(0.0, 0.3);
    const double hi = rng.uniform(0.6, 1.0);
    for (std::size_t i = 0; i < 1024 * 3; ++i) p.pixels[b * 3072 + i] = rng.uniform(lo, hi);
  }
  p.labels = {3, 7};
  return p;
}

namespace detail {

// Plain-double forward of the GC-ART pipeline loss for gradient checking.
class ReferenceLoss {
 public:
  ReferenceLoss(const PipelineProblem& p) : problem_(p) {  // NOLINT
    const Tensor& x = p.pixels;
    batch_ = x.shape()[0];
    count_ = x.shape()[1];
    channels_ = x.shape()[2];
    const auto centers = p.model.hist.centers();
    hist_.assign(batch_ * channels_, std::vector<double>(centers.size(), 0.0));
    for (std::size_t b = 0; b < batch_; ++b)
      for (std::size_t c = 0; c < channels_; ++c)
        for (std::size_t i = 0; i < centers.size(); ++i) {
          double s = 0.0;
          for (std::size_t q = 0; q < count_; ++q) {
            const double d = x[(b * count_ + q) * channels_ + c] - centers[i];
            s += std::exp(-d * d / p.model.hist.gamma);
          }
          hist_[b * channels_ + c][i] = s / static_cast<double>(count_);
        }
  }

  // Front-end state that head-only perturbations leave untouched.
  struct Front {
    std::vector<std::vector<double>> enhanced;  // per image, flattened (p, c)
    double mono = 0.0;
    std::vector<char> pattern;  // branch taken at each ReLU / max(0, .)
  };

  struct Head {
    std::vector<std::vector<double>> pre;  // per image, hidden pre-activations
  };

  Front front(const HyperNetWeights& w) const {
    Front f;
    const MonoConfig& mono = problem_.model.mono;
    const auto t = mono.points();
    double mono_sum = 0.0;
    std::vector<CurveParams> curves(batch_ * channels_);
    for (std::size_t n = 0; n < batch_ * channels_; ++n) {
      const auto& h = hist_[n];
      const std::size_t k = w.inputs(), hid = w.hidden();
      std::vector<double> hidden(hid);
      for (std::size_t j = 0; j < hid; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < k; ++i) s += h[i] * w.w1[i * hid + j];
        s += w.b1[j];
        f.pattern.push_back(s > 0.0);
        hidden[j] = s > 0.0 ? s : 0.0;
      }
      double raw[3];
      for (std::size_t o = 0; o < 3; ++o) {
        double s = 0.0;
        for (std::size_t j = 0; j < hid; ++j) s += hidden[j] * w.w2[j * 3 + o];
        raw[o] = s + w.b2[o];
      }
      const double d = std::log1p(std::exp(raw[1]));
      const double e = std::log1p(std::exp(raw[2]));
      curves[n] = CurveParams{raw[0], d + e + 1.0 - raw[0], d, e};
      double pen = 0.0;
      for (std::size_t j = 0; j + 1 < t.size(); ++j) {
        const double step = curve_eval(curves[n], t[j + 1]) - curve_eval(curves[n], t[j]);
        f.pattern.push_back(step < 0.0);
        if (step < 0.0) pen -= step;
      }
      mono_sum += pen / static_cast<double>(t.size() - 1);
    }
    f.mono = mono_sum / static_cast<double>(batch_ * channels_);
    f.enhanced.assign(batch_, std::vector<double>(count_ * channels_));
    for (std::size_t b = 0; b < batch_; ++b)
      for (std::size_t q = 0; q < count_; ++q)
        for (std::size_t c = 0; c < channels_; ++c) {
          const std::size_t at = q * channels_ + c;
          f.enhanced[b][at] = curve_eval(curves[b * channels_ + c], problem_.pixels[b * count_ * channels_ + at]);
        }
    return f;
  }

  Head head_pre(const Front& f, const ClassifierHead& h) const {
    Head out;
    const std::size_t in = h.inputs(), hid = h.hidden();
    for (std::size_t b = 0; b < batch_; ++b) {
      std::vector<double> z(hid, 0.0);
      for (std::size_t i = 0; i < in; ++i) {
        const double x = f.enhanced[b][i];
        for (std::size_t j = 0; j < hid; ++j) z[j] += x * h.w1[i * hid + j];
      }
      for (std::size_t j = 0; j < hid; ++j) z[j] += h.b1[j];
      out.pre.push_back(std::move(z));
    }
    return out;
  }

  // Loss from hidden pre-activations; appends head ReLU branches to `pattern`.
  double loss(const Front& f, const Head& hd, const ClassifierHead& h, std::vector<char>* pattern) const {
    const std::size_t hid = h.hidden(), classes = h.classes();
    double ce = 0.0;
    for (std::size_t b = 0; b < batch_; ++b) {
      std::vector<double> logits(classes);
      for (std::size_t k = 0; k < classes; ++k) {
        double s = 0.0;
        for (std::size_t j = 0; j < hid; ++j) {
          const double z = hd.pre[b][j];
          if (z > 0.0) s += z * h.w2[j * classes + k];
        }
        logits[k] = s + h.b2[k];
      }
      if (pattern)
        for (std::size_t j = 0; j < hid; ++j) pattern->push_back(hd.pre[b][j] > 0.0);
      const double mx = *std::max_element(logits.begin(), logits.end());
      double se = 0.0;
      for (double z : logits) se += std::exp(z - mx);
      ce += mx + std::log(se) - logits[static_cast<std::size_t>(problem_.labels[b])];
    }
    return ce / static_cast<double>(batch_) + problem_.model.mono.lambda * f.mono;
  }

  double full(const HyperNetWeights& w, const ClassifierHead& h, std::vector<char>* pattern) const {
    Front f = front(w);
    const double l = loss(f, head_pre(f, h), h, pattern);
    if (pattern) pattern->insert(pattern->begin(), f.pattern.begin(), f.pattern.end());
    return l;
  }

  std::size_t batch() const { return batch_; }

 private:
  const PipelineProblem& problem_;
  std::size_t batch_ = 0, count_ = 0, channels_ = 0;
  std::vector<std::vector<double>> hist_;
};

}  // namespace detail

struct PipelineGradcheck {
  GradcheckResult hypernet;
  GradcheckResult head;
  double loss_tape = 0.0;
  double loss_reference = 0.0;

  bool pass() const { return hypernet.pass() && head.pass(); }
};

// The pipeline loss is O(1) and central differences at h = 1e-5 carry about
// 1e-10 of rounding noise, so gradients smaller than `floor` are compared in
// absolute rather than relative terms.
inline PipelineGradcheck check_pipeline(const PipelineProblem& p, double h = 1e-5, double tol = 1e-4,
                                        double floor = 1e-6) {
  PipelineGradcheck out;
  out.hypernet = GradcheckResult{"hypernet", 0, 0, 0.0, tol};
  out.head = GradcheckResult{"classifier_head", 0, 0, 0.0, tol};

  std::vector<Tensor> analytic;
  out.loss_tape = loss_and_gradients(p.model, p.pixels, p.labels, &analytic).loss;

  const detail::ReferenceLoss ref(p);
  out.loss_reference = ref.full(p.model.hyper, p.model.head, nullptr);

  auto record = [floor](GradcheckResult& r, double a, double n, bool kink) {
    if (kink) {
      ++r.skipped;
      return;
    }
    r.max_rel_err = std::max(r.max_rel_err, relative_error(a, n, floor));
    ++r.checked;
  };

  // Hypernet: full re-evaluation per perturbation.
  HyperNetWeights w = p.model.hyper;
  std::vector<Tensor*> hyper_params = w.parameters();
  for (std::size_t t = 0; t < hyper_params.size(); ++t) {
    Tensor& param = *hyper_params[t];
    for (std::size_t k = 0; k < param.size(); ++k) {
      const double x0 = param[k];
      std::vector<char> pp, pm;
      param[k] = x0 + h;
      const double lp = ref.full(w, p.model.head, &pp);
      param[k] = x0 - h;
      const double lm = ref.full(w, p.model.head, &pm);
      param[k] = x0;
      record(out.hypernet, analytic[t][k], (lp - lm) / (2.0 * h), pp != pm);
    }
  }

  // Head: the front end is fixed, so only the touched activations are redone.
  const ClassifierHead& head = p.model.head;
  const auto front = ref.front(p.model.hyper);
  const auto base = ref.head_pre(front, head);
  const std::size_t in = head.inputs(), hid = head.hidden(), classes = head.classes();
  const std::size_t offset = hyper_params.size();
  ClassifierHead scratch = head;

  auto central = [&](auto&& perturb) {
    std::vector<char> pp, pm;
    double lp, lm;
    {
      auto hd = base;
      perturb(hd, scratch, +h);
      lp = ref.loss(front, hd, scratch, &pp);
      perturb(hd, scratch, 0.0);
    }
    {
      auto hd = base;
      perturb(hd, scratch, -h);
      lm = ref.loss(front, hd, scratch, &pm);
      perturb(hd, scratch, 0.0);
    }
    return std::pair<double, bool>{(lp - lm) / (2.0 * h), pp != pm};
  };

  for (std::size_t i = 0; i < in; ++i) {
    for (std::size_t j = 0; j < hid; ++j) {
      auto [n, kink] = central([&](auto& hd, ClassifierHead&, double dh) {
        for (std::size_t b = 0; b < ref.batch(); ++b) hd.pre[b][j] = base.pre[b][j] + dh * front.enhanced[b][i];
      });
      record(out.head, analytic[offset + 0][i * hid + j], n, kink);
    }
  }
  for (std::size_t j = 0; j < hid; ++j) {
    auto [n, kink] = central([&](auto& hd, ClassifierHead&, double dh) {
      for (std::size_t b = 0; b < ref.batch(); ++b) hd.pre[b][j] = base.pre[b][j] + dh;
    });
    record(out.head, analytic[offset + 1][j], n, kink);
  }
  for (std::size_t k = 0; k < hid * classes; ++k) {
    auto [n, kink] = central([&](auto&, ClassifierHead& s, double dh) { s.w2[k] = head.w2[k] + dh; });
    record(out.head, analytic[offset + 2][k], n, kink);
  }
  for (std::size_t k = 0; k < classes; ++k) {
    auto [n, kink] = central([&](auto&, ClassifierHead& s, double dh) { s.b2[k] = head.b2[k] + dh; });
    record(out.head, analytic[offset + 3][k], n, kink);
  }
  return out;
}

}  // namespace gcart
