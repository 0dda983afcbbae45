#pragma once

// Endpoint-pinned rational tone curve
//
//   f(x) = (a x^2 + b x) / (d x^2 + e x + 1),   b = d + e + 1 - a,
//
// with d = softplus(d_raw), e = softplus(e_raw). f(0) = 0 and f(1) = 1 by
// construction and the denominator is >= 1 on [0, 1]. Intermediate values are
// not clamped.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "gcart/diffengine.hpp"
#include "gcart/image.hpp"

namespace gcart {

struct RawCurveParams {
  double a = 0.0;
  double d_raw = 0.0;
  double e_raw = 0.0;
};

struct CurveParams {
  double a = 0.0;
  double b = 1.0;
  double d = 0.0;
  double e = 0.0;
};

struct MonoConfig {
  std::size_t grid = 32;
  double lambda = 10.0;

  void validate() const {
    if (grid < 2) throw std::invalid_argument("monotonicity penalty: grid size must be >= 2");
    if (!(lambda >= 0.0)) throw std::invalid_argument("monotonicity penalty: lambda must be >= 0");
  }

  std::vector<double> points() const {
    validate();
    std::vector<double> t(grid);
    for (std::size_t j = 0; j < grid; ++j) t[j] = static_cast<double>(j) / static_cast<double>(grid - 1);
    t.back() = 1.0;
    return t;
  }
};

inline CurveParams from_ade(double a, double d, double e) { return CurveParams{a, d + e + 1.0 - a, d, e}; }

inline CurveParams effective_params(const RawCurveParams& raw) {
  return from_ade(raw.a, softplus(raw.d_raw), softplus(raw.e_raw));
}

inline double curve_eval(const CurveParams& p, double x) {
  return (p.a * x * x + p.b * x) / (p.d * x * x + p.e * x + 1.0);
}

// Quotient rule: f' = (N' D - N D') / D^2.
inline double curve_derivative(const CurveParams& p, double x) {
  const double num = p.a * x * x + p.b * x;
  const double den = p.d * x * x + p.e * x + 1.0;
  const double dnum = 2.0 * p.a * x + p.b;
  const double dden = 2.0 * p.d * x + p.e;
  return (dnum * den - num * dden) / (den * den);
}

inline Image apply_curve(const Image& image, std::span<const CurveParams> per_channel) {
  if (per_channel.size() != image.channels) {
    throw std::invalid_argument("apply_curve: need one parameter set per channel");
  }
  Image out = image;
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    out.pixels[i] = curve_eval(per_channel[i % image.channels], image.pixels[i]);
  }
  return out;
}

// Mean positive part of the negative adjacent differences of one sampled curve.
inline double mono_penalty_samples(std::span<const double> samples) {
  if (samples.size() < 2) throw std::invalid_argument("monotonicity penalty: grid size must be >= 2");
  double s = 0.0;
  for (std::size_t j = 0; j + 1 < samples.size(); ++j) s += std::max(0.0, -(samples[j + 1] - samples[j]));
  return s / static_cast<double>(samples.size() - 1);
}

// Averaged over curves (batch x channel) and grid intervals.
inline double mono_penalty(std::span<const CurveParams> curves, const MonoConfig& cfg) {
  const auto t = cfg.points();
  if (curves.empty()) return 0.0;
  std::vector<double> f(t.size());
  double s = 0.0;
  for (const CurveParams& p : curves) {
    for (std::size_t j = 0; j < t.size(); ++j) f[j] = curve_eval(p, t[j]);
    s += mono_penalty_samples(f);
  }
  return s / static_cast<double>(curves.size());
}

// ---------------------------------------------------------------------------
// Tape versions. Parameters are [B, 1, C] so they broadcast over [B, P, C].

struct CurveVars {
  Var a, b, d, e;
  std::size_t batch = 0;
  std::size_t channels = 0;
};

// raw: [B*C, 3] rows ordered (image, channel), columns (a, d_raw, e_raw).
inline CurveVars effective_params(const Var& raw, std::size_t batch, std::size_t channels) {
  if (raw.value().rank() != 2 || raw.shape()[0] != batch * channels || raw.shape()[1] != 3) {
    throw std::invalid_argument("effective_params: expected [B*C, 3], got " + shape_str(raw.shape()));
  }
  auto column = [&](std::size_t k) {
    Tensor pick(Shape{3, 1}, 0.0);
    pick[k] = 1.0;
    return reshape(matmul(raw, Var(std::move(pick))), Shape{batch, 1, channels});
  };
  CurveVars p;
  p.batch = batch;
  p.channels = channels;
  p.a = column(0);
  p.d = softplus(column(1));
  p.e = softplus(column(2));
  p.b = p.d + p.e + Var(1.0) - p.a;
  return p;
}

inline Var curve_eval(const CurveVars& p, const Var& x) {
  const Var x2 = x * x;
  return (p.a * x2 + p.b * x) / (p.d * x2 + p.e * x + Var(1.0));
}

// pixels [B, P, C] -> [B, P, C]
inline Var apply_curve(const Var& pixels, const CurveVars& p) {
  if (pixels.value().rank() != 3 || pixels.shape()[0] != p.batch || pixels.shape()[2] != p.channels) {
    throw std::invalid_argument("apply_curve: pixel batch " + shape_str(pixels.shape()) + " does not match params");
  }
  return curve_eval(p, pixels);
}

inline Var mono_penalty(const CurveVars& p, const MonoConfig& cfg) {
  const auto t = cfg.points();
  const std::size_t m = t.size();
  const std::size_t curves = p.batch * p.channels;
  auto per_curve = [&](const Var& v) { return reshape(v, Shape{p.batch, p.channels, 1}); };
  CurveVars q{per_curve(p.a), per_curve(p.b), per_curve(p.d), per_curve(p.e), p.batch, p.channels};
  const Var f = reshape(curve_eval(q, Var(Tensor(Shape{m}, t))), Shape{curves, m});
  // Column j of the difference matrix picks f(t_{j+1}) - f(t_j).
  Tensor diff(Shape{m, m - 1}, 0.0);
  for (std::size_t j = 0; j + 1 < m; ++j) {
    diff[j * (m - 1) + j] = -1.0;
    diff[(j + 1) * (m - 1) + j] = 1.0;
  }
  const Var steps = matmul(f, Var(std::move(diff)));
  return mean(max0(-steps));
}

}  // namespace gcart
