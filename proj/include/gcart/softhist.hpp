#pragma once

// Per-channel Gaussian-RBF soft histogram:
//
//   h[c][i] = 1/(H*W) * sum_{u,v} exp(-(X[u,v,c] - c_i)^2 / gamma)
//
// with K endpoint-inclusive centers c_i = i/(K-1). Terms are accumulated in
// ascending order of pixel value, so the result depends only on the multiset
// of values in a channel and any spatial shuffle gives identical bits.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "gcart/diffengine.hpp"
#include "gcart/image.hpp"

namespace gcart {

struct HistogramConfig {
  std::size_t bins = 16;
  double gamma = 0.01;

  void validate() const {
    if (bins < 2) throw std::invalid_argument("soft histogram: need at least 2 bins");
    if (!(gamma > 0.0)) throw std::invalid_argument("soft histogram: gamma must be > 0");
  }

  std::vector<double> centers() const {
    validate();
    std::vector<double> c(bins);
    for (std::size_t i = 0; i < bins; ++i) c[i] = static_cast<double>(i) / static_cast<double>(bins - 1);
    c.back() = 1.0;
    return c;
  }
};

// C x K matrix, row-major by channel.
struct SoftHistogram {
  std::size_t channels = 0;
  std::size_t bins = 0;
  std::vector<double> values;

  double at(std::size_t c, std::size_t i) const { return values[c * bins + i]; }
  std::span<const double> channel(std::size_t c) const { return {values.data() + c * bins, bins}; }
};

namespace detail {

inline double rbf(double x, double center, double gamma) {
  const double d = x - center;
  return std::exp(-(d * d) / gamma);
}

// pixels [B, P, C] -> [B, C, K]
inline Tensor soft_histogram_forward(const Tensor& pixels, const std::vector<double>& centers, double gamma) {
  const std::size_t batch = pixels.shape()[0];
  const std::size_t count = pixels.shape()[1];
  const std::size_t channels = pixels.shape()[2];
  const std::size_t bins = centers.size();
  Tensor out(Shape{batch, channels, bins}, 0.0);
  std::vector<double> sorted(count);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < channels; ++c) {
      for (std::size_t p = 0; p < count; ++p) sorted[p] = pixels[(b * count + p) * channels + c];
      std::sort(sorted.begin(), sorted.end());
      for (std::size_t i = 0; i < bins; ++i) {
        double s = 0.0;
        for (double x : sorted) s += rbf(x, centers[i], gamma);
        out[(b * channels + c) * bins + i] = s / static_cast<double>(count);
      }
    }
  }
  return out;
}

}  // namespace detail

// Differentiable soft histogram of a [B, P, C] pixel batch; returns [B, C, K].
inline Var soft_histogram(const Var& pixels, const HistogramConfig& cfg) {
  cfg.validate();
  if (pixels.value().rank() != 3) {
    throw std::invalid_argument("soft histogram: expected [B, P, C] pixels, got " + shape_str(pixels.shape()));
  }
  if (pixels.shape()[1] == 0 || pixels.shape()[2] == 0 || pixels.shape()[0] == 0) {
    throw std::invalid_argument("soft histogram: empty image");
  }
  const auto centers = cfg.centers();
  const double gamma = cfg.gamma;
  Tensor out = detail::soft_histogram_forward(pixels.value(), centers, gamma);
  auto xv = std::make_shared<const Tensor>(pixels.value());
  return record_op(std::move(out), {&pixels}, [xv, centers, gamma](const Tensor& g, const std::vector<char>&) {
    const std::size_t batch = xv->shape()[0];
    const std::size_t count = xv->shape()[1];
    const std::size_t channels = xv->shape()[2];
    const std::size_t bins = centers.size();
    Tensor gx(xv->shape(), 0.0);
    const double inv_count = 1.0 / static_cast<double>(count);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t p = 0; p < count; ++p) {
        for (std::size_t c = 0; c < channels; ++c) {
          const std::size_t at = (b * count + p) * channels + c;
          const double x = (*xv)[at];
          double s = 0.0;
          for (std::size_t i = 0; i < bins; ++i) {
            s += g[(b * channels + c) * bins + i] * (-2.0 * (x - centers[i]) / gamma) *
                 detail::rbf(x, centers[i], gamma);
          }
          gx[at] = s * inv_count;
        }
      }
    }
    return std::vector<Tensor>{std::move(gx)};
  });
}

inline SoftHistogram soft_histogram(const Image& image, const HistogramConfig& cfg = {}) {
  cfg.validate();
  if (image.empty()) throw std::invalid_argument("soft histogram: empty image");
  Tensor pixels(Shape{1, image.pixel_count(), image.channels}, image.pixels);
  Tensor h = detail::soft_histogram_forward(pixels, cfg.centers(), cfg.gamma);
  return SoftHistogram{image.channels, cfg.bins, std::vector<double>(h.data().begin(), h.data().end())};
}

}  // namespace gcart
