#pragma once

// Illumination corruptions (brightness, contrast, darken) at severities 1-5,
// plus the training-time augmentation: multiplicative brightness jitter,
// zero-padded random crop, horizontal flip.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "gcart/image.hpp"
#include "gcart/random.hpp"

namespace gcart {

enum class Corruption { brightness, contrast, darken };

inline constexpr std::array<Corruption, 3> kCorruptions{Corruption::brightness, Corruption::contrast,
                                                        Corruption::darken};

inline constexpr std::array<double, 5> kBrightnessShift{0.1, 0.2, 0.3, 0.4, 0.5};
inline constexpr std::array<double, 5> kContrastScale{0.4, 0.3, 0.2, 0.1, 0.05};
inline constexpr std::array<double, 5> kDarkenScale{0.8, 0.6, 0.4, 0.25, 0.1};

inline std::string_view to_string(Corruption c) {
  switch (c) {
    case Corruption::brightness: return "brightness";
    case Corruption::contrast: return "contrast";
    case Corruption::darken: return "darken";
  }
  return "?";
}

inline Corruption parse_corruption(std::string_view name) {
  for (Corruption c : kCorruptions) {
    if (to_string(c) == name) return c;
  }
  throw std::invalid_argument("unknown corruption '" + std::string(name) + "'");
}

struct CorruptionSpec {
  Corruption kind = Corruption::brightness;
  int severity = 1;

  void validate() const {
    if (severity < 1 || severity > 5) throw std::invalid_argument("corruption severity must be in 1..5");
  }

  double strength() const {
    validate();
    const auto i = static_cast<std::size_t>(severity - 1);
    switch (kind) {
      case Corruption::brightness: return kBrightnessShift[i];
      case Corruption::contrast: return kContrastScale[i];
      case Corruption::darken: return kDarkenScale[i];
    }
    return 0.0;
  }
};

struct Hsv {
  double h = 0.0;  // sextant units in [0, 6)
  double s = 0.0;
  double v = 0.0;
};

// Hexcone model: V = max, S = (max - min) / max.
inline Hsv rgb_to_hsv(double r, double g, double b) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double delta = mx - mn;
  Hsv out;
  out.v = mx;
  out.s = mx > 0.0 ? delta / mx : 0.0;
  if (delta > 0.0) {
    double h;
    if (mx == r) {
      h = (g - b) / delta;
      if (h < 0.0) h += 6.0;
    } else if (mx == g) {
      h = (b - r) / delta + 2.0;
    } else {
      h = (r - g) / delta + 4.0;
    }
    out.h = h >= 6.0 ? h - 6.0 : h;
  }
  return out;
}

inline std::array<double, 3> hsv_to_rgb(const Hsv& hsv) {
  const double v = hsv.v;
  if (hsv.s <= 0.0) return {v, v, v};
  const double i = std::floor(hsv.h);
  const double f = hsv.h - i;
  const double p = v * (1.0 - hsv.s);
  const double q = v * (1.0 - hsv.s * f);
  const double t = v * (1.0 - hsv.s * (1.0 - f));
  switch (static_cast<int>(i) % 6) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

inline Image corrupt_brightness(const Image& image, double shift) {
  if (image.channels != 3) throw std::invalid_argument("corrupt_brightness: needs an RGB image");
  Image out = image;
  for (std::size_t p = 0; p < image.pixel_count(); ++p) {
    double* px = &out.pixels[p * 3];
    Hsv hsv = rgb_to_hsv(px[0], px[1], px[2]);
    hsv.v = std::min(1.0, hsv.v + shift);
    const auto rgb = hsv_to_rgb(hsv);
    for (std::size_t c = 0; c < 3; ++c) px[c] = std::clamp(rgb[c], 0.0, 1.0);
  }
  return out;
}

// Pulls each channel toward its spatial mean: mean + s * (x - mean), written
// as x + (s - 1) * (x - mean) so s = 1 and constant channels come back exact.
inline Image corrupt_contrast(const Image& image, double scale) {
  if (!(scale > 0.0 && scale <= 1.0)) throw std::invalid_argument("corrupt_contrast: scale must be in (0, 1]");
  Image out = image;
  const std::size_t n = image.pixel_count();
  if (n == 0) return out;
  for (std::size_t c = 0; c < image.channels; ++c) {
    const double first = image.pixels[c];
    double dev = 0.0;
    for (std::size_t p = 0; p < n; ++p) dev += image.pixels[p * image.channels + c] - first;
    const double mean = first + dev / static_cast<double>(n);
    for (std::size_t p = 0; p < n; ++p) {
      double& x = out.pixels[p * image.channels + c];
      x += (scale - 1.0) * (x - mean);
    }
  }
  return out;
}

inline Image corrupt_darken(const Image& image, double factor) {
  if (!(factor > 0.0 && factor <= 1.0)) throw std::invalid_argument("corrupt_darken: factor must be in (0, 1]");
  Image out = image;
  for (double& v : out.pixels) v *= factor;
  return out;
}

inline Image corrupt(const Image& image, const CorruptionSpec& spec) {
  const double s = spec.strength();
  switch (spec.kind) {
    case Corruption::brightness: return corrupt_brightness(image, s);
    case Corruption::contrast: return corrupt_contrast(image, s);
    case Corruption::darken: return corrupt_darken(image, s);
  }
  return image;
}

struct AugmentSpec {
  double jitter_lo = 0.5;
  double jitter_hi = 1.0;
  std::size_t crop_padding = 4;
  double hflip_prob = 0.5;
};

// One realization of the random augmentation.
struct AugmentDraw {
  double scale = 1.0;
  std::size_t offset_y = 0;  // crop window origin in the padded image
  std::size_t offset_x = 0;
  bool flip = false;
};

inline AugmentDraw draw_augment(const AugmentSpec& spec, Rng& rng) {
  AugmentDraw d;
  d.scale = rng.uniform(spec.jitter_lo, spec.jitter_hi);
  d.offset_y = static_cast<std::size_t>(rng.below(2 * spec.crop_padding + 1));
  d.offset_x = static_cast<std::size_t>(rng.below(2 * spec.crop_padding + 1));
  d.flip = rng.bernoulli(spec.hflip_prob);
  return d;
}

// jitter -> zero-padded crop -> flip
inline Image augment(const Image& image, const AugmentSpec& spec, const AugmentDraw& d) {
  const std::size_t pad = spec.crop_padding;
  if (d.offset_y > 2 * pad || d.offset_x > 2 * pad) throw std::invalid_argument("augment: crop offset out of range");
  Image out(image.height, image.width, image.channels, 0.0);
  for (std::size_t y = 0; y < image.height; ++y) {
    const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + d.offset_y) - static_cast<std::ptrdiff_t>(pad);
    if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(image.height)) continue;
    for (std::size_t x = 0; x < image.width; ++x) {
      const std::size_t dst_x = d.flip ? image.width - 1 - x : x;
      const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x + d.offset_x) - static_cast<std::ptrdiff_t>(pad);
      if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(image.width)) continue;
      for (std::size_t c = 0; c < image.channels; ++c) {
        out.at(y, dst_x, c) = d.scale * image.at(static_cast<std::size_t>(sy), static_cast<std::size_t>(sx), c);
      }
    }
  }
  return out;
}

inline Image augment(const Image& image, const AugmentSpec& spec, Rng& rng) {
  return augment(image, spec, draw_augment(spec, rng));
}

}  // namespace gcart
