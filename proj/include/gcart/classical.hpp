#pragma once

// Fixed pre-processors: gamma correction, histogram equalization and CLAHE.
// HE and CLAHE work per channel on 256 quantized levels.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "gcart/image.hpp"

namespace gcart {

inline constexpr std::size_t kLevels = 256;

inline int quantize_level(double x) {
  return static_cast<int>(std::round(255.0 * std::clamp(x, 0.0, 1.0)));
}

inline Image gamma_correct(const Image& image, double g) {
  if (!(g > 0.0)) throw std::invalid_argument("gamma_correct: exponent must be > 0");
  Image out = image;
  for (double& v : out.pixels) v = std::pow(v, g);
  return out;
}

namespace detail {

using LevelHistogram = std::array<std::uint64_t, kLevels>;

// Level lookup from a histogram holding `total` samples. Empty when only one
// level is occupied (identity case). Levels below the first occupied one map
// to 0.
inline std::vector<double> equalization_map(const LevelHistogram& hist, std::uint64_t total) {
  std::uint64_t cdf_min = 0;
  for (std::uint64_t c : hist) {
    if (c != 0) {
      cdf_min = c;
      break;
    }
  }
  if (cdf_min == total) return {};
  std::vector<double> map(kLevels);
  std::uint64_t cdf = 0;
  const double span = static_cast<double>(total - cdf_min);
  for (std::size_t v = 0; v < kLevels; ++v) {
    cdf += hist[v];
    const double num = cdf >= cdf_min ? static_cast<double>(cdf - cdf_min) : 0.0;
    map[v] = std::round(255.0 * num / span);
  }
  return map;
}

}  // namespace detail

inline Image hist_equalize(const Image& image) {
  Image out = image;
  const std::size_t n = image.pixel_count();
  if (n == 0) return out;
  std::vector<int> level(n);
  for (std::size_t c = 0; c < image.channels; ++c) {
    detail::LevelHistogram hist{};
    for (std::size_t p = 0; p < n; ++p) {
      level[p] = quantize_level(image.pixels[p * image.channels + c]);
      ++hist[level[p]];
    }
    const auto map = detail::equalization_map(hist, n);
    if (map.empty()) continue;
    for (std::size_t p = 0; p < n; ++p) out.pixels[p * image.channels + c] = map[level[p]] / 255.0;
  }
  return out;
}

struct ClaheConfig {
  std::size_t tiles = 4;
  double clip = 2.0;

  void validate() const {
    if (tiles < 1) throw std::invalid_argument("clahe: tiles must be >= 1");
    if (!(clip >= 1.0)) throw std::invalid_argument("clahe: clip must be >= 1");
  }
};

namespace detail {

// Clip at limit and hand the excess back uniformly; the remainder of the
// integer division goes one each to the lowest bins.
inline void clip_histogram(LevelHistogram& hist, std::uint64_t tile_pixels, double clip) {
  const double raw_limit = clip * static_cast<double>(tile_pixels) / static_cast<double>(kLevels);
  if (raw_limit >= static_cast<double>(tile_pixels)) return;
  const auto limit = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(raw_limit));
  std::uint64_t excess = 0;
  for (auto& c : hist) {
    if (c > limit) {
      excess += c - limit;
      c = limit;
    }
  }
  const std::uint64_t share = excess / kLevels;
  const std::uint64_t rest = excess % kLevels;
  for (std::size_t v = 0; v < kLevels; ++v) hist[v] += share + (v < rest ? 1 : 0);
}

struct TileGrid {
  std::size_t size = 0;   // nominal tile extent (ceil division)
  std::size_t count = 0;  // tiles actually covering the axis

  TileGrid(std::size_t extent, std::size_t tiles) {
    size = (extent + tiles - 1) / tiles;
    count = (extent + size - 1) / size;
  }

  std::size_t begin(std::size_t t) const { return t * size; }
  std::size_t end(std::size_t t, std::size_t extent) const { return std::min(extent, (t + 1) * size); }

  // Neighbouring tile centers and interpolation weight toward the second.
  void locate(std::size_t pos, std::size_t extent, std::size_t& t0, std::size_t& t1, double& w) const {
    auto center = [&](std::size_t t) { return 0.5 * static_cast<double>(begin(t) + end(t, extent)) - 0.5; };
    const double p = static_cast<double>(pos);
    if (p <= center(0)) {
      t0 = t1 = 0;
      w = 0.0;
      return;
    }
    if (p >= center(count - 1)) {
      t0 = t1 = count - 1;
      w = 0.0;
      return;
    }
    t0 = 0;
    while (t0 + 1 < count && center(t0 + 1) <= p) ++t0;
    t1 = t0 + 1;
    w = (p - center(t0)) / (center(t1) - center(t0));
  }
};

inline double lerp(double a, double b, double t) { return a + t * (b - a); }

}  // namespace detail

inline Image clahe(const Image& image, const ClaheConfig& cfg = {}) {
  cfg.validate();
  Image out = image;
  if (image.pixel_count() == 0) return out;
  const detail::TileGrid gy(image.height, cfg.tiles);
  const detail::TileGrid gx(image.width, cfg.tiles);

  for (std::size_t c = 0; c < image.channels; ++c) {
    auto level = [&](std::size_t y, std::size_t x) { return quantize_level(image.at(y, x, c)); };
    // Per-tile lookup; identity (the tile's own level) for single-level tiles.
    std::vector<std::vector<double>> maps(gy.count * gx.count);
    for (std::size_t ty = 0; ty < gy.count; ++ty) {
      for (std::size_t tx = 0; tx < gx.count; ++tx) {
        detail::LevelHistogram hist{};
        std::uint64_t n = 0;
        for (std::size_t y = gy.begin(ty); y < gy.end(ty, image.height); ++y) {
          for (std::size_t x = gx.begin(tx); x < gx.end(tx, image.width); ++x) {
            ++hist[level(y, x)];
            ++n;
          }
        }
        detail::clip_histogram(hist, n, cfg.clip);
        auto map = detail::equalization_map(hist, n);
        if (map.empty()) {
          map.resize(kLevels);
          for (std::size_t v = 0; v < kLevels; ++v) map[v] = static_cast<double>(v);
        }
        maps[ty * gx.count + tx] = std::move(map);
      }
    }

    // A channel that is a single level overall stays unchanged.
    bool single = true;
    const int first = level(0, 0);
    for (std::size_t y = 0; y < image.height && single; ++y)
      for (std::size_t x = 0; x < image.width && single; ++x) single = level(y, x) == first;
    if (single) continue;

    for (std::size_t y = 0; y < image.height; ++y) {
      std::size_t y0, y1;
      double wy;
      gy.locate(y, image.height, y0, y1, wy);
      for (std::size_t x = 0; x < image.width; ++x) {
        std::size_t x0, x1;
        double wx;
        gx.locate(x, image.width, x0, x1, wx);
        const int v = level(y, x);
        const double top = detail::lerp(maps[y0 * gx.count + x0][v], maps[y0 * gx.count + x1][v], wx);
        const double bottom = detail::lerp(maps[y1 * gx.count + x0][v], maps[y1 * gx.count + x1][v], wx);
        out.at(y, x, c) = std::round(detail::lerp(top, bottom, wy)) / 255.0;
      }
    }
  }
  return out;
}

}  // namespace gcart
