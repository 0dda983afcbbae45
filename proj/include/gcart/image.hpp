#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gcart/diffengine.hpp"

namespace gcart {

// H x W x C intensities, channel-last, row-major.
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(std::size_t h, std::size_t w, std::size_t c, double fill = 0.0)
      : height(h), width(w), channels(c), pixels(h * w * c, fill) {}

  std::size_t pixel_count() const { return height * width; }
  std::size_t size() const { return pixels.size(); }
  bool empty() const { return pixels.empty(); }

  double& at(std::size_t y, std::size_t x, std::size_t c) { return pixels[(y * width + x) * channels + c]; }
  double at(std::size_t y, std::size_t x, std::size_t c) const { return pixels[(y * width + x) * channels + c]; }

  bool same_dims(const Image& o) const { return height == o.height && width == o.width && channels == o.channels; }

  friend bool operator==(const Image&, const Image&) = default;
};

// Stacks same-sized images into a [B, H*W, C] tensor.
inline Tensor stack_pixels(std::span<const Image> images) {
  if (images.empty()) throw std::invalid_argument("stack_pixels: empty batch");
  const Image& first = images.front();
  Tensor out(Shape{images.size(), first.pixel_count(), first.channels});
  std::size_t off = 0;
  for (const Image& img : images) {
    if (!img.same_dims(first)) throw std::invalid_argument("stack_pixels: images differ in size");
    std::copy(img.pixels.begin(), img.pixels.end(), out.data().begin() + static_cast<std::ptrdiff_t>(off));
    off += img.size();
  }
  return out;
}

// Inverse of stack_pixels for one batch entry.
inline Image unstack_pixels(const Tensor& batch, std::size_t index, std::size_t height, std::size_t width) {
  if (batch.rank() != 3 || batch.shape()[1] != height * width || index >= batch.shape()[0]) {
    throw std::invalid_argument("unstack_pixels: bad batch shape " + shape_str(batch.shape()));
  }
  Image img(height, width, batch.shape()[2]);
  const std::size_t n = img.size();
  std::copy_n(batch.data().begin() + static_cast<std::ptrdiff_t>(index * n), n, img.pixels.begin());
  return img;
}

}  // namespace gcart
