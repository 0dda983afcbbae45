#pragma once

// CIFAR-10 binary format: records of 1 label byte followed by 3072 pixel
// bytes (R, G, B planes, each 32x32 row-major).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gcart/image.hpp"
#include "gcart/random.hpp"

namespace gcart {

inline constexpr std::size_t kCifarSide = 32;
inline constexpr std::size_t kCifarPlane = kCifarSide * kCifarSide;
inline constexpr std::size_t kCifarRecord = 1 + 3 * kCifarPlane;
inline constexpr int kCifarClasses = 10;

struct Dataset {
  std::vector<Image> images;
  std::vector<int> labels;

  std::size_t size() const { return images.size(); }
  bool empty() const { return images.empty(); }
};

inline Image decode_cifar_pixels(const unsigned char* bytes) {
  Image img(kCifarSide, kCifarSide, 3);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t p = 0; p < kCifarPlane; ++p) img.pixels[p * 3 + c] = bytes[c * kCifarPlane + p] / 255.0;
  return img;
}

inline void encode_cifar_record(const Image& img, int label, std::vector<unsigned char>& out) {
  if (img.height != kCifarSide || img.width != kCifarSide || img.channels != 3) {
    throw std::invalid_argument("cifar: records hold 32x32x3 images");
  }
  out.push_back(static_cast<unsigned char>(label));
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t p = 0; p < kCifarPlane; ++p)
      out.push_back(static_cast<unsigned char>(std::lround(255.0 * std::clamp(img.pixels[p * 3 + c], 0.0, 1.0))));
}

inline Dataset read_cifar_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cifar: cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() % kCifarRecord != 0) {
    const std::size_t offset = bytes.size() - bytes.size() % kCifarRecord;
    throw std::runtime_error("cifar: " + path.string() + " truncated record at byte offset " + std::to_string(offset));
  }
  Dataset ds;
  for (std::size_t off = 0; off < bytes.size(); off += kCifarRecord) {
    const int label = bytes[off];
    if (label >= kCifarClasses) {
      throw std::runtime_error("cifar: " + path.string() + " label " + std::to_string(label) + " at byte offset " +
                               std::to_string(off));
    }
    ds.labels.push_back(label);
    ds.images.push_back(decode_cifar_pixels(&bytes[off + 1]));
  }
  return ds;
}

inline void write_cifar_file(const std::filesystem::path& path, const Dataset& ds) {
  std::vector<unsigned char> bytes;
  bytes.reserve(ds.size() * kCifarRecord);
  for (std::size_t i = 0; i < ds.size(); ++i) encode_cifar_record(ds.images[i], ds.labels[i], bytes);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cifar: cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

// Seeded subsample without replacement, kept in original order.
inline Dataset subsample(const Dataset& ds, std::size_t count, std::uint64_t seed) {
  if (count >= ds.size()) return ds;
  Rng rng(seed);
  auto idx = rng.permutation(ds.size());
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  Dataset out;
  for (std::size_t i : idx) {
    out.images.push_back(ds.images[i]);
    out.labels.push_back(ds.labels[i]);
  }
  return out;
}

enum class Split { train, test };

// `path` may be a single .bin file or the extracted cifar-10-batches-bin
// directory (data_batch_1..5.bin for train, test_batch.bin for test).
inline Dataset load_cifar10(const std::filesystem::path& path, Split split = Split::train,
                            std::optional<std::size_t> subset = std::nullopt, std::uint64_t seed = 42) {
  std::vector<std::filesystem::path> files;
  if (std::filesystem::is_directory(path)) {
    if (split == Split::train) {
      for (int i = 1; i <= 5; ++i) files.push_back(path / ("data_batch_" + std::to_string(i) + ".bin"));
    } else {
      files.push_back(path / "test_batch.bin");
    }
  } else {
    files.push_back(path);
  }
  Dataset ds;
  for (const auto& f : files) {
    Dataset part = read_cifar_file(f);
    std::move(part.images.begin(), part.images.end(), std::back_inserter(ds.images));
    ds.labels.insert(ds.labels.end(), part.labels.begin(), part.labels.end());
  }
  if (subset) return subsample(ds, *subset, seed);
  return ds;
}

// Procedural stand-in with CIFAR geometry: each class is a fixed colour
// layout (two-tone split at a class-specific angle) under random exposure,
// contrast and pixel noise, quantized to bytes like real records.
inline Dataset synthetic_cifar(std::size_t count, std::uint64_t seed) {
  Dataset ds;
  Rng rng(seed);
  for (std::size_t n = 0; n < count; ++n) {
    const int label = static_cast<int>(n % kCifarClasses);
    const double angle = 3.14159265358979323846 * label / kCifarClasses;
    const double ca = std::cos(angle);
    const double sa = std::sin(angle);
    const double exposure = rng.uniform(0.6, 1.0);
    const double shift = rng.uniform(-6.0, 6.0);
    Image img(kCifarSide, kCifarSide, 3);
    for (std::size_t y = 0; y < kCifarSide; ++y) {
      for (std::size_t x = 0; x < kCifarSide; ++x) {
        const double u = (static_cast<double>(x) - 15.5) * ca + (static_cast<double>(y) - 15.5) * sa - shift;
        const bool side = u > 0.0;
        for (std::size_t c = 0; c < 3; ++c) {
          const double base = side ? 0.25 + 0.5 * ((label + static_cast<int>(c)) % 3) / 2.0
                                   : 0.75 - 0.5 * ((label * 2 + static_cast<int>(c)) % 3) / 2.0;
          const double v = exposure * base + rng.uniform(-0.08, 0.08);
          img.at(y, x, c) = std::round(255.0 * std::clamp(v, 0.0, 1.0)) / 255.0;
        }
      }
    }
    ds.images.push_back(std::move(img));
    ds.labels.push_back(label);
  }
  return ds;
}

}  // namespace gcart
