#pragma once

// Binary PPM (P6, maxval 255). Values are clamped to [0, 1] only here, when
// encoding to bytes.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gcart/image.hpp"

namespace gcart {

inline unsigned char encode_byte(double v) {
  return static_cast<unsigned char>(std::lround(255.0 * std::clamp(v, 0.0, 1.0)));
}

inline void write_ppm(std::ostream& out, const Image& img) {
  if (img.channels != 3) throw std::invalid_argument("ppm: need a 3-channel image");
  out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  std::vector<unsigned char> bytes(img.size());
  std::transform(img.pixels.begin(), img.pixels.end(), bytes.begin(), encode_byte);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("ppm: write failed");
}

namespace detail {

// Next header token, skipping whitespace and '#' comments.
inline std::string ppm_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  if (tok.empty()) throw std::runtime_error("ppm: truncated header");
  return tok;
}

inline std::size_t ppm_number(std::istream& in, const char* what) {
  const std::string tok = ppm_token(in);
  if (tok.empty() || !std::all_of(tok.begin(), tok.end(), [](unsigned char c) { return std::isdigit(c); })) {
    throw std::runtime_error(std::string("ppm: malformed ") + what + " '" + tok + "'");
  }
  return std::stoul(tok);
}

}  // namespace detail

inline Image read_ppm(std::istream& in) {
  if (detail::ppm_token(in) != "P6") throw std::runtime_error("ppm: not a binary P6 file");
  const std::size_t width = detail::ppm_number(in, "width");
  const std::size_t height = detail::ppm_number(in, "height");
  const std::size_t maxval = detail::ppm_number(in, "maxval");
  if (width == 0 || height == 0) throw std::runtime_error("ppm: empty image");
  if (maxval != 255) throw std::runtime_error("ppm: only maxval 255 is supported");
  Image img(height, width, 3);
  std::vector<unsigned char> bytes(img.size());
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(in.gcount()) != bytes.size()) throw std::runtime_error("ppm: truncated pixel data");
  for (std::size_t i = 0; i < bytes.size(); ++i) img.pixels[i] = bytes[i] / 255.0;
  return img;
}

inline Image read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("ppm: cannot open " + path.string());
  return read_ppm(in);
}

inline void write_ppm(const std::filesystem::path& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("ppm: cannot write " + path.string());
  write_ppm(out, img);
}

}  // namespace gcart
