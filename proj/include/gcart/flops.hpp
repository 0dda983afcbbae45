#pragma once

// Operation-count model for the enhancer front-ends.
//
// The per-op constants are a fitted attribution that reproduces the reference
// GC-ART, HE and gamma totals at 32x32x3 at the same time. Only the totals are
// pinned; the split between terms is ours. Parameter-prediction cost does not
// depend on resolution.

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace gcart {

struct CostModel {
  std::uint64_t hist_per_pixel_bin = 5;  // subtract, square, scale, exp, accumulate
  std::uint64_t curve_per_pixel = 7;     // rational evaluation per pixel
  std::uint64_t gamma_per_pixel = 2;     // log + exp
  std::uint64_t he_per_pixel = 6;        // quantize, count, look up
  std::uint64_t he_per_channel = 256;    // CDF over the levels
  std::uint64_t bins = 16;
  std::uint64_t hyper_hidden = 32;
  std::uint64_t hyper_outputs = 3;

  // Multiply-accumulates of the hypernet per channel (biases excluded).
  std::uint64_t hyper_macs() const { return bins * hyper_hidden + hyper_hidden * hyper_outputs; }
  std::uint64_t hyper_params() const {
    return bins * hyper_hidden + hyper_hidden + hyper_hidden * hyper_outputs + hyper_outputs;
  }
};

// Reference totals of the convolutional enhancers at 32x32, for display only.
inline constexpr std::uint64_t kZeroDceReferenceFlops = 11'252'736;
inline constexpr std::uint64_t kZeroDcePlusReferenceFlops = 1'908'736;

struct FlopsReport {
  std::string module;
  std::uint64_t params = 0;
  std::uint64_t param_prediction_flops = 0;
  std::uint64_t pixel_flops = 0;
  std::uint64_t total = 0;
  std::vector<std::pair<std::string, std::uint64_t>> breakdown;
  CostModel cost;
};

inline FlopsReport count_flops(const std::string& module, std::size_t height, std::size_t width,
                               std::size_t channels = 3, const CostModel& cost = {}) {
  if (height < 1 || width < 1) throw std::invalid_argument("count_flops: H and W must be >= 1");
  if (channels != 3) throw std::invalid_argument("count_flops: C must be 3");
  const std::uint64_t values = static_cast<std::uint64_t>(height) * width * channels;
  FlopsReport r;
  r.module = module;
  r.cost = cost;
  if (module == "gcart") {
    r.params = cost.hyper_params();
    const std::uint64_t hist = cost.bins * values * cost.hist_per_pixel_bin;
    const std::uint64_t hyper = cost.hyper_macs() * channels;
    const std::uint64_t curve = values * cost.curve_per_pixel;
    r.param_prediction_flops = hyper;
    r.pixel_flops = hist + curve;
    r.breakdown = {{"soft_histogram", hist}, {"hypernet_macs", hyper}, {"curve_apply", curve}};
  } else if (module == "gamma") {
    r.pixel_flops = values * cost.gamma_per_pixel;
    r.breakdown = {{"pow", r.pixel_flops}};
  } else if (module == "he") {
    const std::uint64_t lut = cost.he_per_channel * channels;
    r.param_prediction_flops = lut;
    r.pixel_flops = values * cost.he_per_pixel;
    r.breakdown = {{"quantize_count_lookup", r.pixel_flops}, {"cdf", lut}};
  } else {
    throw std::invalid_argument("count_flops: unknown module '" + module + "' (gcart|he|gamma)");
  }
  r.total = r.param_prediction_flops + r.pixel_flops;
  return r;
}

inline nlohmann::json to_json(const FlopsReport& r) {
  nlohmann::json breakdown = nlohmann::json::object();
  for (const auto& [name, n] : r.breakdown) breakdown[name] = n;
  return {{"module", r.module},
          {"params", r.params},
          {"param_prediction_flops", r.param_prediction_flops},
          {"pixel_flops", r.pixel_flops},
          {"total", r.total},
          {"breakdown", breakdown},
          {"cost_model",
           {{"hist_per_pixel_bin", r.cost.hist_per_pixel_bin},
            {"curve_per_pixel", r.cost.curve_per_pixel},
            {"gamma_per_pixel", r.cost.gamma_per_pixel},
            {"he_per_pixel", r.cost.he_per_pixel},
            {"he_per_channel", r.cost.he_per_channel},
            {"hyper_macs_per_channel", r.cost.hyper_macs()}}},
          {"reference",
           {{"zero_dce_32", kZeroDceReferenceFlops}, {"zero_dce_plus_32", kZeroDcePlusReferenceFlops}}}};
}

}  // namespace gcart
