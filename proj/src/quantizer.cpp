// Copyright 2026 The SQWA Lab Authors
// Licensed under the Apache License, Version 2.0

#include "sqwa/quantizer.hpp"

#include <algorithm>
#include <cmath>

#include "sqwa/error.hpp"

namespace sqwa {
namespace {

constexpr int kMaxBits = 24;
constexpr int kScanPoints = 64;
constexpr int kGoldenIterations = 60;

}  // namespace

int levels_count(int bits) {
  require(bits >= 1 && bits <= kMaxBits, ErrorCode::kInvalidArgument,
          "bit width must lie in [1, " + std::to_string(kMaxBits) + "], got " +
              std::to_string(bits));
  return bits == 1 ? 2 : (1 << bits) - 1;
}

int QuantizerConfig::max_level() const {
  return bits == 1 ? 1 : (levels_count(bits) - 1) / 2;
}

void QuantizerConfig::validate() const {
  levels_count(bits);
  require(step > 0.0 && std::isfinite(step), ErrorCode::kInvalidArgument,
          "quantizer step must be positive and finite");
}

int quantize_level(double w, const QuantizerConfig& cfg) {
  if (cfg.bits == 1) return std::signbit(w) && w != 0.0 ? -1 : 1;
  const double magnitude =
      std::min(std::floor(std::abs(w) / cfg.step + 0.5), static_cast<double>(cfg.max_level()));
  const int level = static_cast<int>(magnitude);
  return w < 0.0 ? -level : level;
}

Tensor quantize_tensor(const Tensor& w, const QuantizerConfig& cfg) {
  cfg.validate();
  Tensor out(w.shape());
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = quantize_value(w[i], cfg);
  return out;
}

std::vector<int> quantize_levels(const Tensor& w, const QuantizerConfig& cfg) {
  cfg.validate();
  std::vector<int> out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = quantize_level(w[i], cfg);
  return out;
}

Tensor quantization_error(const Tensor& w, const QuantizerConfig& cfg) {
  Tensor out = quantize_tensor(w, cfg);
  for (std::size_t i = 0; i < w.size(); ++i) out[i] -= w[i];
  return out;
}

double quantization_mse(std::span<const double> w, const QuantizerConfig& cfg) {
  if (w.empty()) return 0.0;
  double acc = 0.0;
  for (double v : w) {
    const double e = quantize_value(v, cfg) - v;
    acc += e * e;
  }
  return acc / static_cast<double>(w.size());
}

bool on_grid(const Tensor& w, const QuantizerConfig& cfg, double tolerance) {
  const int top = cfg.max_level();
  for (double v : w.values()) {
    const double ratio = v / cfg.step;
    const double nearest = std::round(ratio);
    if (std::abs(ratio - nearest) > tolerance) return false;
    if (std::abs(nearest) > top) return false;
    if (cfg.binary() && nearest == 0.0) return false;
  }
  return true;
}

double select_step_size(const Tensor& w, int bits) {
  const int levels = levels_count(bits);
  double max_abs = 0.0;
  for (double v : w.values()) max_abs = std::max(max_abs, std::abs(v));
  require(max_abs > 0.0, ErrorCode::kDegenerate,
          "cannot select a step size for an all-zero tensor");

  const double upper = bits == 1 ? 2.0 * max_abs : 2.0 * max_abs / (levels - 1);
  const auto mse = [&](double step) {
    return quantization_mse(w.values(), QuantizerConfig{bits, step});
  };

  int best_index = kScanPoints;
  double best_err = mse(upper);
  for (int i = 1; i < kScanPoints; ++i) {
    const double err = mse(upper * i / kScanPoints);
    if (err < best_err) {
      best_err = err;
      best_index = i;
    }
  }
  double lo = upper * (best_index - 1) / kScanPoints;
  double hi = upper * std::min(best_index + 1, kScanPoints) / kScanPoints;

  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  const double tolerance = 1e-6 * max_abs;
  double a = hi - inv_phi * (hi - lo);
  double b = lo + inv_phi * (hi - lo);
  double fa = mse(a), fb = mse(b);
  for (int it = 0; it < kGoldenIterations && hi - lo > tolerance; ++it) {
    if (fa <= fb) {
      hi = b;
      b = a;
      fb = fa;
      a = hi - inv_phi * (hi - lo);
      fa = mse(a);
    } else {
      lo = a;
      a = b;
      fa = fb;
      b = lo + inv_phi * (hi - lo);
      fb = mse(b);
    }
  }
  const double refined = fa <= fb ? a : b;
  const double refined_err = std::min(fa, fb);

  // Prefer the exact upper bound and the scan winner when they tie or win.
  double step = refined;
  double err = refined_err;
  const double scan_step = upper * best_index / kScanPoints;
  if (best_err <= err) {
    step = scan_step;
    err = best_err;
  }
  if (mse(upper) <= err) step = upper;
  return step;
}

std::vector<double> QuantizedModel::steps() const {
  std::vector<double> out;
  out.reserve(configs.size());
  for (const auto& c : configs) out.push_back(c.step);
  return out;
}

int QuantizedModel::bits() const {
  require(!configs.empty(), ErrorCode::kInvalidArgument, "quantized model has no layers");
  return configs.front().bits;
}

void QuantizedModel::validate() const {
  net.validate();
  require(configs.size() == net.num_params(), ErrorCode::kShapeMismatch,
          "quantized model has " + std::to_string(configs.size()) + " configs for " +
              std::to_string(net.num_params()) + " layers");
  for (std::size_t p = 0; p < configs.size(); ++p) {
    configs[p].validate();
    require(on_grid(net.weights[p], configs[p]), ErrorCode::kInvalidArgument,
            "layer " + std::to_string(p) + " weights are off the quantization grid");
  }
}

QuantizedModel quantize_model(const Network& net, const std::vector<QuantizerConfig>& configs) {
  require(configs.size() == net.num_params(), ErrorCode::kShapeMismatch,
          "need one quantizer config per parameterized layer");
  QuantizedModel q{net, configs};
  for (std::size_t p = 0; p < configs.size(); ++p)
    q.net.weights[p] = quantize_tensor(net.weights[p], configs[p]);
  return q;
}

QuantizedModel direct_quantize_model(const Network& net, int bits) {
  std::vector<QuantizerConfig> configs;
  configs.reserve(net.num_params());
  for (const Tensor& w : net.weights) configs.push_back({bits, select_step_size(w, bits)});
  return quantize_model(net, configs);
}

}  // namespace sqwa
