// Copyright 2026 The SQWA Lab Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sqwa/network.hpp"
#include "sqwa/tensor.hpp"

namespace sqwa {

/// Number of representable values of a symmetric b-bit uniform quantizer:
/// 2^b - 1 for b >= 2, and 2 for the binary {-step, +step} case.
int levels_count(int bits);

struct QuantizerConfig {
  int bits = 2;
  double step = 1.0;

  int levels() const { return levels_count(bits); }
  /// Largest integer level magnitude: (M - 1) / 2, or 1 when binary.
  int max_level() const;
  double max_value() const { return step * max_level(); }
  bool binary() const noexcept { return bits == 1; }
  void validate() const;

  friend bool operator==(const QuantizerConfig&, const QuantizerConfig&) = default;
};

/// Integer grid index of Q(w): sign(w) * min(floor(|w|/step + 0.5), max_level)
/// for b >= 2, sign(w) for binary with sign(0) = +1.
int quantize_level(double w, const QuantizerConfig& cfg);
inline double quantize_value(double w, const QuantizerConfig& cfg) {
  return quantize_level(w, cfg) * cfg.step;
}

Tensor quantize_tensor(const Tensor& w, const QuantizerConfig& cfg);
std::vector<int> quantize_levels(const Tensor& w, const QuantizerConfig& cfg);
/// Q(w) - w, the quantization noise.
Tensor quantization_error(const Tensor& w, const QuantizerConfig& cfg);
double quantization_mse(std::span<const double> w, const QuantizerConfig& cfg);

/// True when every value is level * step for an admissible integer level.
bool on_grid(const Tensor& w, const QuantizerConfig& cfg, double tolerance = 1e-12);

/// MSE-minimizing step for a b-bit quantizer, searched over
/// (0, 2 * max|w| / (M - 1)]: a 64-point scan brackets the global basin, then
/// golden-section refinement (60 iterations, width tolerance 1e-6 * max|w|).
/// The upper bound itself is also a candidate, which makes exactly
/// representable inputs come out exact.
double select_step_size(const Tensor& w, int bits);

/// Weights constrained to per-layer grids; biases stay full precision.
struct QuantizedModel {
  Network net;
  std::vector<QuantizerConfig> configs;  // one per parameterized layer

  std::vector<double> steps() const;
  int bits() const;
  /// Throws unless every weight is on its layer's grid.
  void validate() const;

  friend bool operator==(const QuantizedModel&, const QuantizedModel&) = default;
};

/// Quantizes weights with the given (frozen) per-layer configs.
QuantizedModel quantize_model(const Network& net, const std::vector<QuantizerConfig>& configs);

/// Selects a step per layer with select_step_size and quantizes.
QuantizedModel direct_quantize_model(const Network& net, int bits);

}  // namespace sqwa
