// Copyright 2026 The SQWA Lab Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "sqwa/network.hpp"
#include "sqwa/quantizer.hpp"

namespace sqwa {

struct CaptureEntry {
  int epoch = 0;
  QuantizedModel model;
  Metrics train;
  std::optional<Metrics> test;
  // Full-precision weights the capture was quantized from, when recorded.
  std::optional<Network> shadow;
};

/// Captured quantized models that share one frozen per-layer grid, ordered
/// by capture epoch.
class CaptureBank {
 public:
  CaptureBank() = default;
  explicit CaptureBank(std::vector<QuantizerConfig> configs) : configs_(std::move(configs)) {}

  /// Rejects entries whose shapes or grids differ from the bank's, or whose
  /// epoch does not come after the last entry.
  void add(CaptureEntry entry);

  const std::vector<CaptureEntry>& entries() const noexcept { return entries_; }
  const std::vector<QuantizerConfig>& configs() const noexcept { return configs_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

 private:
  std::vector<QuantizerConfig> configs_;
  std::vector<CaptureEntry> entries_;
};

/// Number of grid levels spanned by the mean of n models quantized with
/// base_bits: n * (M - 1) + 1, i.e. 2n + 1 for ternary.
std::int64_t averaged_level_count(int n, int base_bits = 2);

/// Smallest b' with 2^b' - 1 >= averaged_level_count(n, base_bits).
int effective_bits(int n, int base_bits = 2);

struct AveragedModel {
  Network net;  // weights = base_step * level_sum / count; biases averaged
  std::vector<std::vector<std::int64_t>> level_sums;
  int count = 0;
  int effective_bits = 0;
  std::vector<QuantizerConfig> base_configs;
  std::vector<int> epochs;  // epochs of the averaged captures
};

/// weight value for a summed integer level: step * level_sum / count.
double averaged_value(std::int64_t level_sum, double step, int count);

/// Elementwise mean of the last_n most recent captures.
AveragedModel average_models(const CaptureBank& bank, int last_n);
/// Elementwise mean of every capture with first_epoch <= epoch <= last_epoch.
AveragedModel average_epoch_range(const CaptureBank& bank, int first_epoch, int last_epoch);

/// Rebuilds the averaged network from integer level sums.
Network reconstruct_averaged(const Network& biases_source,
                             const std::vector<std::vector<std::int64_t>>& level_sums,
                             const std::vector<QuantizerConfig>& base_configs, int count);

/// Re-quantizes with a freshly selected MSE-optimal step per layer.
QuantizedModel requantize_averaged(const AveragedModel& avg, int target_bits);
/// Re-quantizes onto caller-supplied grids.
QuantizedModel requantize_averaged(const AveragedModel& avg,
                                   const std::vector<QuantizerConfig>& configs);

}  // namespace sqwa
