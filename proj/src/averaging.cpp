// Copyright 2026 The SQWA Lab Authors
// Licensed under the Apache License, Version 2.0

#include "sqwa/averaging.hpp"

#include <algorithm>
#include <cmath>

#include "sqwa/error.hpp"

namespace sqwa {
namespace {

AveragedModel average_selected(const CaptureBank& bank,
                               const std::vector<const CaptureEntry*>& chosen) {
  require(!chosen.empty(), ErrorCode::kInvalidArgument, "no captures selected for averaging");
  const auto& configs = bank.configs();
  const int n = static_cast<int>(chosen.size());
  const Network& first = chosen.front()->model.net;

  AveragedModel avg;
  avg.count = n;
  avg.base_configs = configs;
  avg.effective_bits = effective_bits(n, configs.front().bits);
  for (const CaptureEntry* e : chosen) avg.epochs.push_back(e->epoch);

  avg.level_sums.resize(first.num_params());
  for (std::size_t p = 0; p < first.num_params(); ++p) {
    auto& sums = avg.level_sums[p];
    sums.assign(first.weights[p].size(), 0);
    for (const CaptureEntry* e : chosen) {
      const Tensor& w = e->model.net.weights[p];
      for (std::size_t i = 0; i < w.size(); ++i)
        sums[i] += static_cast<std::int64_t>(std::llround(w[i] / configs[p].step));
    }
  }

  // Biases are full precision; summing sorted values keeps the mean
  // independent of capture order.
  Network bias_mean = first;
  std::vector<double> column(chosen.size());
  for (std::size_t p = 0; p < first.num_params(); ++p) {
    if (!bias_mean.biases[p]) continue;
    Tensor& b = *bias_mean.biases[p];
    for (std::size_t i = 0; i < b.size(); ++i) {
      for (std::size_t k = 0; k < chosen.size(); ++k) column[k] = (*chosen[k]->model.net.biases[p])[i];
      std::sort(column.begin(), column.end());
      double acc = 0.0;
      for (double v : column) acc += v;
      b[i] = acc / n;
    }
  }
  avg.net = reconstruct_averaged(bias_mean, avg.level_sums, configs, n);
  return avg;
}

}  // namespace

void CaptureBank::add(CaptureEntry entry) {
  entry.model.validate();
  if (configs_.empty() && entries_.empty()) configs_ = entry.model.configs;
  require(entry.model.configs == configs_, ErrorCode::kInvalidArgument,
          "capture at epoch " + std::to_string(entry.epoch) +
              " uses a different quantization grid than the bank");
  if (!entries_.empty()) {
    const Network& ref = entries_.front().model.net;
    require(entry.model.net.arch == ref.arch, ErrorCode::kShapeMismatch,
            "capture at epoch " + std::to_string(entry.epoch) + " has a different topology");
    require(entry.epoch > entries_.back().epoch, ErrorCode::kInvalidArgument,
            "captures must be added in increasing epoch order");
  }
  entries_.push_back(std::move(entry));
}

std::int64_t averaged_level_count(int n, int base_bits) {
  require(n >= 1, ErrorCode::kInvalidArgument, "need at least one model to average");
  if (base_bits == 1) return static_cast<std::int64_t>(n) + 1;
  return static_cast<std::int64_t>(n) * (levels_count(base_bits) - 1) + 1;
}

int effective_bits(int n, int base_bits) {
  const std::int64_t needed = averaged_level_count(n, base_bits);
  if (base_bits == 1 && n == 1) return 1;
  int bits = 2;
  while (((std::int64_t{1} << bits) - 1) < needed) ++bits;
  return bits;
}

double averaged_value(std::int64_t level_sum, double step, int count) {
  return static_cast<double>(level_sum) * step / static_cast<double>(count);
}

Network reconstruct_averaged(const Network& biases_source,
                             const std::vector<std::vector<std::int64_t>>& level_sums,
                             const std::vector<QuantizerConfig>& base_configs, int count) {
  require(level_sums.size() == biases_source.num_params() &&
              base_configs.size() == biases_source.num_params(),
          ErrorCode::kShapeMismatch, "level sums do not match the network");
  Network net = biases_source;
  for (std::size_t p = 0; p < net.num_params(); ++p) {
    Tensor& w = net.weights[p];
    require(level_sums[p].size() == w.size(), ErrorCode::kShapeMismatch,
            "level sums for layer " + std::to_string(p) + " have the wrong length");
    for (std::size_t i = 0; i < w.size(); ++i)
      w[i] = averaged_value(level_sums[p][i], base_configs[p].step, count);
  }
  return net;
}

AveragedModel average_models(const CaptureBank& bank, int last_n) {
  require(!bank.empty(), ErrorCode::kInvalidArgument, "capture bank is empty");
  require(last_n >= 1 && static_cast<std::size_t>(last_n) <= bank.size(),
          ErrorCode::kInvalidArgument,
          "cannot average the last " + std::to_string(last_n) + " of " +
              std::to_string(bank.size()) + " captures");
  std::vector<const CaptureEntry*> chosen;
  for (std::size_t i = bank.size() - static_cast<std::size_t>(last_n); i < bank.size(); ++i)
    chosen.push_back(&bank.entries()[i]);
  return average_selected(bank, chosen);
}

AveragedModel average_epoch_range(const CaptureBank& bank, int first_epoch, int last_epoch) {
  require(!bank.empty(), ErrorCode::kInvalidArgument, "capture bank is empty");
  std::vector<const CaptureEntry*> chosen;
  for (const CaptureEntry& e : bank.entries())
    if (e.epoch >= first_epoch && e.epoch <= last_epoch) chosen.push_back(&e);
  require(!chosen.empty(), ErrorCode::kInvalidArgument,
          "no captures between epochs " + std::to_string(first_epoch) + " and " +
              std::to_string(last_epoch));
  return average_selected(bank, chosen);
}

QuantizedModel requantize_averaged(const AveragedModel& avg, int target_bits) {
  return direct_quantize_model(avg.net, target_bits);
}

QuantizedModel requantize_averaged(const AveragedModel& avg,
                                   const std::vector<QuantizerConfig>& configs) {
  return quantize_model(avg.net, configs);
}

}  // namespace sqwa
