// Copyright 2026 The SQWA Lab Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "sqwa/averaging.hpp"
#include "sqwa/data.hpp"
#include "sqwa/network.hpp"
#include "sqwa/quantizer.hpp"
#include "sqwa/schedule.hpp"

namespace sqwa {

/// Full-precision weights that receive the updates, paired with their
/// quantized image on frozen per-layer grids that the forward and backward
/// passes use. applied() == quantize(shadow()) holds after every mutation.
class ShadowModel {
 public:
  ShadowModel(Network shadow, std::vector<QuantizerConfig> configs);

  /// Steps are selected on `trained` and frozen.
  static ShadowModel from_direct_quantization(const Network& trained, int bits);

  const Network& shadow() const noexcept { return shadow_; }
  const QuantizedModel& applied() const noexcept { return applied_; }
  const std::vector<QuantizerConfig>& configs() const noexcept { return applied_.configs; }

  void set_shadow(Network shadow);

 private:
  friend double qat_train_step(ShadowModel&, const Batch&, double, OptimizerState&);

  void requantize();

  Network shadow_;
  QuantizedModel applied_;
};

struct TrainOptions {
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  double momentum = 0.9;
  double l2_scale = 0.0;
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double mean_batch_loss = 0.0;
  Metrics train;
  std::optional<Metrics> test;
};

/// One full-precision mini-batch step; returns the batch loss.
double train_step(Network& net, const Batch& batch, double lr, OptimizerState& opt);

/// Full-precision training under a step-decay program.
struct PretrainResult {
  Network net;
  std::vector<EpochRecord> history;
};
PretrainResult pretrain(Network net, const Dataset& train, const StepDecaySchedule& schedule,
                        const TrainOptions& options, const Dataset* test = nullptr);

/// Forward/backward at the applied (quantized) weights, momentum SGD on the
/// shadow weights, then re-quantization onto the frozen grid. Returns the
/// batch loss.
double qat_train_step(ShadowModel& model, const Batch& batch, double lr, OptimizerState& opt);

struct RetrainResult {
  ShadowModel model;
  CaptureBank bank;
  std::vector<EpochRecord> history;
};

/// Quantized retraining over total_epochs(schedule) epochs; for cyclical
/// schedules the applied model is captured at the end of every capture
/// epoch. At a capture the shadow is rounded to binary32 (checkpoint
/// precision) and re-quantized so the entry and its recorded shadow persist
/// exactly. Momentum buffers persist across cycles.
RetrainResult retrain(ShadowModel model, const Dataset& train, const ScheduleSpec& schedule,
                      const TrainOptions& options, const Dataset* test = nullptr);

/// initial_lr * decay^e for e in [0, epochs).
std::vector<double> finetune_learning_rates(double initial_lr, int epochs, double decay);

/// Low-learning-rate quantized fine-tuning with per-epoch decay and no L2.
/// Starts from fresh momentum buffers.
ShadowModel finetune(ShadowModel model, const Dataset& train, double initial_lr, int epochs,
                     double decay, const TrainOptions& options);

}  // namespace sqwa
