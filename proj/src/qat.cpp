// Copyright 2026 The SQWA Lab Authors
// Licensed under the Apache License, Version 2.0

#include "sqwa/qat.hpp"

#include <cmath>

#include "sqwa/error.hpp"

namespace sqwa {
namespace {

EpochRecord epoch_record(int epoch, double lr, double loss_sum, std::size_t batches,
                         const Network& net, const Dataset& train, const Dataset* test) {
  EpochRecord r;
  r.epoch = epoch;
  r.lr = lr;
  r.mean_batch_loss = loss_sum / static_cast<double>(batches);
  r.train = evaluate(net, train);
  if (test) r.test = evaluate(net, *test);
  return r;
}

}  // namespace

ShadowModel::ShadowModel(Network shadow, std::vector<QuantizerConfig> configs)
    : shadow_(std::move(shadow)) {
  shadow_.validate();
  require(configs.size() == shadow_.num_params(), ErrorCode::kShapeMismatch,
          "need one quantizer config per parameterized layer");
  for (const auto& c : configs) c.validate();
  applied_.configs = std::move(configs);
  requantize();
}

ShadowModel ShadowModel::from_direct_quantization(const Network& trained, int bits) {
  QuantizedModel q = direct_quantize_model(trained, bits);
  return ShadowModel(trained, std::move(q.configs));
}

void ShadowModel::set_shadow(Network shadow) {
  require(shadow.arch == shadow_.arch, ErrorCode::kShapeMismatch,
          "replacement shadow network has a different topology");
  shadow_ = std::move(shadow);
  requantize();
}

void ShadowModel::requantize() {
  applied_.net = shadow_;
  for (std::size_t p = 0; p < shadow_.num_params(); ++p)
    applied_.net.weights[p] = quantize_tensor(shadow_.weights[p], applied_.configs[p]);
}

double train_step(Network& net, const Batch& batch, double lr, OptimizerState& opt) {
  const ForwardResult fwd = forward(net, batch.inputs);
  const LossAndGradients lg = loss_and_backward(net, fwd.cache, fwd.logits, batch.labels);
  sgd_momentum_step(net, lg.grads, opt, lr);
  return lg.loss;
}

PretrainResult pretrain(Network net, const Dataset& train, const StepDecaySchedule& schedule,
                        const TrainOptions& options, const Dataset* test) {
  const ScheduleSpec spec = schedule;
  validate(spec);
  require(train.size() > 0, ErrorCode::kEmptyDataset, "cannot train on an empty dataset");
  OptimizerState opt = OptimizerState::for_network(net, options.momentum, options.l2_scale);
  PretrainResult result;
  for (int epoch = 0; epoch < schedule.total_epochs; ++epoch) {
    const double lr = lr_at(spec, epoch);
    const BatchPlan plan = shuffle_batches(train, options.batch_size, options.seed,
                                           static_cast<std::uint64_t>(epoch));
    double loss_sum = 0.0;
    for (const auto& indices : plan) loss_sum += train_step(net, train.batch(indices), lr, opt);
    result.history.push_back(epoch_record(epoch, lr, loss_sum, plan.size(), net, train, test));
  }
  result.net = std::move(net);
  return result;
}

double qat_train_step(ShadowModel& model, const Batch& batch, double lr, OptimizerState& opt) {
  require(lr > 0.0, ErrorCode::kInvalidArgument, "learning rate must be positive");
  const Network& applied = model.applied_.net;
  const ForwardResult fwd = forward(applied, batch.inputs);
  const LossAndGradients lg = loss_and_backward(applied, fwd.cache, fwd.logits, batch.labels);
  sgd_momentum_step(model.shadow_, lg.grads, opt, lr);
  model.requantize();
  return lg.loss;
}

RetrainResult retrain(ShadowModel model, const Dataset& train, const ScheduleSpec& schedule,
                      const TrainOptions& options, const Dataset* test) {
  validate(schedule);
  require(train.size() > 0, ErrorCode::kEmptyDataset, "cannot train on an empty dataset");
  std::vector<int> captures;
  if (std::holds_alternative<CyclicalSchedule>(schedule)) captures = capture_epochs(schedule);

  OptimizerState opt = OptimizerState::for_network(model.shadow(), options.momentum,
                                                   options.l2_scale);
  CaptureBank bank(model.configs());
  std::vector<EpochRecord> history;
  auto next_capture = captures.begin();
  for (int epoch = 0; epoch < total_epochs(schedule); ++epoch) {
    const double lr = lr_at(schedule, epoch);
    const BatchPlan plan = shuffle_batches(train, options.batch_size, options.seed,
                                           static_cast<std::uint64_t>(epoch));
    double loss_sum = 0.0;
    for (const auto& indices : plan)
      loss_sum += qat_train_step(model, train.batch(indices), lr, opt);
    EpochRecord record =
        epoch_record(epoch, lr, loss_sum, plan.size(), model.applied().net, train, test);
    if (next_capture != captures.end() && *next_capture == epoch) {
      // Captures are persisted, so the live shadow is rounded to storage
      // precision first; the capture and its shadow then reload exactly.
      model.set_shadow(to_storage_precision(model.shadow()));
      CaptureEntry entry{epoch, model.applied(), {}, std::nullopt, model.shadow()};
      entry.train = evaluate(entry.model.net, train);
      if (test) entry.test = evaluate(entry.model.net, *test);
      bank.add(std::move(entry));
      ++next_capture;
    }
    history.push_back(std::move(record));
  }
  return {std::move(model), std::move(bank), std::move(history)};
}

std::vector<double> finetune_learning_rates(double initial_lr, int epochs, double decay) {
  require(initial_lr > 0.0, ErrorCode::kInvalidArgument, "fine-tune lr must be positive");
  require(decay > 0.0 && decay < 1.0, ErrorCode::kInvalidArgument,
          "fine-tune decay must lie in (0, 1)");
  require(epochs >= 0, ErrorCode::kInvalidArgument, "fine-tune epochs must be nonnegative");
  std::vector<double> out;
  for (int e = 0; e < epochs; ++e) out.push_back(initial_lr * std::pow(decay, e));
  return out;
}

ShadowModel finetune(ShadowModel model, const Dataset& train, double initial_lr, int epochs,
                     double decay, const TrainOptions& options) {
  const std::vector<double> lrs = finetune_learning_rates(initial_lr, epochs, decay);
  if (lrs.empty()) return model;
  require(train.size() > 0, ErrorCode::kEmptyDataset, "cannot train on an empty dataset");
  OptimizerState opt = OptimizerState::for_network(model.shadow(), options.momentum, 0.0);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    const BatchPlan plan = shuffle_batches(train, options.batch_size, options.seed,
                                           static_cast<std::uint64_t>(epoch));
    for (const auto& indices : plan)
      qat_train_step(model, train.batch(indices), lrs[static_cast<std::size_t>(epoch)], opt);
  }
  return model;
}

}  // namespace sqwa
