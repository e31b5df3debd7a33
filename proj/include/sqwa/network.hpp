// Copyright 2026 The SQWA Lab Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sqwa/tensor.hpp"

namespace sqwa {

struct Dataset;

enum class LayerKind { kDense, kConv2d, kRelu, kFlatten };

std::string_view to_string(LayerKind kind);
LayerKind layer_kind_from_string(std::string_view name);

struct LayerSpec {
  LayerKind kind = LayerKind::kRelu;
  // dense
  std::size_t in_features = 0;
  std::size_t out_features = 0;
  // conv2d: square kernel, stride 1, symmetric zero padding
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 0;
  std::size_t padding = 0;
  bool has_bias = true;

  static LayerSpec dense(std::size_t in, std::size_t out, bool bias = true);
  static LayerSpec conv2d(std::size_t in_channels, std::size_t out_channels,
                          std::size_t kernel, std::size_t padding = 0,
                          bool bias = true);
  static LayerSpec relu();
  static LayerSpec flatten();

  bool parameterized() const noexcept {
    return kind == LayerKind::kDense || kind == LayerKind::kConv2d;
  }
  Shape weight_shape() const;
  std::size_t fan_in() const;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct Architecture {
  Shape input_shape;  // per sample, no batch axis
  std::vector<LayerSpec> layers;

  /// Per-sample output shape of every layer. Throws kShapeMismatch naming
  /// the first layer that does not compose with its input.
  std::vector<Shape> infer_shapes() const;
  std::size_t num_classes() const;
  std::size_t num_parameterized() const;
  /// Index into `layers` of the i-th parameterized layer.
  std::size_t layer_of_param(std::size_t param_index) const;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// Weights and optional biases for each parameterized layer, in layer order.
struct Network {
  Architecture arch;
  std::vector<Tensor> weights;
  std::vector<std::optional<Tensor>> biases;

  std::size_t num_params() const noexcept { return weights.size(); }
  std::size_t parameter_count() const;
  /// Throws unless weights/biases match the architecture geometry.
  void validate() const;

  friend bool operator==(const Network&, const Network&) = default;
};

/// Shape-congruent with Network::weights / Network::biases.
struct Gradients {
  std::vector<Tensor> weights;
  std::vector<std::optional<Tensor>> biases;

  static Gradients zeros_like(const Network& net);
};

struct OptimizerState {
  std::vector<Tensor> weight_buffers;
  std::vector<std::optional<Tensor>> bias_buffers;
  double momentum = 0.9;
  double l2_scale = 0.0;

  static OptimizerState for_network(const Network& net, double momentum,
                                    double l2_scale);
};

// Inputs of every layer, captured by forward() for backward().
struct ForwardCache {
  std::vector<Tensor> layer_inputs;
};

struct ForwardResult {
  Tensor logits;
  ForwardCache cache;
};

struct LossAndGradients {
  double loss = 0.0;
  Gradients grads;
};

struct Metrics {
  double loss = 0.0;
  double accuracy = 0.0;
};

Network init_weights(const Architecture& arch, std::uint64_t seed);

ForwardResult forward(const Network& net, const Tensor& batch);
/// Logits only; no cache is retained.
Tensor predict(const Network& net, const Tensor& batch);

/// Mean softmax cross-entropy over the batch and d(loss)/d(logits).
double softmax_cross_entropy(const Tensor& logits, std::span<const int> labels,
                             Tensor* grad_logits);

LossAndGradients loss_and_backward(const Network& net, const ForwardCache& cache,
                                   const Tensor& logits,
                                   std::span<const int> labels);

/// Classical momentum with coupled L2:
///   buffer <- m * buffer + (grad + l2 * param);  param <- param - lr * buffer
void sgd_momentum_step(Network& net, const Gradients& grads,
                       OptimizerState& state, double lr);

/// Mean cross-entropy and top-1 accuracy, reduced in dataset order.
Metrics evaluate(const Network& net, const Dataset& ds,
                 std::size_t batch_size = 256);

/// Rounds every parameter through IEEE binary32, the checkpoint precision.
Network to_storage_precision(Network net);

}  // namespace sqwa
