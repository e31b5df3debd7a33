// Copyright 2026 The SQWA Lab Authors
// Licensed under the Apache License, Version 2.0

#include "sqwa/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "sqwa/data.hpp"
#include "sqwa/error.hpp"

namespace sqwa {
namespace {

std::string layer_name(std::size_t index, LayerKind kind) {
  return "layer " + std::to_string(index) + " (" + std::string(to_string(kind)) + ")";
}

Shape batched(std::size_t n, const Shape& sample) {
  Shape s{n};
  s.insert(s.end(), sample.begin(), sample.end());
  return s;
}

// Y(N,out) = X(N,in) W(out,in)^T + b
Tensor dense_forward(const Tensor& x, const Tensor& w, const std::optional<Tensor>& b) {
  const std::size_t n = x.dim(0), in = w.dim(1), out = w.dim(0);
  Tensor y({n, out});
  for (std::size_t s = 0; s < n; ++s) {
    const double* xs = x.data() + s * in;
    double* ys = y.data() + s * out;
    for (std::size_t o = 0; o < out; ++o) {
      const double* wo = w.data() + o * in;
      double acc = b ? (*b)[o] : 0.0;
      for (std::size_t i = 0; i < in; ++i) acc += wo[i] * xs[i];
      ys[o] = acc;
    }
  }
  return y;
}

void dense_backward(const Tensor& x, const Tensor& w, const Tensor& dy, Tensor& dw,
                    std::optional<Tensor>& db, Tensor* dx) {
  const std::size_t n = x.dim(0), in = w.dim(1), out = w.dim(0);
  for (std::size_t s = 0; s < n; ++s) {
    const double* xs = x.data() + s * in;
    const double* dys = dy.data() + s * out;
    for (std::size_t o = 0; o < out; ++o) {
      const double g = dys[o];
      double* dwo = dw.data() + o * in;
      for (std::size_t i = 0; i < in; ++i) dwo[i] += g * xs[i];
      if (db) (*db)[o] += g;
    }
  }
  if (!dx) return;
  *dx = Tensor(x.shape());
  for (std::size_t s = 0; s < n; ++s) {
    const double* dys = dy.data() + s * out;
    double* dxs = dx->data() + s * in;
    for (std::size_t o = 0; o < out; ++o) {
      const double* wo = w.data() + o * in;
      const double g = dys[o];
      for (std::size_t i = 0; i < in; ++i) dxs[i] += g * wo[i];
    }
  }
}

struct ConvGeometry {
  std::size_t n, c, h, w, o, k, p, oh, ow;
};

ConvGeometry conv_geometry(const Tensor& x, const LayerSpec& spec) {
  ConvGeometry g{};
  g.n = x.dim(0);
  g.c = x.dim(1);
  g.h = x.dim(2);
  g.w = x.dim(3);
  g.o = spec.out_channels;
  g.k = spec.kernel;
  g.p = spec.padding;
  g.oh = g.h + 2 * g.p - g.k + 1;
  g.ow = g.w + 2 * g.p - g.k + 1;
  return g;
}

// Calls fn(x_index, w_index, y_index) for every multiply-accumulate of a
// stride-1 zero-padded convolution, skipping taps that fall in the padding.
template <typename Fn>
void for_each_tap(const ConvGeometry& g, Fn&& fn) {
  for (std::size_t s = 0; s < g.n; ++s)
    for (std::size_t oc = 0; oc < g.o; ++oc)
      for (std::size_t i = 0; i < g.oh; ++i)
        for (std::size_t j = 0; j < g.ow; ++j) {
          const std::size_t y_index = ((s * g.o + oc) * g.oh + i) * g.ow + j;
          for (std::size_t ic = 0; ic < g.c; ++ic)
            for (std::size_t ki = 0; ki < g.k; ++ki) {
              const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(i + ki) -
                                       static_cast<std::ptrdiff_t>(g.p);
              if (r < 0 || r >= static_cast<std::ptrdiff_t>(g.h)) continue;
              for (std::size_t kj = 0; kj < g.k; ++kj) {
                const std::ptrdiff_t col = static_cast<std::ptrdiff_t>(j + kj) -
                                           static_cast<std::ptrdiff_t>(g.p);
                if (col < 0 || col >= static_cast<std::ptrdiff_t>(g.w)) continue;
                const std::size_t x_index =
                    ((s * g.c + ic) * g.h + static_cast<std::size_t>(r)) * g.w +
                    static_cast<std::size_t>(col);
                const std::size_t w_index = ((oc * g.c + ic) * g.k + ki) * g.k + kj;
                fn(x_index, w_index, y_index);
              }
            }
        }
}

Tensor conv_forward(const Tensor& x, const LayerSpec& spec, const Tensor& w,
                    const std::optional<Tensor>& b) {
  const ConvGeometry g = conv_geometry(x, spec);
  Tensor y({g.n, g.o, g.oh, g.ow});
  if (b) {
    for (std::size_t s = 0; s < g.n; ++s)
      for (std::size_t oc = 0; oc < g.o; ++oc)
        std::fill_n(y.data() + (s * g.o + oc) * g.oh * g.ow, g.oh * g.ow, (*b)[oc]);
  }
  for_each_tap(g, [&](std::size_t xi, std::size_t wi, std::size_t yi) {
    y[yi] += w[wi] * x[xi];
  });
  return y;
}

void conv_backward(const Tensor& x, const LayerSpec& spec, const Tensor& w,
                   const Tensor& dy, Tensor& dw, std::optional<Tensor>& db,
                   Tensor* dx) {
  const ConvGeometry g = conv_geometry(x, spec);
  if (dx) *dx = Tensor(x.shape());
  for_each_tap(g, [&](std::size_t xi, std::size_t wi, std::size_t yi) {
    dw[wi] += dy[yi] * x[xi];
    if (dx) (*dx)[xi] += dy[yi] * w[wi];
  });
  if (db) {
    for (std::size_t s = 0; s < g.n; ++s)
      for (std::size_t oc = 0; oc < g.o; ++oc) {
        const double* plane = dy.data() + (s * g.o + oc) * g.oh * g.ow;
        double acc = 0.0;
        for (std::size_t t = 0; t < g.oh * g.ow; ++t) acc += plane[t];
        (*db)[oc] += acc;
      }
  }
}

void check_labels(std::span<const int> labels, std::size_t batch, std::size_t classes) {
  require(labels.size() == batch, ErrorCode::kShapeMismatch,
          "labels length " + std::to_string(labels.size()) + " != batch size " +
              std::to_string(batch));
  for (int label : labels) {
    require(label >= 0 && static_cast<std::size_t>(label) < classes,
            ErrorCode::kLabelOutOfRange,
            "label " + std::to_string(label) + " outside [0, " +
                std::to_string(classes) + ")");
  }
}

}  // namespace

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kDense: return "dense";
    case LayerKind::kConv2d: return "conv2d";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kFlatten: return "flatten";
  }
  return "unknown";
}

LayerKind layer_kind_from_string(std::string_view name) {
  if (name == "dense") return LayerKind::kDense;
  if (name == "conv2d") return LayerKind::kConv2d;
  if (name == "relu") return LayerKind::kRelu;
  if (name == "flatten") return LayerKind::kFlatten;
  fail(ErrorCode::kInvalidArgument, "unknown layer kind '" + std::string(name) + "'");
}

LayerSpec LayerSpec::dense(std::size_t in, std::size_t out, bool bias) {
  LayerSpec s;
  s.kind = LayerKind::kDense;
  s.in_features = in;
  s.out_features = out;
  s.has_bias = bias;
  return s;
}

LayerSpec LayerSpec::conv2d(std::size_t in_channels, std::size_t out_channels,
                            std::size_t kernel, std::size_t padding, bool bias) {
  LayerSpec s;
  s.kind = LayerKind::kConv2d;
  s.in_channels = in_channels;
  s.out_channels = out_channels;
  s.kernel = kernel;
  s.padding = padding;
  s.has_bias = bias;
  return s;
}

LayerSpec LayerSpec::relu() {
  LayerSpec s;
  s.kind = LayerKind::kRelu;
  s.has_bias = false;
  return s;
}

LayerSpec LayerSpec::flatten() {
  LayerSpec s;
  s.kind = LayerKind::kFlatten;
  s.has_bias = false;
  return s;
}

Shape LayerSpec::weight_shape() const {
  switch (kind) {
    case LayerKind::kDense: return {out_features, in_features};
    case LayerKind::kConv2d: return {out_channels, in_channels, kernel, kernel};
    default: return {};
  }
}

std::size_t LayerSpec::fan_in() const {
  switch (kind) {
    case LayerKind::kDense: return in_features;
    case LayerKind::kConv2d: return in_channels * kernel * kernel;
    default: return 0;
  }
}

std::vector<Shape> Architecture::infer_shapes() const {
  require(!layers.empty(), ErrorCode::kInvalidArgument, "network has no layers");
  require(!input_shape.empty() && element_count(input_shape) > 0,
          ErrorCode::kInvalidArgument, "network input shape is empty");
  std::vector<Shape> out;
  out.reserve(layers.size());
  Shape current = input_shape;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    const auto reject = [&](const std::string& why) {
      fail(ErrorCode::kShapeMismatch,
           layer_name(i, l.kind) + ": " + why + ", got input " + shape_string(current));
    };
    switch (l.kind) {
      case LayerKind::kDense:
        if (l.in_features == 0 || l.out_features == 0) reject("zero-sized dense layer");
        if (current.size() != 1 || current[0] != l.in_features)
          reject("expects input (" + std::to_string(l.in_features) + ")");
        current = {l.out_features};
        break;
      case LayerKind::kConv2d:
        if (l.in_channels == 0 || l.out_channels == 0 || l.kernel == 0)
          reject("zero-sized conv2d layer");
        if (current.size() != 3 || current[0] != l.in_channels)
          reject("expects input (" + std::to_string(l.in_channels) + ", H, W)");
        if (current[1] + 2 * l.padding < l.kernel || current[2] + 2 * l.padding < l.kernel)
          reject("kernel larger than padded input");
        current = {l.out_channels, current[1] + 2 * l.padding - l.kernel + 1,
                   current[2] + 2 * l.padding - l.kernel + 1};
        break;
      case LayerKind::kRelu:
        break;
      case LayerKind::kFlatten:
        current = {element_count(current)};
        break;
    }
    out.push_back(current);
  }
  return out;
}

std::size_t Architecture::num_classes() const {
  const Shape last = infer_shapes().back();
  require(last.size() == 1, ErrorCode::kShapeMismatch,
          "network output " + shape_string(last) + " is not a logit vector");
  return last[0];
}

std::size_t Architecture::num_parameterized() const {
  return static_cast<std::size_t>(std::count_if(
      layers.begin(), layers.end(), [](const LayerSpec& l) { return l.parameterized(); }));
}

std::size_t Architecture::layer_of_param(std::size_t param_index) const {
  std::size_t seen = 0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (!layers[i].parameterized()) continue;
    if (seen++ == param_index) return i;
  }
  fail(ErrorCode::kInvalidArgument, "no parameterized layer #" + std::to_string(param_index));
}

std::size_t Network::parameter_count() const {
  std::size_t total = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    total += weights[i].size();
    if (biases[i]) total += biases[i]->size();
  }
  return total;
}

void Network::validate() const {
  arch.num_classes();
  const std::size_t params = arch.num_parameterized();
  require(weights.size() == params && biases.size() == params, ErrorCode::kShapeMismatch,
          "network holds " + std::to_string(weights.size()) + " weight tensors for " +
              std::to_string(params) + " parameterized layers");
  for (std::size_t p = 0; p < params; ++p) {
    const std::size_t li = arch.layer_of_param(p);
    const LayerSpec& l = arch.layers[li];
    require(weights[p].shape() == l.weight_shape(), ErrorCode::kShapeMismatch,
            layer_name(li, l.kind) + ": weight shape " + shape_string(weights[p].shape()) +
                " != " + shape_string(l.weight_shape()));
    const std::size_t bias_len = l.kind == LayerKind::kDense ? l.out_features : l.out_channels;
    require(biases[p].has_value() == l.has_bias, ErrorCode::kShapeMismatch,
            layer_name(li, l.kind) + ": bias presence disagrees with layer spec");
    if (biases[p])
      require(biases[p]->shape() == Shape{bias_len}, ErrorCode::kShapeMismatch,
              layer_name(li, l.kind) + ": bias shape " + shape_string(biases[p]->shape()));
  }
}

Gradients Gradients::zeros_like(const Network& net) {
  Gradients g;
  for (std::size_t p = 0; p < net.num_params(); ++p) {
    g.weights.emplace_back(net.weights[p].shape());
    g.biases.push_back(net.biases[p] ? std::optional<Tensor>(Tensor(net.biases[p]->shape()))
                                     : std::nullopt);
  }
  return g;
}

OptimizerState OptimizerState::for_network(const Network& net, double momentum,
                                           double l2_scale) {
  require(momentum >= 0.0 && momentum < 1.0, ErrorCode::kInvalidArgument,
          "momentum must lie in [0, 1)");
  require(l2_scale >= 0.0, ErrorCode::kInvalidArgument, "l2 scale must be nonnegative");
  const Gradients zeros = Gradients::zeros_like(net);
  OptimizerState state;
  state.weight_buffers = zeros.weights;
  state.bias_buffers = zeros.biases;
  state.momentum = momentum;
  state.l2_scale = l2_scale;
  return state;
}

Network init_weights(const Architecture& arch, std::uint64_t seed) {
  arch.num_classes();
  Network net;
  net.arch = arch;
  std::mt19937_64 rng(seed);
  for (const LayerSpec& l : arch.layers) {
    if (!l.parameterized()) continue;
    const double limit = std::sqrt(6.0 / static_cast<double>(l.fan_in()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Tensor w(l.weight_shape());
    for (double& v : w.storage()) v = dist(rng);
    net.weights.push_back(std::move(w));
    const std::size_t bias_len = l.kind == LayerKind::kDense ? l.out_features : l.out_channels;
    net.biases.push_back(l.has_bias ? std::optional<Tensor>(Tensor({bias_len}))
                                    : std::nullopt);
  }
  return net;
}

ForwardResult forward(const Network& net, const Tensor& batch) {
  const Architecture& arch = net.arch;
  const std::vector<Shape> shapes = arch.infer_shapes();
  require(batch.rank() == arch.input_shape.size() + 1 &&
              Shape(batch.shape().begin() + 1, batch.shape().end()) == arch.input_shape,
          ErrorCode::kShapeMismatch,
          layer_name(0, arch.layers[0].kind) + ": batch shape " +
              shape_string(batch.shape()) + " does not match input " +
              shape_string(arch.input_shape));
  const std::size_t n = batch.dim(0);
  ForwardResult result;
  result.cache.layer_inputs.reserve(arch.layers.size());
  Tensor current = batch;
  std::size_t p = 0;
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    const LayerSpec& l = arch.layers[i];
    result.cache.layer_inputs.push_back(current);
    switch (l.kind) {
      case LayerKind::kDense:
        current = dense_forward(current, net.weights[p], net.biases[p]);
        ++p;
        break;
      case LayerKind::kConv2d:
        current = conv_forward(current, l, net.weights[p], net.biases[p]);
        ++p;
        break;
      case LayerKind::kRelu:
        for (double& v : current.storage()) v = v > 0.0 ? v : 0.0;
        break;
      case LayerKind::kFlatten:
        current.reshape(batched(n, shapes[i]));
        break;
    }
  }
  result.logits = std::move(current);
  return result;
}

Tensor predict(const Network& net, const Tensor& batch) {
  return forward(net, batch).logits;
}

double softmax_cross_entropy(const Tensor& logits, std::span<const int> labels,
                             Tensor* grad_logits) {
  require(logits.rank() == 2, ErrorCode::kShapeMismatch,
          "logits must be (batch, classes), got " + shape_string(logits.shape()));
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  require(n > 0, ErrorCode::kEmptyDataset, "empty batch");
  check_labels(labels, n, k);
  if (grad_logits) *grad_logits = Tensor(logits.shape());
  double total = 0.0;
  std::vector<double> shifted(k);
  for (std::size_t s = 0; s < n; ++s) {
    const double* row = logits.data() + s * k;
    const double peak = *std::max_element(row, row + k);
    double denom = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      shifted[c] = row[c] - peak;
      denom += std::exp(shifted[c]);
    }
    const double log_denom = std::log(denom);
    const auto label = static_cast<std::size_t>(labels[s]);
    total += log_denom - shifted[label];
    if (grad_logits) {
      double* g = grad_logits->data() + s * k;
      for (std::size_t c = 0; c < k; ++c) {
        const double prob = std::exp(shifted[c] - log_denom);
        g[c] = (prob - (c == label ? 1.0 : 0.0)) / static_cast<double>(n);
      }
    }
  }
  return total / static_cast<double>(n);
}

LossAndGradients loss_and_backward(const Network& net, const ForwardCache& cache,
                                   const Tensor& logits, std::span<const int> labels) {
  const Architecture& arch = net.arch;
  require(cache.layer_inputs.size() == arch.layers.size(), ErrorCode::kShapeMismatch,
          "forward cache does not match the network");
  LossAndGradients out;
  Tensor grad;
  out.loss = softmax_cross_entropy(logits, labels, &grad);
  out.grads = Gradients::zeros_like(net);

  std::size_t p = net.num_params();
  for (std::size_t i = arch.layers.size(); i-- > 0;) {
    const LayerSpec& l = arch.layers[i];
    const Tensor& input = cache.layer_inputs[i];
    const bool need_input_grad = i > 0;
    Tensor input_grad;
    switch (l.kind) {
      case LayerKind::kDense:
        --p;
        dense_backward(input, net.weights[p], grad, out.grads.weights[p],
                       out.grads.biases[p], need_input_grad ? &input_grad : nullptr);
        break;
      case LayerKind::kConv2d:
        --p;
        conv_backward(input, l, net.weights[p], grad, out.grads.weights[p],
                      out.grads.biases[p], need_input_grad ? &input_grad : nullptr);
        break;
      case LayerKind::kRelu:
        input_grad = std::move(grad);
        for (std::size_t t = 0; t < input_grad.size(); ++t)
          if (!(input[t] > 0.0)) input_grad[t] = 0.0;
        break;
      case LayerKind::kFlatten:
        input_grad = std::move(grad);
        input_grad.reshape(input.shape());
        break;
    }
    grad = std::move(input_grad);
  }
  return out;
}

void sgd_momentum_step(Network& net, const Gradients& grads, OptimizerState& state,
                       double lr) {
  require(lr > 0.0, ErrorCode::kInvalidArgument, "learning rate must be positive");
  require(grads.weights.size() == net.num_params() &&
              state.weight_buffers.size() == net.num_params(),
          ErrorCode::kShapeMismatch, "gradients/optimizer state not congruent with network");
  const auto update = [&](Tensor& param, const Tensor& grad, Tensor& buffer) {
    require(param.shape() == grad.shape() && param.shape() == buffer.shape(),
            ErrorCode::kShapeMismatch,
            "gradient shape " + shape_string(grad.shape()) + " vs parameter " +
                shape_string(param.shape()));
    for (std::size_t t = 0; t < param.size(); ++t) {
      buffer[t] = state.momentum * buffer[t] + (grad[t] + state.l2_scale * param[t]);
      param[t] -= lr * buffer[t];
    }
  };
  for (std::size_t p = 0; p < net.num_params(); ++p) {
    update(net.weights[p], grads.weights[p], state.weight_buffers[p]);
    if (net.biases[p]) {
      require(grads.biases[p].has_value() && state.bias_buffers[p].has_value(),
              ErrorCode::kShapeMismatch, "missing bias gradient");
      update(*net.biases[p], *grads.biases[p], *state.bias_buffers[p]);
    }
  }
}

Metrics evaluate(const Network& net, const Dataset& ds, std::size_t batch_size) {
  require(ds.size() > 0, ErrorCode::kEmptyDataset, "cannot evaluate on an empty dataset");
  require(batch_size > 0, ErrorCode::kInvalidArgument, "batch size must be positive");
  double loss_sum = 0.0;
  std::size_t correct = 0;
  std::vector<std::size_t> indices;
  for (std::size_t start = 0; start < ds.size(); start += batch_size) {
    const std::size_t stop = std::min(ds.size(), start + batch_size);
    indices.resize(stop - start);
    for (std::size_t t = start; t < stop; ++t) indices[t - start] = t;
    const Batch b = ds.batch(indices);
    const Tensor logits = predict(net, b.inputs);
    loss_sum += softmax_cross_entropy(logits, b.labels, nullptr) *
                static_cast<double>(indices.size());
    const std::size_t k = logits.dim(1);
    for (std::size_t s = 0; s < indices.size(); ++s) {
      const double* row = logits.data() + s * k;
      const auto best = static_cast<std::size_t>(std::max_element(row, row + k) - row);
      if (best == static_cast<std::size_t>(b.labels[s])) ++correct;
    }
  }
  const auto n = static_cast<double>(ds.size());
  return {loss_sum / n, static_cast<double>(correct) / n};
}

Network to_storage_precision(Network net) {
  const auto round = [](Tensor& t) {
    for (double& v : t.storage()) v = static_cast<double>(static_cast<float>(v));
  };
  for (std::size_t p = 0; p < net.num_params(); ++p) {
    round(net.weights[p]);
    if (net.biases[p]) round(*net.biases[p]);
  }
  return net;
}

}  // namespace sqwa
