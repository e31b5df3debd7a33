// Copyright 2026 The SQWA Lab Authors
// Licensed under the Apache License, Version 2.0

#include <doctest.h>

#include <cmath>
#include <random>

#include "sqwa/error.hpp"
#include "sqwa/qat.hpp"
#include "test_support.hpp"

using namespace sqwa;

namespace {

// One input feature, two classes, no bias: logits = (Q(w0) x, Q(w1) x).
ShadowModel two_way_unit(double w0, double w1, double step) {
  Network net = init_weights({{1}, {LayerSpec::dense(1, 2, false)}}, 0);
  net.weights[0] = Tensor({2, 1}, {w0, w1});
  return ShadowModel(net, {{2, step}});
}

Batch single(double x, int label) { return {Tensor({1, 1}, {x}), {label}}; }

bool coherent(const ShadowModel& m) {
  const QuantizedModel expected = quantize_model(m.shadow(), m.configs());
  return expected.net == m.applied().net;
}

}  // namespace

TEST_CASE("construction quantizes the shadow") {
  const ShadowModel m = two_way_unit(0.24, -0.3, 0.5);
  CHECK(m.applied().net.weights[0] == Tensor({2, 1}, {0.0, -0.5}));
  CHECK(m.shadow().weights[0] == Tensor({2, 1}, {0.24, -0.3}));
  CHECK(coherent(m));
  CHECK_THROWS_AS(ShadowModel(m.shadow(), {}), Error);
}

TEST_CASE("a shadow crossing the midpoint flips the applied weight") {
  // logits (0, 0) so dL/dw0 = -(1 - 1/2) * x = -0.5; lr 0.04 moves w0 0.24 -> 0.26.
  ShadowModel m = two_way_unit(0.24, 0.0, 0.5);
  OptimizerState opt = OptimizerState::for_network(m.shadow(), 0.0, 0.0);
  qat_train_step(m, single(1.0, 0), 0.04, opt);
  CHECK(m.shadow().weights[0][0] == doctest::Approx(0.26).epsilon(1e-14));
  CHECK(m.shadow().weights[0][1] == doctest::Approx(-0.02).epsilon(1e-14));
  CHECK(m.applied().net.weights[0][0] == 0.5);
  CHECK(m.applied().net.weights[0][1] == 0.0);
}

TEST_CASE("a step too small to cross a midpoint changes only the shadow") {
  // The largest gradient magnitude is 0.5 and every shadow value sits at
  // least 0.1 from a midpoint, so lr * 0.5 < 0.1 cannot move an applied value.
  ShadowModel m = two_way_unit(0.1, -0.6, 0.5);
  const Network before_shadow = m.shadow();
  const QuantizedModel before_applied = m.applied();
  OptimizerState opt = OptimizerState::for_network(m.shadow(), 0.0, 0.0);
  qat_train_step(m, single(1.0, 0), 0.01, opt);
  CHECK_FALSE(m.shadow() == before_shadow);
  CHECK(m.applied() == before_applied);
}

TEST_CASE("zero gradient leaves both copies untouched") {
  // logits (500, -500) saturate the softmax exactly.
  ShadowModel m = two_way_unit(500.0, -500.0, 500.0);
  const Network before = m.shadow();
  OptimizerState opt = OptimizerState::for_network(m.shadow(), 0.9, 0.0);
  const double loss = qat_train_step(m, single(1.0, 0), 0.1, opt);
  CHECK(loss == 0.0);
  CHECK(m.shadow() == before);
  CHECK(coherent(m));
}

TEST_CASE("applied stays the quantized shadow across many steps") {
  const Dataset ds = synthetic_blobs(3, 30, 4, 0.3, 5);
  ShadowModel m = ShadowModel::from_direct_quantization(init_weights(test::mlp(4, 8, 3), 2), 2);
  OptimizerState opt = OptimizerState::for_network(m.shadow(), 0.9, 0.0);
  const std::vector<QuantizerConfig> frozen = m.configs();
  for (std::uint64_t epoch = 0; epoch < 5; ++epoch)
    for (const auto& idx : shuffle_batches(ds, 8, 1, epoch)) {
      qat_train_step(m, ds.batch(idx), 0.05, opt);
      REQUIRE(coherent(m));
      REQUIRE(m.configs() == frozen);
      REQUIRE_NOTHROW(m.applied().validate());
    }
  // Quantizing the shadow again changes nothing.
  const QuantizedModel twice = quantize_model(m.applied().net, m.configs());
  CHECK(twice.net == m.applied().net);
}

TEST_CASE("gradients at applied weights match finite differences") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    // Nonzero biases keep pre-activations off the ReLU kink that zero
    // ternary weights would otherwise pin them to.
    Network fp = init_weights(test::small_cnn(), trial);
    for (auto& b : fp.biases)
      if (b) b = test::random_tensor(b->shape(), rng, 0.1);
    const QuantizedModel q = direct_quantize_model(fp, 2);
    Network net = q.net;
    const Tensor x = test::random_tensor({2, 1, 5, 5}, rng);
    const std::vector<int> labels{1, 2};
    const ForwardResult fwd = forward(net, x);
    const LossAndGradients lg = loss_and_backward(net, fwd.cache, fwd.logits, labels);
    const double h = 1e-5;
    for (std::size_t p = 0; p < net.num_params(); ++p)
      for (std::size_t i = 0; i < net.weights[p].size(); ++i) {
        const double saved = net.weights[p][i];
        net.weights[p][i] = saved + h;
        const double up = softmax_cross_entropy(predict(net, x), labels, nullptr);
        net.weights[p][i] = saved - h;
        const double down = softmax_cross_entropy(predict(net, x), labels, nullptr);
        net.weights[p][i] = saved;
        const double numeric = (up - down) / (2 * h);
        const double analytic = lg.grads.weights[p][i];
        CHECK(std::abs(numeric - analytic) <=
              1e-4 * std::max(1e-3, std::abs(numeric) + std::abs(analytic)));
      }
  }
}

TEST_CASE("retraining captures at cycle minima") {
  const Dataset ds = synthetic_blobs(3, 20, 4, 0.3, 6);
  const ShadowModel start =
      ShadowModel::from_direct_quantization(init_weights(test::mlp(4, 8, 3), 3), 2);
  const TrainOptions opts{8, 17, 0.9, 0.0};

  const RetrainResult three = retrain(start, ds, CyclicalSchedule{0.01, 0.0001, 4, 1, 12}, opts);
  REQUIRE(three.bank.size() == 3);
  CHECK(three.bank.entries()[0].epoch == 3);
  CHECK(three.bank.entries()[2].epoch == 11);
  CHECK(three.history.size() == 12);
  for (const CaptureEntry& e : three.bank.entries()) {
    REQUIRE(e.shadow);
    CHECK(quantize_model(*e.shadow, three.bank.configs()).net == e.model.net);
    CHECK(e.train.accuracy == evaluate(e.model.net, ds).accuracy);
  }
  CHECK(three.bank.configs() == start.configs());

  CHECK(retrain(start, ds, CyclicalSchedule{0.01, 0.0001, 6, 1, 5}, opts).bank.empty());
  CHECK(retrain(start, ds, StepDecaySchedule{0.01, 0.1, {}, 2}, opts).bank.empty());

  const RetrainResult again = retrain(start, ds, CyclicalSchedule{0.01, 0.0001, 4, 1, 12}, opts);
  CHECK(again.model.shadow() == three.model.shadow());
  CHECK(again.bank.entries().back().model == three.bank.entries().back().model);
}

TEST_CASE("accuracy dips at the cycle maximum") {
  // Ternary retraining of a narrow net: high-rate epochs are noisier than
  // the capture epochs at the bottom of each cycle.
  const Dataset ds = normalize(synthetic_blobs(10, 200, 20, 0.35, 8));
  PretrainResult pre = pretrain(init_weights(test::mlp(20, 16, 10), 1), ds,
                                StepDecaySchedule{0.1, 0.1, {10, 15}, 20}, {32, 1, 0.9, 5e-4});
  const CyclicalSchedule cyc{0.01, 0.0001, 6, 1, 36};
  const RetrainResult r = retrain(ShadowModel::from_direct_quantization(pre.net, 2), ds, cyc,
                                  {32, 2, 0.9, 0.0});
  double at_max = 0.0, at_min = 0.0;
  int n_max = 0, n_min = 0;
  for (const EpochRecord& rec : r.history) {
    if (rec.lr == cyc.max_lr) {
      at_max += rec.train.accuracy;
      ++n_max;
    } else if (rec.lr == cyc.min_lr) {
      at_min += rec.train.accuracy;
      ++n_min;
    }
  }
  CHECK(at_max / n_max < at_min / n_min);
}

TEST_CASE("fine-tuning") {
  const Dataset ds = synthetic_blobs(3, 20, 4, 0.3, 7);
  const ShadowModel start =
      ShadowModel::from_direct_quantization(init_weights(test::mlp(4, 8, 3), 4), 2);
  const TrainOptions opts{8, 3, 0.9, 0.0};
  const ShadowModel same = finetune(start, ds, 0.001, 0, 0.1, opts);
  CHECK(same.shadow() == start.shadow());
  const ShadowModel tuned = finetune(start, ds, 0.01, 3, 0.1, opts);
  CHECK_FALSE(tuned.shadow() == start.shadow());
  CHECK(coherent(tuned));
  CHECK(tuned.configs() == start.configs());
  CHECK(finetune(start, ds, 0.01, 3, 0.1, opts).shadow() == tuned.shadow());
  CHECK_THROWS_AS(finetune(start, ds, 0.01, 3, 1.5, opts), Error);
}
