// Copyright 2026 The SQWA Lab Authors
// Licensed under the Apache License, Version 2.0

#include <doctest.h>

#include <cmath>
#include <random>

#include "sqwa/error.hpp"
#include "sqwa/network.hpp"
#include "test_support.hpp"

using namespace sqwa;

namespace {

Network single_dense(std::vector<double> w, std::size_t out = 1) {
  const std::size_t in = w.size() / out;
  Network net = init_weights({{in}, {LayerSpec::dense(in, out)}}, 0);
  net.weights[0] = Tensor({out, in}, std::move(w));
  net.biases[0] = Tensor({out}, 0.0);
  return net;
}

double batch_loss(const Network& net, const Tensor& x, const std::vector<int>& labels) {
  return softmax_cross_entropy(predict(net, x), labels, nullptr);
}

// Central differences over every weight and bias, compared with backward().
double max_gradient_error(Network net, const Tensor& x, const std::vector<int>& labels) {
  const ForwardResult fwd = forward(net, x);
  const LossAndGradients lg = loss_and_backward(net, fwd.cache, fwd.logits, labels);
  const double h = 1e-5;
  double worst = 0.0;
  auto probe = [&](double& param, double analytic) {
    const double saved = param;
    param = saved + h;
    const double up = batch_loss(net, x, labels);
    param = saved - h;
    const double down = batch_loss(net, x, labels);
    param = saved;
    const double numeric = (up - down) / (2 * h);
    const double err = std::abs(numeric - analytic) / std::max(1e-3, std::abs(numeric) + std::abs(analytic));
    worst = std::max(worst, err);
  };
  for (std::size_t p = 0; p < net.num_params(); ++p) {
    for (std::size_t i = 0; i < net.weights[p].size(); ++i)
      probe(net.weights[p][i], lg.grads.weights[p][i]);
    if (net.biases[p])
      for (std::size_t i = 0; i < net.biases[p]->size(); ++i)
        probe((*net.biases[p])[i], (*lg.grads.biases[p])[i]);
  }
  return worst;
}

}  // namespace

TEST_SUITE("forward") {
  TEST_CASE("identity dense layer passes its input through") {
    const Network net = single_dense({1, 0, 0, 0, 1, 0, 0, 0, 1}, 3);
    const Tensor out = predict(net, Tensor({1, 3}, {1, 2, 3}));
    CHECK(out == Tensor({1, 3}, {1, 2, 3}));
  }

  TEST_CASE("antisymmetric unit on a symmetric input gives zero") {
    const Network net = single_dense({0.5, -0.5});
    CHECK(predict(net, Tensor({1, 2}, {2, 2}))[0] == 0.0);
  }

  TEST_CASE("dense then relu on a hand example") {
    Network net = init_weights({{2}, {LayerSpec::dense(2, 2), LayerSpec::relu()}}, 0);
    net.weights[0] = Tensor({2, 2}, {1, -1, 0, 1});
    net.biases[0] = Tensor({2}, 0.0);
    CHECK(predict(net, Tensor({1, 2}, {1, 1})) == Tensor({1, 2}, {0, 1}));
  }

  TEST_CASE("shape mismatch names the offending layer") {
    const Architecture bad{{4}, {LayerSpec::dense(4, 3), LayerSpec::relu(), LayerSpec::dense(2, 1)}};
    try {
      bad.infer_shapes();
      FAIL("expected a shape error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kShapeMismatch);
      CHECK(std::string(e.what()).find("layer 2") != std::string::npos);
    }
    const Network net = init_weights(test::mlp(4, 3, 2), 1);
    CHECK_THROWS_AS(forward(net, Tensor({1, 5}, 0.0)), Error);
  }

  TEST_CASE("convolution matches a hand-computed 3x3 correlation") {
    Network net = init_weights({{1, 3, 3}, {LayerSpec::conv2d(1, 1, 2, 0), LayerSpec::flatten()}}, 0);
    net.weights[0] = Tensor({1, 1, 2, 2}, {1, 2, 3, 4});
    net.biases[0] = Tensor({1}, {0.5});
    const Tensor out = predict(net, Tensor({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9}));
    // [1 2;4 5]·[1 2;3 4] = 1+4+12+20 = 37, then 47, 67, 77; plus bias.
    CHECK(out == Tensor({1, 4}, {37.5, 47.5, 67.5, 77.5}));
  }

  TEST_CASE("padded convolution keeps the spatial size") {
    Network net = init_weights({{1, 2, 2}, {LayerSpec::conv2d(1, 1, 3, 1, false), LayerSpec::flatten()}}, 0);
    net.weights[0] = Tensor({1, 1, 3, 3}, 1.0);
    const Tensor out = predict(net, Tensor({1, 1, 2, 2}, {1, 2, 3, 4}));
    CHECK(out == Tensor({1, 4}, {10, 10, 10, 10}));
  }
}

TEST_SUITE("loss") {
  TEST_CASE("uniform logits cost ln 2") {
    CHECK(softmax_cross_entropy(Tensor({1, 2}, {0, 0}), std::vector<int>{0}, nullptr) ==
          doctest::Approx(0.693147180559945309).epsilon(1e-15));
    for (double t : {-50.0, 3.0, 700.0})
      CHECK(softmax_cross_entropy(Tensor({1, 2}, {t, t}), std::vector<int>{1}, nullptr) ==
            doctest::Approx(0.693147180559945309).epsilon(1e-15));
  }

  TEST_CASE("two-sample hand cross-entropy") {
    // mean(ln(1 + e^-2), ln(1 + e^1))
    const double loss =
        softmax_cross_entropy(Tensor({2, 2}, {2, 0, 0, 1}), std::vector<int>{0, 0}, nullptr);
    CHECK(loss == doctest::Approx(0.720094849280597665).epsilon(1e-14));
  }

  TEST_CASE("shift invariance of loss and gradient") {
    std::mt19937_64 rng(3);
    const Tensor logits = test::random_tensor({4, 5}, rng);
    Tensor shifted = logits;
    for (double& v : shifted.values()) v += 17.25;
    const std::vector<int> labels{0, 4, 2, 2};
    Tensor g1, g2;
    const double l1 = softmax_cross_entropy(logits, labels, &g1);
    const double l2 = softmax_cross_entropy(shifted, labels, &g2);
    CHECK(std::abs(l1 - l2) <= 1e-10);
    for (std::size_t i = 0; i < g1.size(); ++i) CHECK(std::abs(g1[i] - g2[i]) <= 1e-10);
  }

  TEST_CASE("labels out of range are rejected") {
    const Network net = init_weights(test::mlp(2, 3, 2), 0);
    const ForwardResult fwd = forward(net, Tensor({1, 2}, {1, 1}));
    try {
      loss_and_backward(net, fwd.cache, fwd.logits, std::vector<int>{2});
      FAIL("expected a label error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kLabelOutOfRange);
    }
    CHECK_THROWS_AS(loss_and_backward(net, fwd.cache, fwd.logits, std::vector<int>{0, 1}), Error);
  }
}

TEST_SUITE("gradients") {
  TEST_CASE("single dense unit against central differences") {
    Network net = single_dense({0.3, -0.7, 0.2, 0.9}, 2);
    net.biases[0] = Tensor({2}, {0.1, -0.2});
    const double err = max_gradient_error(net, Tensor({1, 2}, {1.5, -0.5}), {1});
    CHECK(err <= 1e-6);
  }

  TEST_CASE("random dense and conv networks against central differences") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 10; ++trial) {
      const Network mlp = init_weights(test::mlp(4, 6, 3), 100 + trial);
      const Tensor x = test::random_tensor({3, 4}, rng);
      CHECK(max_gradient_error(mlp, x, {0, 2, 1}) <= 1e-4);

      const Network cnn = init_weights(test::small_cnn(), 200 + trial);
      const Tensor img = test::random_tensor({2, 1, 5, 5}, rng);
      CHECK(max_gradient_error(cnn, img, {2, 0}) <= 1e-4);
    }
  }

  TEST_CASE("gradients are congruent with the weights") {
    const Network net = init_weights(test::small_cnn(), 5);
    std::mt19937_64 rng(5);
    const Tensor x = test::random_tensor({2, 1, 5, 5}, rng);
    const ForwardResult fwd = forward(net, x);
    const LossAndGradients lg = loss_and_backward(net, fwd.cache, fwd.logits, std::vector<int>{0, 1});
    REQUIRE(lg.grads.weights.size() == net.weights.size());
    for (std::size_t p = 0; p < net.num_params(); ++p) {
      CHECK(lg.grads.weights[p].shape() == net.weights[p].shape());
      CHECK(lg.grads.biases[p]->shape() == net.biases[p]->shape());
    }
  }
}

TEST_SUITE("optimizer") {
  TEST_CASE("plain sgd") {
    Network net = single_dense({1.0});
    Gradients g = Gradients::zeros_like(net);
    g.weights[0][0] = 0.5;
    OptimizerState opt = OptimizerState::for_network(net, 0.0, 0.0);
    sgd_momentum_step(net, g, opt, 0.1);
    CHECK(net.weights[0][0] == doctest::Approx(0.95).epsilon(1e-15));
  }

  TEST_CASE("momentum accumulates over two identical steps") {
    Network net = single_dense({1.0});
    Gradients g = Gradients::zeros_like(net);
    g.weights[0][0] = 1.0;
    OptimizerState opt = OptimizerState::for_network(net, 0.9, 0.0);
    sgd_momentum_step(net, g, opt, 0.1);
    CHECK(net.weights[0][0] == doctest::Approx(0.9).epsilon(1e-15));
    sgd_momentum_step(net, g, opt, 0.1);
    CHECK(net.weights[0][0] == doctest::Approx(0.71).epsilon(1e-15));
  }

  TEST_CASE("zero gradient without l2 leaves weights untouched") {
    for (double m : {0.0, 0.5, 0.9}) {
      Network net = init_weights(test::mlp(3, 4, 2), 9);
      const Network before = net;
      OptimizerState opt = OptimizerState::for_network(net, m, 0.0);
      for (int i = 0; i < 3; ++i) sgd_momentum_step(net, Gradients::zeros_like(net), opt, 0.1);
      CHECK(net == before);
    }
  }

  TEST_CASE("coupled l2 decays weights and biases") {
    Network net = single_dense({2.0});
    net.biases[0] = Tensor({1}, {1.0});
    OptimizerState opt = OptimizerState::for_network(net, 0.0, 0.5);
    sgd_momentum_step(net, Gradients::zeros_like(net), opt, 0.1);
    CHECK(net.weights[0][0] == doctest::Approx(1.9).epsilon(1e-15));
    CHECK((*net.biases[0])[0] == doctest::Approx(0.95).epsilon(1e-15));
  }

  TEST_CASE("nonpositive learning rate is rejected") {
    Network net = single_dense({1.0});
    OptimizerState opt = OptimizerState::for_network(net, 0.9, 0.0);
    CHECK_THROWS_AS(sgd_momentum_step(net, Gradients::zeros_like(net), opt, 0.0), Error);
  }
}

TEST_SUITE("evaluate") {
  // Always predicts class 0.
  Network constant_zero() {
    Network net = single_dense({0, 0}, 2);
    net.biases[0] = Tensor({2}, {1.0, 0.0});
    return net;
  }

  TEST_CASE("accuracy counts top-1 hits") {
    const Network net = constant_zero();
    const Dataset all_zero = test::make_dataset({1}, {1, 2, 3, 4}, {0, 0, 0, 0}, 2);
    CHECK(evaluate(net, all_zero).accuracy == 1.0);
    const Dataset one_zero = test::make_dataset({1}, {1, 2, 3, 4}, {0, 1, 1, 1}, 2);
    CHECK(evaluate(net, one_zero).accuracy == 0.25);
  }

  TEST_CASE("evaluated loss equals hand cross-entropy") {
    Network net = single_dense({1, 0, 0, 1}, 2);
    const Dataset ds = test::make_dataset({2}, {2, 0, 0, 1}, {0, 0}, 2);
    CHECK(evaluate(net, ds).loss == doctest::Approx(0.720094849280597665).epsilon(1e-14));
    CHECK(evaluate(net, ds).accuracy == 0.5);
  }

  TEST_CASE("result does not depend on the evaluation batch size") {
    const Network net = init_weights(test::mlp(2, 8, 3), 4);
    const Dataset ds = synthetic_blobs(3, 40, 2, 0.3, 2);
    const Metrics a = evaluate(net, ds, 7);
    const Metrics b = evaluate(net, ds, 256);
    CHECK(a.accuracy == b.accuracy);
    CHECK(std::abs(a.loss - b.loss) <= 1e-12);
  }

  TEST_CASE("empty dataset is rejected") {
    const Network net = constant_zero();
    Dataset empty;
    empty.images = Tensor({0, 1});
    empty.num_classes = 2;
    CHECK_THROWS_AS(evaluate(net, empty), Error);
  }
}

TEST_SUITE("initialization") {
  TEST_CASE("deterministic per seed") {
    const Architecture arch = test::small_cnn();
    CHECK(init_weights(arch, 42) == init_weights(arch, 42));
    CHECK_FALSE(init_weights(arch, 42) == init_weights(arch, 43));
  }

  TEST_CASE("dense 100x100 spread follows the fan-in rule") {
    const Network net = init_weights({{100}, {LayerSpec::dense(100, 100)}}, 17);
    double sum = 0, sq = 0;
    for (double v : net.weights[0].values()) {
      sum += v;
      sq += v * v;
    }
    const double n = static_cast<double>(net.weights[0].size());
    const double sd = std::sqrt(sq / n - (sum / n) * (sum / n));
    // uniform(+-sqrt(6/100)) has standard deviation sqrt(2/100)
    CHECK(std::abs(sd - 0.141421356237309505) <= 0.2 * 0.141421356237309505);
    const double bound = std::sqrt(6.0 / 100.0);
    for (double v : net.weights[0].values()) CHECK(std::abs(v) <= bound);
    for (double b : net.biases[0]->values()) CHECK(b == 0.0);
  }

  TEST_CASE("non-composable spec is rejected") {
    const Architecture bad{{3}, {LayerSpec::dense(4, 2)}};
    CHECK_THROWS_AS(init_weights(bad, 0), Error);
  }
}

TEST_CASE("identical training steps are bitwise reproducible") {
  auto run = [] {
    Network net = init_weights(test::mlp(2, 5, 3), 8);
    const Dataset ds = synthetic_blobs(3, 20, 2, 0.4, 1);
    OptimizerState opt = OptimizerState::for_network(net, 0.9, 5e-4);
    for (int step = 0; step < 5; ++step) {
      const Batch b = ds.all();
      const ForwardResult fwd = forward(net, b.inputs);
      const LossAndGradients lg = loss_and_backward(net, fwd.cache, fwd.logits, b.labels);
      sgd_momentum_step(net, lg.grads, opt, 0.05);
    }
    return net;
  };
  CHECK(run() == run());
}

TEST_CASE("storage precision rounds through binary32") {
  Network net = single_dense({0.1, 1.0 / 3.0});
  const Network s = to_storage_precision(net);
  CHECK(s.weights[0][0] == static_cast<double>(0.1f));
  CHECK(s.weights[0][1] == static_cast<double>(1.0f / 3.0f));
  CHECK(to_storage_precision(s) == s);
}
