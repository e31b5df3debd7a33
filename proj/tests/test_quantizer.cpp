// Copyright 2026 The SQWA Lab Authors
// Licensed under the Apache License, Version 2.0

#include <doctest.h>

#include <cmath>
#include <random>

#include "sqwa/error.hpp"
#include "sqwa/quantizer.hpp"
#include "test_support.hpp"

using namespace sqwa;

namespace {

double q(double w, int bits, double step) { return quantize_value(w, QuantizerConfig{bits, step}); }

// Dense sweep over (0, upper] used as an independent reference for the
// step search.
double brute_force_step(const Tensor& w, int bits, int candidates) {
  double max_abs = 0.0;
  for (double v : w.values()) max_abs = std::max(max_abs, std::abs(v));
  const double upper = 2.0 * max_abs / (levels_count(bits) - 1);
  double best = upper, best_err = quantization_mse(w.values(), {bits, upper});
  for (int i = 1; i < candidates; ++i) {
    const double step = upper * i / candidates;
    const double err = quantization_mse(w.values(), {bits, step});
    if (err < best_err) {
      best_err = err;
      best = step;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("level counts") {
  CHECK(levels_count(1) == 2);
  CHECK(levels_count(2) == 3);
  CHECK(levels_count(4) == 15);
  for (int b = 2; b <= 8; ++b) CHECK(levels_count(b) == (1 << b) - 1);
  CHECK_THROWS_AS(levels_count(0), Error);
  CHECK(QuantizerConfig{2, 0.5}.max_level() == 1);
  CHECK(QuantizerConfig{4, 0.5}.max_level() == 7);
  CHECK(QuantizerConfig{1, 0.5}.max_level() == 1);
}

TEST_CASE("ternary hand values") {
  CHECK(q(0.0, 2, 0.5) == 0.0);
  CHECK(q(0.0, 5, 0.1) == 0.0);
  CHECK(q(0.7, 2, 0.5) == 0.5);
  CHECK(q(0.2, 2, 0.5) == 0.0);
  CHECK(q(-10.0, 2, 0.5) == -0.5);
}

TEST_CASE("midpoint ties round away from zero") {
  CHECK(q(0.25, 2, 0.5) == 0.5);
  CHECK(q(-0.25, 2, 0.5) == -0.5);
  CHECK(q(0.75, 3, 0.5) == 1.0);
}

TEST_CASE("binary quantizer maps to plus or minus step") {
  CHECK(q(0.0, 1, 0.3) == 0.3);
  CHECK(q(1e-9, 1, 0.3) == 0.3);
  CHECK(q(-1e-9, 1, 0.3) == -0.3);
  CHECK(q(-5.0, 1, 0.3) == -0.3);
}

TEST_CASE("invalid steps are rejected") {
  CHECK_THROWS_AS(quantize_tensor(Tensor({1}, 1.0), QuantizerConfig{2, 0.0}), Error);
  CHECK_THROWS_AS(quantize_tensor(Tensor({1}, 1.0), QuantizerConfig{2, -1.0}), Error);
}

TEST_CASE("quantization error") {
  const Tensor err = quantization_error(Tensor({1}, {0.7}), {2, 0.5});
  CHECK(err[0] == doctest::Approx(-0.2).epsilon(1e-15));
  const Tensor exact = quantization_error(Tensor({3}, {-0.5, 0.0, 0.5}), {2, 0.5});
  CHECK(exact == Tensor({3}, 0.0));
}

TEST_CASE("algebraic properties on random inputs") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> wdist(-3.0, 3.0);
  std::uniform_real_distribution<double> sdist(0.05, 1.5);
  std::uniform_int_distribution<int> bdist(2, 8);
  for (int i = 0; i < 1000; ++i) {
    const QuantizerConfig cfg{bdist(rng), sdist(rng)};
    const double a = wdist(rng), b = wdist(rng);
    const double qa = quantize_value(a, cfg);
    CHECK(quantize_value(qa, cfg) == qa);
    CHECK(quantize_value(-a, cfg) == -qa);
    if (a <= b) CHECK(qa <= quantize_value(b, cfg));
    CHECK(std::abs(qa) <= cfg.max_value());
    const double level = qa / cfg.step;
    CHECK(std::abs(level - std::round(level)) <= 1e-12);
    if (std::abs(a) <= cfg.max_value()) CHECK(std::abs(qa - a) <= cfg.step / 2 + 1e-15);
  }
}

TEST_CASE("step selection on exactly representable inputs") {
  CHECK(select_step_size(Tensor({2}, {-1.0, 1.0}), 2) == 1.0);
  for (double c : {0.001, 0.37, 5.0, 1234.5})
    CHECK(select_step_size(Tensor({2}, {-c, c}), 2) == doctest::Approx(c).epsilon(1e-12));
  CHECK_THROWS_AS(select_step_size(Tensor({3}, 0.0), 2), Error);
}

TEST_CASE("step selection agrees with a dense brute-force sweep") {
  std::mt19937_64 rng(7);
  const Tensor w = test::random_tensor({1000}, rng);
  for (int bits : {2, 3, 4}) {
    const double fast = select_step_size(w, bits);
    const double slow = brute_force_step(w, bits, 100000);
    CHECK(std::abs(fast - slow) <= 0.02 * slow);
    CHECK(quantization_mse(w.values(), {bits, fast}) <=
          quantization_mse(w.values(), {bits, slow}) * (1 + 1e-9));
  }
}

TEST_CASE("step selection is deterministic") {
  std::mt19937_64 rng(8);
  const Tensor w = test::random_tensor({257}, rng, 0.1);
  CHECK(select_step_size(w, 2) == select_step_size(w, 2));
}

TEST_CASE("direct quantization of a model") {
  Network eye = init_weights({{3}, {LayerSpec::dense(3, 3)}}, 0);
  eye.weights[0] = Tensor({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  const QuantizedModel qe = direct_quantize_model(eye, 2);
  CHECK(qe.configs[0].step == 1.0);
  CHECK(qe.net.weights[0] == eye.weights[0]);

  const Network net = init_weights(test::small_cnn(), 3);
  for (int bits : {1, 2, 3, 5}) {
    const QuantizedModel qm = direct_quantize_model(net, bits);
    REQUIRE(qm.configs.size() == net.num_params());
    for (std::size_t p = 0; p < net.num_params(); ++p) {
      const QuantizerConfig& c = qm.configs[p];
      for (double v : qm.net.weights[p].values()) {
        const double level = v / c.step;
        CHECK(std::abs(level - std::round(level)) <= 1e-12);
        CHECK(std::abs(level) <= c.max_level());
        if (bits == 1) CHECK(std::abs(level) == 1.0);
      }
      CHECK(qm.net.biases[p] == net.biases[p]);
    }
    CHECK_NOTHROW(qm.validate());
  }
}

TEST_CASE("quantized model validation catches off-grid weights") {
  const Network net = init_weights(test::mlp(3, 4, 2), 1);
  QuantizedModel qm = direct_quantize_model(net, 2);
  qm.net.weights[0][0] += 0.3 * qm.configs[0].step;
  CHECK_THROWS_AS(qm.validate(), Error);
}
