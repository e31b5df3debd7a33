// Copyright 2026 The SQWA Lab Authors
// Licensed under the Apache License, Version 2.0

#include <doctest.h>

#include <fstream>
#include <iterator>
#include <sstream>

#include "sqwa/error.hpp"
#include "sqwa/json_io.hpp"
#include "sqwa/pipeline.hpp"
#include "test_support.hpp"

using namespace sqwa;
namespace fs = std::filesystem;

namespace {

RunConfig tiny(const fs::path& out) {
  RunConfig cfg;
  cfg.dataset.num_classes = 3;
  cfg.dataset.train_per_class = 30;
  cfg.dataset.test_per_class = 10;
  cfg.dataset.dims = 4;
  cfg.dataset.spread = 0.4;
  cfg.network = test::mlp(4, 8, 3);
  cfg.seed = 3;
  cfg.batch_size = 16;
  cfg.pretrain.schedule = StepDecaySchedule{0.1, 0.1, {3, 5}, 6};
  cfg.retrain.period = 4;
  cfg.retrain.epochs = 16;
  cfg.average_count = 3;
  cfg.finetune.epochs = 2;
  cfg.output_dir = out.string();
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("run config JSON") {
  const RunConfig cfg = tiny("runs/x");
  const nlohmann::json j = to_json(cfg);
  CHECK(to_json(run_config_from_json(j)) == j);

  nlohmann::json extra = j;
  extra["retrain"]["perod"] = 3;
  CHECK_THROWS_AS(run_config_from_json(extra), Error);
  nlohmann::json future = j;
  future["schema_version"] = kRunConfigSchemaVersion + 1;
  CHECK_THROWS_AS(run_config_from_json(future), Error);

  nlohmann::json sparse = {{"network", to_json(cfg.network)}};
  const RunConfig defaults = run_config_from_json(sparse);
  CHECK(defaults.bits == 2);
  CHECK(defaults.average_count == 7);
  CHECK(defaults.retrain.period == 6);
}

TEST_CASE("resolution derives the cycle bounds and fine-tune rate") {
  RunConfig cfg = tiny("runs/x");
  const RunConfig r = resolve(cfg);
  CHECK(*r.retrain.max_lr == doctest::Approx(0.01).epsilon(1e-15));
  CHECK(*r.retrain.min_lr == doctest::Approx(0.0001).epsilon(1e-15));
  CHECK(*r.finetune.initial_lr == doctest::Approx(0.001).epsilon(1e-15));
  CHECK(capture_epochs(ScheduleSpec{retrain_schedule(r)}).size() == 4);

  cfg.average_count = 5;
  CHECK_THROWS_AS(resolve(cfg), Error);
  cfg.average_count = 0;
  CHECK_THROWS_AS(resolve(cfg), Error);
  cfg = tiny("runs/x");
  cfg.pretrain.schedule = StepDecaySchedule{0.1, 0.1, {}, 6};
  CHECK_THROWS_AS(resolve(cfg), Error);
  cfg.retrain.max_lr = 0.02;
  cfg.retrain.min_lr = 0.002;
  CHECK(*resolve(cfg).finetune.initial_lr == doctest::Approx(0.002));
}

TEST_CASE("stage seeds are distinct and stable") {
  CHECK(stage_seed(1, "pretrain") == stage_seed(1, "pretrain"));
  CHECK(stage_seed(1, "pretrain") != stage_seed(1, "retrain"));
  CHECK(stage_seed(1, "pretrain") != stage_seed(2, "pretrain"));
}

TEST_CASE("the output directory pins its configuration") {
  const auto dir = test::scratch("pipeline_pin");
  Pipeline first(tiny(dir));
  CHECK(fs::exists(first.layout().resolved_config()));
  CHECK_NOTHROW(Pipeline(tiny(dir)));
  RunConfig changed = tiny(dir);
  changed.seed = 4;
  CHECK_THROWS_AS(Pipeline{changed}, Error);
}

TEST_CASE("a tiny run end to end") {
  const auto dir = test::scratch("pipeline_tiny");
  std::ostringstream log;
  Pipeline p(tiny(dir), &log);
  p.run_all();
  const RunLayout& L = p.layout();
  for (const fs::path& ckpt : {L.pretrained(), L.direct(), L.retrained(), L.averaged(),
                               L.early_averaged(), L.requantized(), L.final_model()})
    CHECK(checkpoint_exists(ckpt));
  CHECK(load_bank(L.bank()).size() == 4);

  const std::vector<ReportRow> rows = read_metrics_csv(L.metrics_csv());
  REQUIRE(rows.size() == 3 + 3);
  CHECK(rows[0].epoch == 7);
  CHECK(rows[2].epoch == 15);
  CHECK(rows[3].label == "Avg. (3-bit)");
  CHECK(rows[4].label == "Direct (2-bit)");
  CHECK(rows[5].label == "Fine-tune (2-bit)");
  CHECK(rows[3].test.has_value());

  SUBCASE("reported numbers are recomputable from checkpoints") {
    const RunReport again = build_report(p.config(), p.data());
    REQUIRE(again.rows.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      CHECK(again.rows[i].train.accuracy == doctest::Approx(rows[i].train.accuracy).epsilon(1e-12));
      CHECK(again.rows[i].train.loss == doctest::Approx(rows[i].train.loss).epsilon(1e-12));
    }
    const Metrics avg = evaluate(load_averaged(L.averaged()).net, p.data().train);
    CHECK(avg.accuracy == doctest::Approx(rows[3].train.accuracy).epsilon(1e-12));
    CHECK(again.late.epochs == std::vector<int>{7, 11, 15});
    CHECK(again.early.epochs == std::vector<int>{3, 7, 11});
  }

  SUBCASE("resume skips completed stages") {
    const std::string before = slurp(L.final_model() / kPayloadFile);
    Pipeline resumed(tiny(dir));
    for (Stage s : {Stage::kPretrain, Stage::kQuantize, Stage::kRetrain, Stage::kAverage,
                    Stage::kFinetune, Stage::kReport})
      CHECK_FALSE(resumed.run(s));

    fs::remove_all(L.root / "finetune");
    fs::remove(L.summary());
    Pipeline partial(tiny(dir));
    CHECK_FALSE(partial.run(Stage::kAverage));
    CHECK(partial.run(Stage::kFinetune));
    CHECK(slurp(L.final_model() / kPayloadFile) == before);
  }

  SUBCASE("a fresh run reproduces every artifact") {
    const auto other = test::scratch("pipeline_tiny_again");
    Pipeline q(tiny(other));
    q.run_all();
    CHECK(slurp(L.final_model() / kPayloadFile) == slurp(q.layout().final_model() / kPayloadFile));
    CHECK(slurp(L.metrics_csv()) == slurp(q.layout().metrics_csv()));
  }

  SUBCASE("losscape over the last three captures") {
    LosscapeRequest req;
    req.res_x = 5;
    req.res_y = 4;
    const fs::path csv = run_losscape(p.config(), p.data(), req);
    CHECK(csv == L.root / "losscape" / "quantized.csv");
    const SurfaceGrid g = read_grid(csv);
    CHECK(g.points.size() >= 20);
  }
}

TEST_CASE("stage failures name the stage") {
  const auto dir = test::scratch("pipeline_fail");
  RunConfig cfg = tiny(dir);
  cfg.pretrain.checkpoint = (dir / "missing").string();
  Pipeline p(cfg);
  try {
    p.run(Stage::kPretrain);
    FAIL("expected the pretrain stage to fail");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).rfind("pretrain: ", 0) == 0);
  }
  try {
    p.run(Stage::kAverage);
    FAIL("expected the average stage to fail");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).rfind("average: ", 0) == 0);
  }
}
