// Copyright 2026 The SQWA Lab Authors
// Licensed under the Apache License, Version 2.0

// Command-line driver: one subcommand per pipeline stage plus `sqwa` (all
// stages), `losscape` and `eval`.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "sqwa/checkpoint.hpp"
#include "sqwa/error.hpp"
#include "sqwa/pipeline.hpp"

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  std::optional<int> bits;
  std::optional<int> pretrain_epochs;
  std::optional<double> pretrain_lr;
  std::optional<std::string> pretrain_checkpoint;
  std::optional<double> max_lr;
  std::optional<double> min_lr;
  std::optional<int> period;
  std::optional<int> retrain_epochs;
  std::optional<int> average_count;
  std::optional<double> finetune_lr;
  std::optional<int> finetune_epochs;
};

sqwa::RunConfig configure(const std::string& path, const Overrides& o) {
  sqwa::RunConfig c = sqwa::load_run_config(path);
  if (o.seed) c.seed = *o.seed;
  if (o.output_dir) c.output_dir = *o.output_dir;
  if (o.bits) c.bits = *o.bits;
  if (o.pretrain_epochs) c.pretrain.schedule.total_epochs = *o.pretrain_epochs;
  if (o.pretrain_lr) c.pretrain.schedule.initial_lr = *o.pretrain_lr;
  if (o.pretrain_checkpoint) c.pretrain.checkpoint = *o.pretrain_checkpoint;
  if (o.max_lr) c.retrain.max_lr = *o.max_lr;
  if (o.min_lr) c.retrain.min_lr = *o.min_lr;
  if (o.period) c.retrain.period = *o.period;
  if (o.retrain_epochs) c.retrain.epochs = *o.retrain_epochs;
  if (o.average_count) c.average_count = *o.average_count;
  if (o.finetune_lr) c.finetune.initial_lr = *o.finetune_lr;
  if (o.finetune_epochs) c.finetune.epochs = *o.finetune_epochs;
  return c;
}

void print_metrics(const std::string& what, const std::string& split, const sqwa::Metrics& m) {
  std::cout << what << '\t' << split << "\tloss=" << m.loss << "\taccuracy=" << m.accuracy
            << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic quantized weight averaging lab"};
  app.require_subcommand(1);
  std::cout.precision(17);

  std::string config_path;
  Overrides o;
  auto common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "Run configuration (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "Override the run seed");
    sub->add_option("-o,--output-dir", o.output_dir, "Override the output directory");
  };

  auto* pretrain = app.add_subcommand("pretrain", "Train the full-precision model");
  common(pretrain);
  pretrain->add_option("--epochs", o.pretrain_epochs, "Pretrain epochs");
  pretrain->add_option("--lr", o.pretrain_lr, "Initial learning rate");
  pretrain->add_option("--from", o.pretrain_checkpoint, "Adopt an existing full-precision checkpoint");

  auto* quantize = app.add_subcommand("quantize", "Directly quantize the pretrained model");
  common(quantize);
  quantize->add_option("--bits", o.bits, "Weight bit width");

  auto* retrain = app.add_subcommand("retrain-cyclical", "Quantized retraining with captures");
  common(retrain);
  retrain->add_option("--max-lr", o.max_lr, "Cycle maximum learning rate");
  retrain->add_option("--min-lr", o.min_lr, "Cycle minimum learning rate");
  retrain->add_option("--period", o.period, "Cycle period in epochs");
  retrain->add_option("--epochs", o.retrain_epochs, "Retraining epochs");

  auto* average = app.add_subcommand("average", "Average the most recent captures");
  common(average);
  average->add_option("-n,--count", o.average_count, "Number of captures to average");

  auto* finetune = app.add_subcommand("finetune", "Re-quantize the average and fine-tune");
  common(finetune);
  finetune->add_option("--lr", o.finetune_lr, "Initial fine-tune learning rate");
  finetune->add_option("--epochs", o.finetune_epochs, "Fine-tune epochs");

  auto* all = app.add_subcommand("sqwa", "Run every stage and write the metrics report");
  common(all);
  all->add_option("--bits", o.bits, "Weight bit width");
  all->add_option("-n,--count", o.average_count, "Number of captures to average");
  all->add_option("--from", o.pretrain_checkpoint, "Adopt an existing full-precision checkpoint");

  sqwa::LosscapeRequest surface;
  std::string mode = "quantized";
  std::size_t resolution = 41;
  std::vector<std::string> anchors;
  std::string surface_out;
  auto* losscape = app.add_subcommand("losscape", "Loss surface through three models");
  common(losscape);
  losscape->add_option("--anchor", anchors, "Three checkpoints (default: last three captures)")
      ->expected(3);
  losscape->add_option("--mode", mode, "quantized or full_precision")
      ->check(CLI::IsMember({"quantized", "full_precision"}));
  losscape->add_option("--res", resolution, "Grid nodes per axis");
  losscape->add_option("--margin", surface.margin, "Margin around the anchors");
  losscape->add_option("--split", surface.split, "train or test")
      ->check(CLI::IsMember({"train", "test"}));
  losscape->add_option("--workers", surface.workers, "Parallel evaluation workers");
  losscape->add_option("--out", surface_out, "Output CSV path");

  std::vector<std::string> eval_paths;
  std::string eval_bank;
  auto* eval = app.add_subcommand("eval", "Evaluate checkpoints on the configured dataset");
  common(eval);
  eval->add_option("checkpoints", eval_paths, "Checkpoint directories");
  eval->add_option("--bank", eval_bank, "Evaluate every capture of a bank directory");

  CLI11_PARSE(app, argc, argv);

  std::string stage = app.get_subcommands().front()->get_name();
  try {
    sqwa::Pipeline pipeline(configure(config_path, o), &std::cerr);
    if (*pretrain) pipeline.run(sqwa::Stage::kPretrain);
    else if (*quantize) pipeline.run(sqwa::Stage::kQuantize);
    else if (*retrain) pipeline.run(sqwa::Stage::kRetrain);
    else if (*average) pipeline.run(sqwa::Stage::kAverage);
    else if (*finetune) pipeline.run(sqwa::Stage::kFinetune);
    else if (*all) {
      pipeline.run_all();
      std::cout << pipeline.layout().final_model().string() << '\n';
    } else if (*losscape) {
      surface.mode = sqwa::surface_mode_from_string(mode);
      surface.res_x = surface.res_y = resolution;
      for (const auto& a : anchors) surface.anchors.emplace_back(a);
      surface.out = surface_out;
      std::cout << sqwa::run_losscape(pipeline.config(), pipeline.data(), surface).string()
                << '\n';
    } else if (*eval) {
      const sqwa::DatasetPair& data = pipeline.data();
      auto report = [&](const std::string& what, const sqwa::Network& net) {
        print_metrics(what, "train", sqwa::evaluate(net, data.train));
        if (data.test) print_metrics(what, "test", sqwa::evaluate(net, *data.test));
      };
      if (!eval_bank.empty()) {
        const sqwa::CaptureBank bank = sqwa::load_bank(eval_bank);
        for (const auto& e : bank.entries())
          report(eval_bank + "@epoch" + std::to_string(e.epoch), e.model.net);
      }
      for (const auto& p : eval_paths) report(p, sqwa::evaluation_network(sqwa::load(p)));
      if (eval_bank.empty() && eval_paths.empty())
        report(pipeline.layout().final_model().string(),
               sqwa::evaluation_network(sqwa::load(pipeline.layout().final_model())));
    }
  } catch (const sqwa::Error& e) {
    std::cerr << "sqwa " << stage << ": error [" << sqwa::to_string(e.code()) << "]: " << e.what()
              << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "sqwa " << stage << ": error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
