// Copyright 2026 The SQWA Lab Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sqwa/checkpoint.hpp"
#include "sqwa/data.hpp"
#include "sqwa/losscape.hpp"
#include "sqwa/network.hpp"
#include "sqwa/schedule.hpp"

namespace sqwa {

inline constexpr int kRunConfigSchemaVersion = 1;

struct DatasetConfig {
  std::string kind = "blobs";  // "blobs" or "idx"
  // blobs
  int num_classes = 10;
  int train_per_class = 100;
  int test_per_class = 100;
  int dims = 20;
  double spread = 0.5;
  // idx; empty test paths mean no test split
  std::string train_images;
  std::string train_labels;
  std::string test_images;
  std::string test_labels;
  std::size_t train_limit = 0;  // 0 keeps every sample
  std::size_t test_limit = 0;
};

struct PretrainConfig {
  StepDecaySchedule schedule{0.1, 0.1, {10, 15}, 20};
  double momentum = 0.9;
  double l2_scale = 5e-4;
  std::string checkpoint;  // existing full-precision checkpoint; skips training
};

struct RetrainConfig {
  // Derived from the pretrain schedule's rates when absent.
  std::optional<double> max_lr;
  std::optional<double> min_lr;
  int period = 6;
  int intermediate_steps = 1;
  int epochs = 84;
  double momentum = 0.9;
};

struct FinetuneConfig {
  std::optional<double> initial_lr;  // 0.1 * cycle max when absent
  int epochs = 4;
  double decay = 0.1;
  double momentum = 0.9;
};

struct RunConfig {
  int schema_version = kRunConfigSchemaVersion;
  DatasetConfig dataset;
  Architecture network;
  std::uint64_t seed = 0;
  std::size_t batch_size = 32;
  PretrainConfig pretrain;
  int bits = 2;
  RetrainConfig retrain;
  int average_count = 7;
  FinetuneConfig finetune;
  std::string output_dir = "runs/sqwa";
};

nlohmann::json to_json(const RunConfig& cfg);
/// Missing fields take their defaults; unknown keys are rejected.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

/// Fills derived fields (cycle bounds, fine-tune lr) and checks consistency,
/// including average_count <= number of capture points.
RunConfig resolve(RunConfig cfg);
CyclicalSchedule retrain_schedule(const RunConfig& resolved);

/// Independent stream for a named stage, derived from the run seed.
std::uint64_t stage_seed(std::uint64_t run_seed, std::string_view stage);

struct DatasetPair {
  Dataset train;
  std::optional<Dataset> test;
};
/// Normalized with training-split statistics.
DatasetPair load_datasets(const RunConfig& cfg);

/// On-disk layout of one run.
struct RunLayout {
  std::filesystem::path root;

  std::filesystem::path resolved_config() const { return root / "config.resolved.json"; }
  std::filesystem::path pretrained() const { return root / "pretrain" / "model"; }
  std::filesystem::path direct() const { return root / "quantize" / "model"; }
  std::filesystem::path bank() const { return root / "retrain" / "bank"; }
  std::filesystem::path retrained() const { return root / "retrain" / "final"; }
  std::filesystem::path averaged() const { return root / "average" / "model"; }
  std::filesystem::path early_averaged() const { return root / "average" / "early"; }
  std::filesystem::path requantized() const { return root / "finetune" / "requantized"; }
  std::filesystem::path finetuned_shadow() const { return root / "finetune" / "shadow"; }
  std::filesystem::path final_model() const { return root / "finetune" / "final"; }
  std::filesystem::path metrics_csv() const { return root / "metrics.csv"; }
  std::filesystem::path summary() const { return root / "summary.txt"; }
};

enum class Stage { kPretrain, kQuantize, kRetrain, kAverage, kFinetune, kReport };
std::string_view to_string(Stage stage);

/// One pipeline run bound to its output directory. Stages read their inputs
/// from disk, skip work whose artifacts already exist, and rethrow failures
/// prefixed with the stage name.
class Pipeline {
 public:
  /// Resolves `cfg` and pins it to the output directory: the resolved config
  /// is written on first use and must match on every later use.
  explicit Pipeline(RunConfig cfg, std::ostream* log = nullptr);

  const RunConfig& config() const noexcept { return cfg_; }
  const RunLayout& layout() const noexcept { return layout_; }
  const DatasetPair& data();

  /// Returns false when the stage was already complete.
  bool run(Stage stage);
  /// pretrain -> quantize -> retrain -> average -> finetune -> report.
  void run_all();

 private:
  void pretrain();
  void quantize();
  void retrain();
  void average();
  void finetune();
  void report();
  bool complete(Stage stage) const;
  void say(const std::string& line);

  RunConfig cfg_;
  RunLayout layout_;
  std::optional<DatasetPair> data_;
  std::ostream* log_;
};

/// Rows of the metrics report: one per averaged capture, then Avg., Direct
/// and Fine-tune.
struct ReportRow {
  std::string label;
  int epoch = -1;
  int bits = 0;
  Metrics train;
  std::optional<Metrics> test;
};

struct GroupComparison {
  std::vector<int> epochs;
  Metrics averaged;  // on the held-out split when present, else train
  Metrics requantized;
  double drop() const { return averaged.accuracy - requantized.accuracy; }
};

struct RunReport {
  std::vector<ReportRow> rows;
  Metrics full_precision;
  Metrics direct_quantized;
  GroupComparison early;
  GroupComparison late;
  std::string split;  // split used by the headline numbers
};

/// Recomputes every reported number from the persisted checkpoints.
RunReport build_report(const RunConfig& resolved, const DatasetPair& data);
void write_metrics_csv(const RunReport& report, const std::filesystem::path& path);
void write_summary(const RunReport& report, const RunConfig& resolved,
                   const std::filesystem::path& path);
std::vector<ReportRow> read_metrics_csv(const std::filesystem::path& path);

/// Loss surface through three checkpoints. Defaults to the last three
/// captures of the run's bank, quantized onto the bank grid.
struct LosscapeRequest {
  std::vector<std::filesystem::path> anchors;  // empty or exactly three
  SurfaceMode mode = SurfaceMode::kQuantized;
  std::size_t res_x = 41;
  std::size_t res_y = 41;
  double margin = 0.2;
  std::string split = "train";
  std::size_t workers = 1;
  std::filesystem::path out;  // defaults to <run>/losscape/<mode>.csv
};
std::filesystem::path run_losscape(const RunConfig& resolved, const DatasetPair& data,
                                   const LosscapeRequest& request);

}  // namespace sqwa
