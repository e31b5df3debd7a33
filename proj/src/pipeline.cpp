// Copyright 2026 The SQWA Lab Authors
// Licensed under the Apache License, Version 2.0

#include "sqwa/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "sqwa/averaging.hpp"
#include "sqwa/error.hpp"
#include "sqwa/json_io.hpp"
#include "sqwa/qat.hpp"
#include "text_format.hpp"

namespace sqwa {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using detail::format_double;

void check_keys(const json& j, std::initializer_list<std::string_view> allowed,
                std::string_view where) {
  require(j.is_object(), ErrorCode::kInvalidArgument,
          "config: '" + std::string(where) + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    const bool known =
        std::find(allowed.begin(), allowed.end(), std::string_view(key)) != allowed.end();
    require(known, ErrorCode::kInvalidArgument,
            "config: unknown key '" + key + "' in '" + std::string(where) + "'");
  }
}

template <typename T>
void read_field(const json& j, std::string_view key, T& out) {
  if (j.contains(key)) out = j.at(std::string(key)).get<T>();
}

template <typename T>
void read_optional(const json& j, std::string_view key, std::optional<T>& out) {
  if (j.contains(key) && !j.at(std::string(key)).is_null()) out = j.at(std::string(key)).get<T>();
}

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

void write_history(const std::vector<EpochRecord>& history, const fs::path& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path.string());
  out << "epoch,lr,batch_loss,train_loss,train_accuracy,test_loss,test_accuracy\n";
  for (const EpochRecord& r : history) {
    out << r.epoch << ',' << format_double(r.lr) << ',' << format_double(r.mean_batch_loss) << ','
        << format_double(r.train.loss) << ',' << format_double(r.train.accuracy) << ',';
    if (r.test) out << format_double(r.test->loss) << ',' << format_double(r.test->accuracy);
    else out << ',';
    out << '\n';
  }
}

std::string bits_label(int bits) { return std::to_string(bits) + "-bit"; }

Metrics headline(const ReportRow& row) { return row.test ? *row.test : row.train; }

ReportRow evaluate_row(std::string label, int epoch, int bits, const Network& net,
                       const DatasetPair& data) {
  ReportRow row{std::move(label), epoch, bits, evaluate(net, data.train), std::nullopt};
  if (data.test) row.test = evaluate(net, *data.test);
  return row;
}

const Dataset& headline_split(const DatasetPair& data) {
  return data.test ? *data.test : data.train;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

// ---- configuration -------------------------------------------------------

json to_json(const RunConfig& c) {
  const DatasetConfig& d = c.dataset;
  json dataset{{"kind", d.kind}};
  if (d.kind == "blobs") {
    dataset.update({{"num_classes", d.num_classes},
                    {"train_per_class", d.train_per_class},
                    {"test_per_class", d.test_per_class},
                    {"dims", d.dims},
                    {"spread", d.spread}});
  } else {
    dataset.update({{"train_images", d.train_images},
                    {"train_labels", d.train_labels},
                    {"test_images", d.test_images},
                    {"test_labels", d.test_labels},
                    {"train_limit", d.train_limit},
                    {"test_limit", d.test_limit}});
  }
  json pretrain{{"schedule", to_json(ScheduleSpec{c.pretrain.schedule})},
                {"momentum", c.pretrain.momentum},
                {"l2_scale", c.pretrain.l2_scale}};
  if (!c.pretrain.checkpoint.empty()) pretrain["checkpoint"] = c.pretrain.checkpoint;
  return {{"schema_version", c.schema_version},
          {"dataset", dataset},
          {"network", to_json(c.network)},
          {"seed", c.seed},
          {"batch_size", c.batch_size},
          {"pretrain", pretrain},
          {"bits", c.bits},
          {"retrain",
           {{"max_lr", optional_json(c.retrain.max_lr)},
            {"min_lr", optional_json(c.retrain.min_lr)},
            {"period", c.retrain.period},
            {"intermediate_steps", c.retrain.intermediate_steps},
            {"epochs", c.retrain.epochs},
            {"momentum", c.retrain.momentum}}},
          {"average_count", c.average_count},
          {"finetune",
           {{"initial_lr", optional_json(c.finetune.initial_lr)},
            {"epochs", c.finetune.epochs},
            {"decay", c.finetune.decay},
            {"momentum", c.finetune.momentum}}},
          {"output_dir", c.output_dir}};
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  try {
    check_keys(j,
               {"schema_version", "dataset", "network", "seed", "batch_size", "pretrain", "bits",
                "retrain", "average_count", "finetune", "output_dir"},
               "root");
    c.schema_version = j.value("schema_version", kRunConfigSchemaVersion);
    require(c.schema_version == kRunConfigSchemaVersion, ErrorCode::kUnsupportedVersion,
            "config: unsupported schema_version " + std::to_string(c.schema_version));
    if (j.contains("dataset")) {
      const json& d = j["dataset"];
      check_keys(d,
                 {"kind", "num_classes", "train_per_class", "test_per_class", "dims", "spread",
                  "train_images", "train_labels", "test_images", "test_labels", "train_limit",
                  "test_limit"},
                 "dataset");
      DatasetConfig& o = c.dataset;
      read_field(d, "kind", o.kind);
      read_field(d, "num_classes", o.num_classes);
      read_field(d, "train_per_class", o.train_per_class);
      read_field(d, "test_per_class", o.test_per_class);
      read_field(d, "dims", o.dims);
      read_field(d, "spread", o.spread);
      read_field(d, "train_images", o.train_images);
      read_field(d, "train_labels", o.train_labels);
      read_field(d, "test_images", o.test_images);
      read_field(d, "test_labels", o.test_labels);
      read_field(d, "train_limit", o.train_limit);
      read_field(d, "test_limit", o.test_limit);
    }
    require(j.contains("network"), ErrorCode::kInvalidArgument, "config: 'network' is required");
    c.network = architecture_from_json(j["network"]);
    read_field(j, "seed", c.seed);
    read_field(j, "batch_size", c.batch_size);
    if (j.contains("pretrain")) {
      const json& p = j["pretrain"];
      check_keys(p, {"schedule", "momentum", "l2_scale", "checkpoint"}, "pretrain");
      if (p.contains("schedule")) {
        const ScheduleSpec s = schedule_from_json(p["schedule"]);
        require(std::holds_alternative<StepDecaySchedule>(s), ErrorCode::kInvalidArgument,
                "config: the pretrain schedule must be step_decay");
        c.pretrain.schedule = std::get<StepDecaySchedule>(s);
      }
      read_field(p, "momentum", c.pretrain.momentum);
      read_field(p, "l2_scale", c.pretrain.l2_scale);
      read_field(p, "checkpoint", c.pretrain.checkpoint);
    }
    read_field(j, "bits", c.bits);
    if (j.contains("retrain")) {
      const json& r = j["retrain"];
      check_keys(r, {"max_lr", "min_lr", "period", "intermediate_steps", "epochs", "momentum"},
                 "retrain");
      read_optional(r, "max_lr", c.retrain.max_lr);
      read_optional(r, "min_lr", c.retrain.min_lr);
      read_field(r, "period", c.retrain.period);
      read_field(r, "intermediate_steps", c.retrain.intermediate_steps);
      read_field(r, "epochs", c.retrain.epochs);
      read_field(r, "momentum", c.retrain.momentum);
    }
    read_field(j, "average_count", c.average_count);
    if (j.contains("finetune")) {
      const json& f = j["finetune"];
      check_keys(f, {"initial_lr", "epochs", "decay", "momentum"}, "finetune");
      read_optional(f, "initial_lr", c.finetune.initial_lr);
      read_field(f, "epochs", c.finetune.epochs);
      read_field(f, "decay", c.finetune.decay);
      read_field(f, "momentum", c.finetune.momentum);
    }
    read_field(j, "output_dir", c.output_dir);
  } catch (const json::exception& e) {
    fail(ErrorCode::kInvalidArgument, std::string("config: ") + e.what());
  }
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  return run_config_from_json(read_json_file(path));
}

CyclicalSchedule retrain_schedule(const RunConfig& c) {
  require(c.retrain.max_lr && c.retrain.min_lr, ErrorCode::kInvalidArgument,
          "config is not resolved: cycle bounds missing");
  return {*c.retrain.max_lr, *c.retrain.min_lr, c.retrain.period, c.retrain.intermediate_steps,
          c.retrain.epochs};
}

RunConfig resolve(RunConfig c) {
  require(c.dataset.kind == "blobs" || c.dataset.kind == "idx", ErrorCode::kInvalidArgument,
          "config: dataset.kind must be 'blobs' or 'idx'");
  if (c.dataset.kind == "idx")
    require(!c.dataset.train_images.empty() && !c.dataset.train_labels.empty(),
            ErrorCode::kInvalidArgument, "config: idx datasets need train_images/train_labels");
  require(!c.network.layers.empty(), ErrorCode::kInvalidArgument, "config: empty network");
  c.network.infer_shapes();
  require(c.batch_size > 0, ErrorCode::kInvalidArgument, "config: batch_size must be positive");
  levels_count(c.bits);
  validate(ScheduleSpec{c.pretrain.schedule});

  if (!c.retrain.max_lr || !c.retrain.min_lr) {
    const std::vector<double> rates = distinct_rates(c.pretrain.schedule);
    const CycleBounds bounds = derive_cycle_bounds(rates);
    if (!c.retrain.max_lr) c.retrain.max_lr = bounds.max_lr;
    if (!c.retrain.min_lr) c.retrain.min_lr = bounds.min_lr;
  }
  const CyclicalSchedule cyc = retrain_schedule(c);
  const std::vector<int> captures = capture_epochs(ScheduleSpec{cyc});
  require(c.average_count >= 1, ErrorCode::kInvalidArgument,
          "config: average_count must be at least 1");
  require(static_cast<std::size_t>(c.average_count) <= captures.size(),
          ErrorCode::kInvalidArgument,
          "config: average_count " + std::to_string(c.average_count) + " exceeds the " +
              std::to_string(captures.size()) + " capture points of the retrain schedule");
  if (!c.finetune.initial_lr) c.finetune.initial_lr = 0.1 * *c.retrain.max_lr;
  finetune_learning_rates(*c.finetune.initial_lr, c.finetune.epochs, c.finetune.decay);
  require(c.output_dir.size() > 0, ErrorCode::kInvalidArgument, "config: output_dir is empty");
  return c;
}

std::uint64_t stage_seed(std::uint64_t run_seed, std::string_view stage) {
  // FNV-1a over the stage name, mixed with the run seed by splitmix64.
  std::uint64_t h = 1469598103934665603ULL;
  for (char ch : stage) {
    h ^= static_cast<unsigned char>(ch);
    h *= 1099511628211ULL;
  }
  std::uint64_t z = run_seed + 0x9e3779b97f4a7c15ULL * (h | 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

DatasetPair load_datasets(const RunConfig& c) {
  const DatasetConfig& d = c.dataset;
  DatasetPair raw;
  if (d.kind == "blobs") {
    raw.train = synthetic_blobs(d.num_classes, d.train_per_class, d.dims, d.spread,
                                stage_seed(c.seed, "data.train"));
    if (d.test_per_class > 0)
      raw.test = synthetic_blobs(d.num_classes, d.test_per_class, d.dims, d.spread,
                                 stage_seed(c.seed, "data.test"));
  } else {
    raw.train = load_idx(d.train_images, d.train_labels);
    if (d.train_limit > 0) raw.train = take(raw.train, std::min(d.train_limit, raw.train.size()));
    if (!d.test_images.empty()) {
      raw.test = load_idx(d.test_images, d.test_labels);
      if (d.test_limit > 0) raw.test = take(*raw.test, std::min(d.test_limit, raw.test->size()));
    }
  }
  DatasetPair out;
  out.train = normalize(raw.train);
  if (raw.test) {
    out.test = normalize(*raw.test, out.train.normalization);
    out.test->num_classes = std::max(out.test->num_classes, out.train.num_classes);
  }
  const std::size_t classes = c.network.num_classes();
  require(static_cast<std::size_t>(out.train.num_classes) <= classes,
          ErrorCode::kLabelOutOfRange,
          "dataset has " + std::to_string(out.train.num_classes) + " classes but the network "
              "outputs " + std::to_string(classes));
  require(out.train.sample_shape() == c.network.input_shape, ErrorCode::kShapeMismatch,
          "dataset samples are " + shape_string(out.train.sample_shape()) +
              " but the network expects " + shape_string(c.network.input_shape));
  return out;
}

// ---- stages --------------------------------------------------------------

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::kPretrain: return "pretrain";
    case Stage::kQuantize: return "quantize";
    case Stage::kRetrain: return "retrain-cyclical";
    case Stage::kAverage: return "average";
    case Stage::kFinetune: return "finetune";
    case Stage::kReport: return "report";
  }
  return "?";
}

Pipeline::Pipeline(RunConfig cfg, std::ostream* log)
    : cfg_(resolve(std::move(cfg))), layout_{cfg_.output_dir}, log_(log) {
  std::error_code ec;
  fs::create_directories(layout_.root, ec);
  require(!ec, ErrorCode::kIo, "cannot create " + layout_.root.string() + ": " + ec.message());
  const json resolved = to_json(cfg_);
  if (fs::exists(layout_.resolved_config())) {
    const json existing = read_json_file(layout_.resolved_config());
    require(existing == resolved, ErrorCode::kInvalidArgument,
            layout_.root.string() +
                " holds a run with a different resolved configuration; use a new output_dir");
  } else {
    write_json_file(layout_.resolved_config(), resolved);
  }
}

const DatasetPair& Pipeline::data() {
  if (!data_) data_ = load_datasets(cfg_);
  return *data_;
}

void Pipeline::say(const std::string& line) {
  if (log_) *log_ << line << std::endl;
}

bool Pipeline::complete(Stage stage) const {
  switch (stage) {
    case Stage::kPretrain: return checkpoint_exists(layout_.pretrained());
    case Stage::kQuantize: return checkpoint_exists(layout_.direct());
    case Stage::kRetrain: return checkpoint_exists(layout_.retrained());
    case Stage::kAverage: return checkpoint_exists(layout_.early_averaged());
    case Stage::kFinetune: return checkpoint_exists(layout_.final_model());
    case Stage::kReport: return fs::exists(layout_.summary());
  }
  return false;
}

bool Pipeline::run(Stage stage) {
  const std::string name(to_string(stage));
  try {
    if (complete(stage)) {
      say("[" + name + "] complete, skipping");
      return false;
    }
    say("[" + name + "] running");
    switch (stage) {
      case Stage::kPretrain: pretrain(); break;
      case Stage::kQuantize: quantize(); break;
      case Stage::kRetrain: retrain(); break;
      case Stage::kAverage: average(); break;
      case Stage::kFinetune: finetune(); break;
      case Stage::kReport: report(); break;
    }
    return true;
  } catch (const Error& e) {
    throw Error(e.code(), name + ": " + e.what());
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kIo, name + ": " + e.what());
  }
}

void Pipeline::run_all() {
  for (Stage s : {Stage::kPretrain, Stage::kQuantize, Stage::kRetrain, Stage::kAverage,
                  Stage::kFinetune, Stage::kReport})
    run(s);
}

void Pipeline::pretrain() {
  const ScheduleSpec spec = cfg_.pretrain.schedule;
  Network net;
  Provenance prov{"pretrain", cfg_.seed, -1, 0.0, describe(spec)};
  if (!cfg_.pretrain.checkpoint.empty()) {
    net = load_network(cfg_.pretrain.checkpoint);
    require(net.arch == cfg_.network, ErrorCode::kShapeMismatch,
            "supplied checkpoint " + cfg_.pretrain.checkpoint + " does not match the network");
    prov.stage = "pretrain(supplied)";
  } else {
    const DatasetPair& d = data();
    const TrainOptions opts{cfg_.batch_size, stage_seed(cfg_.seed, "pretrain"),
                            cfg_.pretrain.momentum, cfg_.pretrain.l2_scale};
    PretrainResult r = sqwa::pretrain(init_weights(cfg_.network, stage_seed(cfg_.seed, "init")),
                                      d.train, cfg_.pretrain.schedule, opts,
                                      d.test ? &*d.test : nullptr);
    fs::create_directories(layout_.root / "pretrain");
    write_history(r.history, layout_.root / "pretrain" / "history.csv");
    net = std::move(r.net);
    prov.epoch = cfg_.pretrain.schedule.total_epochs - 1;
    prov.lr = lr_at(spec, prov.epoch);
  }
  save(to_storage_precision(std::move(net)), layout_.pretrained(), prov);
}

void Pipeline::quantize() {
  const Network net = load_network(layout_.pretrained());
  const ShadowModel model = ShadowModel::from_direct_quantization(net, cfg_.bits);
  save(model, layout_.direct(), Provenance{"quantize", cfg_.seed, -1, 0.0, ""});
}

void Pipeline::retrain() {
  const DatasetPair& d = data();
  const ScheduleSpec spec = retrain_schedule(cfg_);
  const TrainOptions opts{cfg_.batch_size, stage_seed(cfg_.seed, "retrain"),
                          cfg_.retrain.momentum, 0.0};
  RetrainResult r = sqwa::retrain(load_shadow(layout_.direct()), d.train, spec, opts,
                                  d.test ? &*d.test : nullptr);
  save_bank(r.bank, layout_.bank());
  write_history(r.history, layout_.root / "retrain" / "history.csv");
  const int last = total_epochs(spec) - 1;
  save(r.model, layout_.retrained(),
       Provenance{"retrain", cfg_.seed, last, lr_at(spec, last), describe(spec)});
}

void Pipeline::average() {
  const CaptureBank bank = load_bank(layout_.bank());
  const auto n = static_cast<std::size_t>(cfg_.average_count);
  require(bank.size() >= n, ErrorCode::kBankIncomplete,
          "bank holds " + std::to_string(bank.size()) + " captures, need " + std::to_string(n));
  const AveragedModel late = average_models(bank, cfg_.average_count);
  save(late, layout_.averaged(), Provenance{"average", cfg_.seed, late.epochs.back(), 0.0, ""});
  const AveragedModel early =
      average_epoch_range(bank, bank.entries().front().epoch, bank.entries()[n - 1].epoch);
  save(requantize_averaged(early, cfg_.bits), layout_.root / "average" / "early_direct",
       Provenance{"average(early,requantized)", cfg_.seed, early.epochs.back(), 0.0, ""});
  save(early, layout_.early_averaged(),
       Provenance{"average(early)", cfg_.seed, early.epochs.back(), 0.0, ""});
}

void Pipeline::finetune() {
  const DatasetPair& d = data();
  const AveragedModel avg = load_averaged(layout_.averaged());
  const QuantizedModel direct = requantize_averaged(avg, cfg_.bits);
  save(direct, layout_.requantized(), Provenance{"requantize", cfg_.seed, -1, 0.0, ""});
  const TrainOptions opts{cfg_.batch_size, stage_seed(cfg_.seed, "finetune"),
                          cfg_.finetune.momentum, 0.0};
  const ShadowModel tuned =
      sqwa::finetune(ShadowModel(avg.net, direct.configs), d.train, *cfg_.finetune.initial_lr,
                     cfg_.finetune.epochs, cfg_.finetune.decay, opts);
  const Provenance prov{"finetune", cfg_.seed, cfg_.finetune.epochs - 1,
                        *cfg_.finetune.initial_lr, ""};
  save(tuned, layout_.finetuned_shadow(), prov);
  // The final model is the applied side of the persisted shadow, so it is
  // exactly what reloading the shadow checkpoint yields.
  save(load_shadow(layout_.finetuned_shadow()).applied(), layout_.final_model(), prov);
}

void Pipeline::report() {
  const RunReport r = build_report(cfg_, data());
  write_metrics_csv(r, layout_.metrics_csv());
  write_summary(r, cfg_, layout_.summary());
  if (log_) {
    std::ifstream in(layout_.summary());
    *log_ << in.rdbuf();
  }
}

// ---- reporting -----------------------------------------------------------

RunReport build_report(const RunConfig& c, const DatasetPair& data) {
  const RunLayout layout{c.output_dir};
  RunReport r;
  r.split = data.test ? "test" : "train";
  const Dataset& held = headline_split(data);
  r.full_precision = evaluate(load_network(layout.pretrained()), held);
  r.direct_quantized = evaluate(load_shadow(layout.direct()).applied().net, held);

  const CaptureBank bank = load_bank(layout.bank());
  const auto n = static_cast<std::size_t>(c.average_count);
  const auto& entries = bank.entries();
  for (std::size_t i = entries.size() - n; i < entries.size(); ++i)
    r.rows.push_back(evaluate_row("Epoch " + std::to_string(entries[i].epoch) + " (" +
                                      bits_label(c.bits) + ")",
                                  entries[i].epoch, c.bits, entries[i].model.net, data));

  const AveragedModel late = load_averaged(layout.averaged());
  r.rows.push_back(evaluate_row("Avg. (" + bits_label(late.effective_bits) + ")", -1,
                                late.effective_bits, late.net, data));
  const QuantizedModel direct = load_quantized(layout.requantized());
  r.rows.push_back(
      evaluate_row("Direct (" + bits_label(c.bits) + ")", -1, c.bits, direct.net, data));
  r.rows.push_back(evaluate_row("Fine-tune (" + bits_label(c.bits) + ")", -1, c.bits,
                                load_quantized(layout.final_model()).net, data));

  const AveragedModel early = load_averaged(layout.early_averaged());
  r.early = {early.epochs, evaluate(early.net, held),
             evaluate(load_quantized(layout.root / "average" / "early_direct").net, held)};
  r.late = {late.epochs, evaluate(late.net, held), evaluate(direct.net, held)};
  return r;
}

void write_metrics_csv(const RunReport& report, const fs::path& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path.string());
  out << "row,epoch,bits,train_loss,train_accuracy,test_loss,test_accuracy\n";
  for (const ReportRow& row : report.rows) {
    out << row.label << ',' << row.epoch << ',' << row.bits << ',' << format_double(row.train.loss)
        << ',' << format_double(row.train.accuracy) << ',';
    if (row.test) out << format_double(row.test->loss) << ',' << format_double(row.test->accuracy);
    else out << ',';
    out << '\n';
  }
  require(static_cast<bool>(out), ErrorCode::kIo, "write failed for " + path.string());
}

std::vector<ReportRow> read_metrics_csv(const fs::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<ReportRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    require(cells.size() == 7, ErrorCode::kUnsupportedFormat,
            path.string() + ": malformed row '" + line + "'");
    ReportRow row;
    row.label = cells[0];
    row.epoch = std::stoi(cells[1]);
    row.bits = std::stoi(cells[2]);
    row.train = {detail::parse_double(cells[3]), detail::parse_double(cells[4])};
    if (!cells[5].empty())
      row.test = Metrics{detail::parse_double(cells[5]), detail::parse_double(cells[6])};
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_summary(const RunReport& r, const RunConfig& c, const fs::path& path) {
  auto pct = [](double acc) {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(2);
    s << 100.0 * acc;
    return s.str();
  };
  std::vector<double> capture_acc;
  for (const ReportRow& row : r.rows)
    if (row.epoch >= 0) capture_acc.push_back(headline(row).accuracy);
  const double mean =
      std::accumulate(capture_acc.begin(), capture_acc.end(), 0.0) / capture_acc.size();
  const double best = *std::max_element(capture_acc.begin(), capture_acc.end());
  const auto find = [&](std::string_view prefix) -> const ReportRow& {
    for (const ReportRow& row : r.rows)
      if (row.label.rfind(prefix, 0) == 0) return row;
    fail(ErrorCode::kInvalidArgument, "report lacks row " + std::string(prefix));
  };

  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path.string());
  out << "SQWA run, seed " << c.seed << ", " << bits_label(c.bits) << " weights, average of "
      << c.average_count << " captures (accuracy % on the " << r.split << " split)\n";
  const auto line = [&](const std::string& name, const std::string& value) {
    out << "  " << name << std::string(name.size() < 26 ? 26 - name.size() : 1, ' ') << value
        << '\n';
  };
  line("full precision", pct(r.full_precision.accuracy));
  line("direct quantization", pct(r.direct_quantized.accuracy) + "  (drop " +
                                  pct(r.full_precision.accuracy - r.direct_quantized.accuracy) +
                                  ")");
  line("captures mean / best", pct(mean) + " / " + pct(best));
  for (std::string_view prefix : {"Avg.", "Direct", "Fine-tune"})
    line(find(prefix).label, pct(headline(find(prefix)).accuracy));
  const auto group = [&](const char* name, const GroupComparison& g) {
    out << "  " << name << " group epochs " << g.epochs.front() << ".." << g.epochs.back()
        << ": averaged " << pct(g.averaged.accuracy) << ", re-quantized "
        << pct(g.requantized.accuracy) << ", drop " << pct(g.drop()) << '\n';
  };
  group("early", r.early);
  group("late ", r.late);
  require(static_cast<bool>(out), ErrorCode::kIo, "write failed for " + path.string());
}

// ---- loss surfaces -------------------------------------------------------

fs::path run_losscape(const RunConfig& c, const DatasetPair& data, const LosscapeRequest& req) {
  const RunLayout layout{c.output_dir};
  std::vector<Network> anchors;
  std::vector<QuantizerConfig> configs;
  // Quantized surfaces are spanned by the full-precision shadows the anchors
  // were quantized from, when those are known.
  if (req.anchors.empty()) {
    const CaptureBank bank = load_bank(layout.bank());
    require(bank.size() >= 3, ErrorCode::kInvalidArgument,
            "losscape needs three captures, bank has " + std::to_string(bank.size()));
    for (std::size_t i = bank.size() - 3; i < bank.size(); ++i) {
      const CaptureEntry& e = bank.entries()[i];
      const bool use_shadow = req.mode == SurfaceMode::kQuantized && e.shadow;
      anchors.push_back(use_shadow ? *e.shadow : e.model.net);
    }
    configs = bank.configs();
  } else {
    require(req.anchors.size() == 3, ErrorCode::kInvalidArgument,
            "losscape takes exactly three anchor checkpoints");
    for (const fs::path& p : req.anchors) {
      const Checkpoint ckpt = load(p);
      const auto* shadow = std::get_if<ShadowModel>(&ckpt.object);
      if (shadow && req.mode == SurfaceMode::kQuantized) anchors.push_back(shadow->shadow());
      else anchors.push_back(evaluation_network(ckpt));
      if (configs.empty() && ckpt.manifest.quantization) configs = *ckpt.manifest.quantization;
    }
    if (configs.empty() && req.mode == SurfaceMode::kQuantized)
      configs = direct_quantize_model(anchors.front(), c.bits).configs;
  }
  require(req.split == "train" || (req.split == "test" && data.test), ErrorCode::kInvalidArgument,
          "losscape split must be 'train' or an available 'test'");
  const Dataset& ds = req.split == "train" ? data.train : *data.test;
  const LossPlane plane = build_plane(anchors[0], anchors[1], anchors[2]);
  const GridSpec grid = default_grid_spec(plane, req.res_x, req.res_y, req.margin);
  SurfaceOptions opts{req.mode, {}, req.split, req.workers};
  if (req.mode == SurfaceMode::kQuantized) opts.configs = configs;
  const SurfaceGrid surface = evaluate_surface(plane, anchors[0], ds, grid, opts);
  fs::path out = req.out;
  if (out.empty()) out = layout.root / "losscape" / (std::string(to_string(req.mode)) + ".csv");
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  export_grid(surface, out);
  return out;
}

}  // namespace sqwa
