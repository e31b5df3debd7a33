// Copyright 2026 The SQWA Lab Authors
// Licensed under the Apache License, Version 2.0

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>
#include <string>
#include <vector>

#include "sqwa/averaging.hpp"
#include "sqwa/checkpoint.hpp"
#include "sqwa/error.hpp"
#include "sqwa/pipeline.hpp"
#include "sqwa/quantizer.hpp"
#include "sqwa/schedule.hpp"

namespace py = pybind11;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

sqwa::Tensor to_tensor(const DoubleArray& a) {
  sqwa::Shape shape(a.shape(), a.shape() + a.ndim());
  return sqwa::Tensor(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

DoubleArray to_array(const sqwa::Tensor& t) {
  DoubleArray out(std::vector<py::ssize_t>(t.shape().begin(), t.shape().end()));
  std::copy(t.storage().begin(), t.storage().end(), out.mutable_data());
  return out;
}

sqwa::RunConfig configured(const std::filesystem::path& config,
                           const std::optional<std::filesystem::path>& output_dir,
                           std::optional<std::uint64_t> seed) {
  sqwa::RunConfig cfg = sqwa::load_run_config(config);
  if (output_dir) cfg.output_dir = output_dir->string();
  if (seed) cfg.seed = *seed;
  return cfg;
}

py::dict metrics_dict(const sqwa::Metrics& m) {
  py::dict d;
  d["loss"] = m.loss;
  d["accuracy"] = m.accuracy;
  return d;
}

py::object json_to_python(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

}  // namespace

PYBIND11_MODULE(_sqwa, m) {
  m.doc() = "Quantized weight averaging lab: quantizer, schedules and the training pipeline.";

  py::exception<sqwa::Error>(m, "SqwaError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const sqwa::Error& e) {
      py::object type = py::module_::import("sqwa._sqwa").attr("SqwaError");
      py::object instance = type(py::str(e.what()));
      instance.attr("code") = py::str(std::string(sqwa::to_string(e.code())));
      PyErr_SetObject(type.ptr(), instance.ptr());
    }
  });

  m.def("levels_count", &sqwa::levels_count, py::arg("bits"));
  m.def("effective_bits", &sqwa::effective_bits, py::arg("n"), py::arg("base_bits") = 2,
        "Smallest width whose symmetric grid holds the mean of n captures.");

  m.def(
      "quantize",
      [](const DoubleArray& w, int bits, double step) {
        return to_array(sqwa::quantize_tensor(to_tensor(w), {bits, step}));
      },
      py::arg("weights"), py::arg("bits"), py::arg("step"));
  m.def(
      "quantize_levels",
      [](const DoubleArray& w, int bits, double step) {
        return sqwa::quantize_levels(to_tensor(w), {bits, step});
      },
      py::arg("weights"), py::arg("bits"), py::arg("step"));
  m.def(
      "select_step_size",
      [](const DoubleArray& w, int bits) { return sqwa::select_step_size(to_tensor(w), bits); },
      py::arg("weights"), py::arg("bits"), "MSE-optimal step size for a weight tensor.");

  m.def(
      "derive_cycle_bounds",
      [](const std::vector<double>& lrs) {
        const sqwa::CycleBounds b = sqwa::derive_cycle_bounds(lrs);
        return py::make_tuple(b.max_lr, b.min_lr);
      },
      py::arg("full_precision_lrs"));
  m.def(
      "cyclical_learning_rates",
      [](double max_lr, double min_lr, int period, int intermediate_steps, int epochs) {
        const sqwa::ScheduleSpec s = sqwa::CyclicalSchedule{max_lr, min_lr, period, intermediate_steps, epochs};
        sqwa::validate(s);
        std::vector<double> lrs;
        for (int e = 0; e < epochs; ++e) lrs.push_back(sqwa::lr_at(s, e));
        return lrs;
      },
      py::arg("max_lr"), py::arg("min_lr"), py::arg("period"), py::arg("intermediate_steps") = 1,
      py::arg("epochs"));
  m.def(
      "capture_epochs",
      [](double max_lr, double min_lr, int period, int intermediate_steps, int epochs) {
        return sqwa::capture_epochs(
            sqwa::CyclicalSchedule{max_lr, min_lr, period, intermediate_steps, epochs});
      },
      py::arg("max_lr"), py::arg("min_lr"), py::arg("period"), py::arg("intermediate_steps") = 1,
      py::arg("epochs"));
  m.def("finetune_learning_rates", &sqwa::finetune_learning_rates, py::arg("initial_lr"),
        py::arg("epochs"), py::arg("decay") = 0.1);

  m.def(
      "load_config",
      [](const std::filesystem::path& path) {
        return json_to_python(sqwa::to_json(sqwa::resolve(sqwa::load_run_config(path))));
      },
      py::arg("path"), "Resolved run configuration as a dict.");

  m.def(
      "run_pipeline",
      [](const std::filesystem::path& config, std::optional<std::filesystem::path> output_dir,
         std::optional<std::uint64_t> seed) {
        sqwa::Pipeline p(configured(config, output_dir, seed));
        {
          py::gil_scoped_release release;
          p.run_all();
        }
        const sqwa::RunReport r = sqwa::build_report(p.config(), p.data());
        py::dict out;
        out["output_dir"] = p.layout().root;
        out["split"] = r.split;
        out["full_precision"] = metrics_dict(r.full_precision);
        out["direct_quantized"] = metrics_dict(r.direct_quantized);
        py::list rows;
        for (const sqwa::ReportRow& row : r.rows) {
          py::dict d;
          d["label"] = row.label;
          d["epoch"] = row.epoch;
          d["bits"] = row.bits;
          d["train"] = metrics_dict(row.train);
          d["test"] = row.test ? py::object(metrics_dict(*row.test)) : py::none();
          rows.append(d);
        }
        out["rows"] = rows;
        out["early_drop"] = r.early.drop();
        out["late_drop"] = r.late.drop();
        return out;
      },
      py::arg("config"), py::arg("output_dir") = py::none(), py::arg("seed") = py::none(),
      "Runs every stage (resuming finished ones) and returns the report.");

  m.def(
      "evaluate_checkpoint",
      [](const std::filesystem::path& config, const std::filesystem::path& checkpoint,
         const std::string& split) {
        const sqwa::DatasetPair data =
            sqwa::load_datasets(sqwa::resolve(sqwa::load_run_config(config)));
        const sqwa::Network net = sqwa::evaluation_network(sqwa::load(checkpoint));
        if (split == "train") return metrics_dict(sqwa::evaluate(net, data.train));
        sqwa::require(split == "test" && data.test.has_value(), sqwa::ErrorCode::kInvalidArgument,
                      "unknown or absent split '" + split + "'");
        return metrics_dict(sqwa::evaluate(net, *data.test));
      },
      py::arg("config"), py::arg("checkpoint"), py::arg("split") = "train");
}
