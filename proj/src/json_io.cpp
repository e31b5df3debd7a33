// Copyright 2026 The SQWA Lab Authors
// Licensed under the Apache License, Version 2.0

#include "sqwa/json_io.hpp"

#include <fstream>

#include "sqwa/error.hpp"

namespace sqwa {

using nlohmann::json;

json to_json(const LayerSpec& l) {
  json j{{"kind", std::string(to_string(l.kind))}};
  switch (l.kind) {
    case LayerKind::kDense:
      j["in"] = l.in_features;
      j["out"] = l.out_features;
      j["bias"] = l.has_bias;
      break;
    case LayerKind::kConv2d:
      j["in_channels"] = l.in_channels;
      j["out_channels"] = l.out_channels;
      j["kernel"] = l.kernel;
      j["padding"] = l.padding;
      j["bias"] = l.has_bias;
      break;
    default:
      break;
  }
  return j;
}

LayerSpec layer_from_json(const json& j) {
  try {
    const LayerKind kind = layer_kind_from_string(j.at("kind").get<std::string>());
    switch (kind) {
      case LayerKind::kDense:
        return LayerSpec::dense(j.at("in").get<std::size_t>(), j.at("out").get<std::size_t>(),
                                j.value("bias", true));
      case LayerKind::kConv2d:
        return LayerSpec::conv2d(j.at("in_channels").get<std::size_t>(),
                                 j.at("out_channels").get<std::size_t>(),
                                 j.at("kernel").get<std::size_t>(), j.value("padding", std::size_t{0}),
                                 j.value("bias", true));
      case LayerKind::kRelu:
        return LayerSpec::relu();
      case LayerKind::kFlatten:
        return LayerSpec::flatten();
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kInvalidArgument, std::string("bad layer spec: ") + e.what());
  }
  fail(ErrorCode::kInvalidArgument, "bad layer spec");
}

json to_json(const Architecture& arch) {
  json layers = json::array();
  for (const auto& l : arch.layers) layers.push_back(to_json(l));
  return {{"input_shape", arch.input_shape}, {"layers", layers}};
}

Architecture architecture_from_json(const json& j) {
  Architecture arch;
  try {
    arch.input_shape = j.at("input_shape").get<Shape>();
    for (const auto& l : j.at("layers")) arch.layers.push_back(layer_from_json(l));
  } catch (const json::exception& e) {
    fail(ErrorCode::kInvalidArgument, std::string("bad network spec: ") + e.what());
  }
  arch.infer_shapes();
  return arch;
}

json to_json(const ScheduleSpec& spec) {
  if (const auto* s = std::get_if<StepDecaySchedule>(&spec)) {
    return {{"kind", "step_decay"},
            {"initial_lr", s->initial_lr},
            {"factor", s->factor},
            {"milestones", s->milestones},
            {"epochs", s->total_epochs}};
  }
  const auto& c = std::get<CyclicalSchedule>(spec);
  return {{"kind", "cyclical"},
          {"max_lr", c.max_lr},
          {"min_lr", c.min_lr},
          {"period", c.period},
          {"intermediate_steps", c.intermediate_steps},
          {"epochs", c.total_epochs}};
}

ScheduleSpec schedule_from_json(const json& j) {
  try {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "step_decay") {
      return StepDecaySchedule{j.at("initial_lr").get<double>(), j.at("factor").get<double>(),
                               j.value("milestones", std::vector<int>{}),
                               j.at("epochs").get<int>()};
    }
    if (kind == "cyclical") {
      return CyclicalSchedule{j.at("max_lr").get<double>(), j.at("min_lr").get<double>(),
                              j.at("period").get<int>(), j.value("intermediate_steps", 1),
                              j.at("epochs").get<int>()};
    }
    fail(ErrorCode::kInvalidArgument, "unknown schedule kind '" + kind + "'");
  } catch (const json::exception& e) {
    fail(ErrorCode::kInvalidArgument, std::string("bad schedule: ") + e.what());
  }
}

json to_json(const Metrics& m) { return {{"loss", m.loss}, {"accuracy", m.accuracy}}; }

Metrics metrics_from_json(const json& j) {
  return {j.at("loss").get<double>(), j.at("accuracy").get<double>()};
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::kUnsupportedFormat, path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path.string());
  out << j.dump(2) << '\n';
  require(static_cast<bool>(out), ErrorCode::kIo, "write failed for " + path.string());
}

}  // namespace sqwa
