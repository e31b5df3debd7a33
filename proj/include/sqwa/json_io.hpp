// Copyright 2026 The SQWA Lab Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "sqwa/network.hpp"
#include "sqwa/quantizer.hpp"
#include "sqwa/schedule.hpp"

namespace sqwa {

nlohmann::json to_json(const LayerSpec& layer);
LayerSpec layer_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Architecture& arch);
Architecture architecture_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ScheduleSpec& spec);
ScheduleSpec schedule_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Metrics& m);
Metrics metrics_from_json(const nlohmann::json& j);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace sqwa
