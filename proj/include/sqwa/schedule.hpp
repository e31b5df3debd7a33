// Copyright 2026 The SQWA Lab Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <span>
#include <string>
#include <variant>
#include <vector>

namespace sqwa {

/// lr(e) = initial_lr * factor^(number of milestones <= e).
struct StepDecaySchedule {
  double initial_lr = 0.1;
  double factor = 0.1;
  std::vector<int> milestones;
  int total_epochs = 1;

  friend bool operator==(const StepDecaySchedule&, const StepDecaySchedule&) = default;
};

/// Discrete cyclical program: each period of `period` epochs walks a
/// descending ladder of `intermediate_steps + 2` geometrically spaced rates
/// from max_lr to min_lr, then jumps back to max_lr. Every rung dwells
/// period / rungs epochs; the remainder goes to min_lr.
struct CyclicalSchedule {
  double max_lr = 0.01;
  double min_lr = 0.0001;
  int period = 6;
  int intermediate_steps = 1;
  int total_epochs = 6;

  friend bool operator==(const CyclicalSchedule&, const CyclicalSchedule&) = default;
};

using ScheduleSpec = std::variant<StepDecaySchedule, CyclicalSchedule>;

struct CycleBounds {
  double max_lr = 0.0;
  double min_lr = 0.0;
};

/// (max(lrs) / 10, min(lrs) / 10); rejects empty, nonpositive, or
/// single-valued input because the cycle would collapse.
CycleBounds derive_cycle_bounds(std::span<const double> full_precision_lrs);

/// Every distinct rate a step-decay program emits, in order.
std::vector<double> distinct_rates(const StepDecaySchedule& spec);

void validate(const ScheduleSpec& spec);
int total_epochs(const ScheduleSpec& spec);
double lr_at(const ScheduleSpec& spec, int epoch);
/// The rungs of one cyclical period, highest first.
std::vector<double> cycle_ladder(const CyclicalSchedule& spec);
/// Last epoch of every complete period (where lr = min_lr), ascending.
std::vector<int> capture_epochs(const ScheduleSpec& spec);
/// Short stable identifier recorded in checkpoint provenance.
std::string describe(const ScheduleSpec& spec);

}  // namespace sqwa
