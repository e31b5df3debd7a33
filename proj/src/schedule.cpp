// Copyright 2026 The SQWA Lab Authors
// Licensed under the Apache License, Version 2.0

#include "sqwa/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sqwa/error.hpp"

namespace sqwa {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

int rung_count(const CyclicalSchedule& s) { return s.intermediate_steps + 2; }

void validate_step_decay(const StepDecaySchedule& s) {
  require(s.initial_lr > 0.0 && std::isfinite(s.initial_lr), ErrorCode::kInvalidArgument,
          "step decay initial lr must be positive");
  require(s.factor > 0.0 && s.factor <= 1.0, ErrorCode::kInvalidArgument,
          "step decay factor must lie in (0, 1]");
  require(s.total_epochs >= 1, ErrorCode::kInvalidArgument, "schedule needs at least one epoch");
  require(std::is_sorted(s.milestones.begin(), s.milestones.end()),
          ErrorCode::kInvalidArgument, "milestones must be ascending");
  require(s.milestones.empty() || s.milestones.front() > 0, ErrorCode::kInvalidArgument,
          "milestones must be positive epochs");
}

void validate_cyclical(const CyclicalSchedule& s) {
  require(s.min_lr > 0.0 && s.max_lr > s.min_lr && std::isfinite(s.max_lr),
          ErrorCode::kInvalidArgument, "cyclical schedule needs max_lr > min_lr > 0");
  require(s.intermediate_steps == 1 || s.intermediate_steps == 2,
          ErrorCode::kInvalidArgument, "cyclical schedule takes 1 or 2 intermediate steps");
  require(s.period >= rung_count(s), ErrorCode::kInvalidArgument,
          "cycle period " + std::to_string(s.period) + " cannot hold " +
              std::to_string(rung_count(s)) + " learning-rate rungs");
  require(s.total_epochs >= 1, ErrorCode::kInvalidArgument, "schedule needs at least one epoch");
}

}  // namespace

CycleBounds derive_cycle_bounds(std::span<const double> full_precision_lrs) {
  require(!full_precision_lrs.empty(), ErrorCode::kInvalidArgument,
          "need at least one full-precision learning rate");
  for (double lr : full_precision_lrs)
    require(lr > 0.0 && std::isfinite(lr), ErrorCode::kInvalidArgument,
            "full-precision learning rates must be positive");
  const auto [lo, hi] = std::minmax_element(full_precision_lrs.begin(), full_precision_lrs.end());
  require(*hi > *lo, ErrorCode::kDegenerate,
          "cycle bounds collapse: max and min learning rate coincide");
  return {*hi / 10.0, *lo / 10.0};
}

std::vector<double> distinct_rates(const StepDecaySchedule& spec) {
  validate_step_decay(spec);
  std::vector<double> out;
  for (int e = 0; e < spec.total_epochs; ++e) {
    const double lr = lr_at(spec, e);
    if (out.empty() || out.back() != lr) out.push_back(lr);
  }
  return out;
}

void validate(const ScheduleSpec& spec) {
  std::visit(Overloaded{[](const StepDecaySchedule& s) { validate_step_decay(s); },
                        [](const CyclicalSchedule& s) { validate_cyclical(s); }},
             spec);
}

int total_epochs(const ScheduleSpec& spec) {
  return std::visit([](const auto& s) { return s.total_epochs; }, spec);
}

std::vector<double> cycle_ladder(const CyclicalSchedule& spec) {
  validate_cyclical(spec);
  const int rungs = rung_count(spec);
  std::vector<double> ladder(static_cast<std::size_t>(rungs));
  const double ratio = spec.min_lr / spec.max_lr;
  for (int i = 0; i < rungs; ++i) {
    ladder[static_cast<std::size_t>(i)] =
        i == 0           ? spec.max_lr
        : i == rungs - 1 ? spec.min_lr
                         : spec.max_lr * std::pow(ratio, static_cast<double>(i) / (rungs - 1));
  }
  return ladder;
}

double lr_at(const ScheduleSpec& spec, int epoch) {
  validate(spec);
  require(epoch >= 0 && epoch < total_epochs(spec), ErrorCode::kInvalidArgument,
          "epoch " + std::to_string(epoch) + " outside schedule of " +
              std::to_string(total_epochs(spec)) + " epochs");
  return std::visit(
      Overloaded{
          [&](const StepDecaySchedule& s) {
            const auto passed = std::count_if(s.milestones.begin(), s.milestones.end(),
                                              [&](int m) { return epoch >= m; });
            return s.initial_lr * std::pow(s.factor, static_cast<double>(passed));
          },
          [&](const CyclicalSchedule& s) {
            const std::vector<double> ladder = cycle_ladder(s);
            const int dwell = s.period / rung_count(s);
            const int position = epoch % s.period;
            const int rung = std::min(position / dwell, rung_count(s) - 1);
            return ladder[static_cast<std::size_t>(rung)];
          }},
      spec);
}

std::vector<int> capture_epochs(const ScheduleSpec& spec) {
  validate(spec);
  const auto* cyc = std::get_if<CyclicalSchedule>(&spec);
  require(cyc != nullptr, ErrorCode::kInvalidArgument,
          "capture epochs are defined only for cyclical schedules");
  std::vector<int> out;
  for (int end = cyc->period - 1; end < cyc->total_epochs; end += cyc->period) out.push_back(end);
  return out;
}

std::string describe(const ScheduleSpec& spec) {
  std::ostringstream os;
  os.precision(17);
  std::visit(Overloaded{[&](const StepDecaySchedule& s) {
                          os << "step_decay(lr=" << s.initial_lr << ",factor=" << s.factor
                             << ",milestones=";
                          for (std::size_t i = 0; i < s.milestones.size(); ++i)
                            os << (i ? "/" : "") << s.milestones[i];
                          os << ",epochs=" << s.total_epochs << ")";
                        },
                        [&](const CyclicalSchedule& s) {
                          os << "cyclical(max=" << s.max_lr << ",min=" << s.min_lr
                             << ",period=" << s.period << ",steps=" << s.intermediate_steps
                             << ",epochs=" << s.total_epochs << ")";
                        }},
             spec);
  return os.str();
}

}  // namespace sqwa
