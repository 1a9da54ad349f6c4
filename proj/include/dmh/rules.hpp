#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "dmh/sim.hpp"

namespace dmh {

inline constexpr std::array<RuleId, kRuleCount> kAllRules = {RuleId::kFCFS, RuleId::kEDD, RuleId::kNVF,
                                                             RuleId::kSTD};

std::string_view to_string(RuleId rule);

/// Picks a task for `vehicle` from `pool` (indices into Instance::tasks).
///   FCFS: earliest arrival
///   EDD:  earliest due date (arrival + expiry)
///   NVF:  shortest empty trip to the pickup
///   STD:  shortest total trip (to pickup, then laden to delivery)
/// Ties go to the lowest task id. Throws Error on an empty pool.
std::size_t select_task(RuleId rule, std::span<const std::size_t> pool, const VehicleStatus& vehicle,
                        const Instance& inst);

enum class BaselineKind { kFCFS, kEDD, kNVF, kSTD, kMIX, kRandom };

std::string_view to_string(BaselineKind kind);
std::optional<BaselineKind> parse_baseline(std::string_view name);

/// Fixed-rule baselines always dispatch for the lowest-index Idle vehicle.
/// MIX draws the rule uniformly per decision; Random draws a uniform
/// (task, Idle vehicle) pair. Draws use the episode generator, so the episode
/// seed passed to run_episode fixes the trace.
DecisionFn baseline_policy(BaselineKind kind);

}  // namespace dmh
