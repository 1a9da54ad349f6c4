#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "dmh/instance.hpp"
#include "dmh/rng.hpp"

namespace dmh {

enum class VehicleState { kIdle, kWorking, kBroken };

/// The four classic dispatching rules. The numeric order is part of the
/// action encoding and must not change.
enum class RuleId : int { kFCFS = 0, kEDD = 1, kNVF = 2, kSTD = 3 };
inline constexpr std::size_t kRuleCount = 4;

struct VehicleStatus {
  VehicleState state = VehicleState::kIdle;
  // Idle/Broken: where the vehicle stands. Working: the site it departed from
  // when the assignment started.
  std::size_t site = 0;
  // Working: completion time. Broken: repair completion time.
  Time busy_until = 0.0;
  // Working only.
  std::optional<std::size_t> task;
  Time assigned_at = 0.0;
};

struct ServedTask {
  std::size_t task = 0;  // index into Instance::tasks
  Time finish = 0.0;
};

/// Live state of one episode. Task references are indices into
/// Instance::tasks; `pool` is kept sorted ascending.
struct SimState {
  Time clock = 0.0;
  std::size_t next_release = 0;  // tasks[next_release..] are still pending
  std::vector<std::size_t> pool;
  std::vector<VehicleStatus> vehicles;
  std::vector<std::vector<ServedTask>> history;  // per vehicle, in service order
  std::vector<std::size_t> breakdown_order;       // breakdown indices sorted by time
  std::size_t next_breakdown = 0;
  std::size_t served = 0;

  bool terminal(const Instance& inst) const noexcept { return served == inst.task_count(); }
  std::size_t assigned_count() const noexcept;
  std::size_t pending_count(const Instance& inst) const noexcept { return inst.task_count() - next_release; }
  bool any_idle() const noexcept;
  /// Time at which the vehicle can next take an assignment (clock when Idle).
  Time available_at(std::size_t vehicle) const;
};

SimState initial_state(const Instance& inst);

/// Applies every event due up to the next decision point. Returns false when
/// the episode is over (all tasks served); then the clock is left unchanged.
/// Throws DeadlockError when no event can make progress.
bool next_decision_point(SimState& state, const Instance& inst);

/// Assigns `task` (an index into Instance::tasks) to the vehicle at index
/// `vehicle`. The completion is scheduled, not applied.
void apply_assignment(SimState& state, const Instance& inst, std::size_t vehicle, std::size_t task);

Time makespan(const SimState& state, const Instance& inst);
Time tardiness(const SimState& state, const Instance& inst);
/// max(finish - arrival - expiry, 0) for every task, in Instance::tasks order.
std::vector<Time> per_task_delay(const SimState& state, const Instance& inst);

struct TraceEntry {
  Time time = 0.0;
  std::size_t vehicle = 0;
  std::optional<RuleId> rule;
  std::size_t task = 0;

  bool operator==(const TraceEntry&) const = default;
};

struct EpisodeResult {
  Time makespan = 0.0;
  Time tardiness = 0.0;
  std::vector<Time> per_task_delay;
  std::size_t decision_count = 0;
  std::vector<TraceEntry> trace;

  bool operator==(const EpisodeResult&) const = default;
};

/// What a policy returns at a decision point: an Idle vehicle plus either a
/// dispatching rule that picks the task, or the task itself.
struct Decision {
  std::size_t vehicle = 0;
  std::optional<RuleId> rule;
  std::optional<std::size_t> task;
};

/// A policy must be a pure function of its arguments; all randomness comes
/// from the per-episode generator it is handed.
using DecisionFn = std::function<Decision(const SimState&, const Instance&, Rng&)>;

struct EpisodeOptions {
  bool record_trace = false;
};

EpisodeResult run_episode(const Instance& inst, const DecisionFn& policy, std::uint64_t seed,
                          EpisodeOptions options = {});

}  // namespace dmh
