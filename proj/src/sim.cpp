#include "dmh/sim.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "dmh/error.hpp"
#include "dmh/rules.hpp"

namespace dmh {

namespace {

void pool_insert(std::vector<std::size_t>& pool, std::size_t task) {
  pool.insert(std::lower_bound(pool.begin(), pool.end(), task), task);
}

void complete(SimState& s, const Instance& inst, std::size_t v) {
  auto& vs = s.vehicles[v];
  const std::size_t task = *vs.task;
  s.history[v].push_back({task, vs.busy_until});
  vs.site = inst.tasks[task].delivery;
  vs.state = VehicleState::kIdle;
  vs.task.reset();
  ++s.served;
}

void strike(SimState& s, const Instance& inst, const BreakdownSpec& b) {
  const std::size_t v = inst.vehicle_index(b.vehicle);
  auto& vs = s.vehicles[v];
  const Time repaired = b.at + b.repair;
  switch (vs.state) {
    case VehicleState::kWorking: {
      const auto& task = inst.tasks[*vs.task];
      // Frozen at the last site it departed from.
      const Time reach_pickup = vs.assigned_at + inst.travel_time(vs.site, task.pickup);
      if (b.at >= reach_pickup) vs.site = task.pickup;
      pool_insert(s.pool, *vs.task);
      vs.task.reset();
      vs.state = VehicleState::kBroken;
      vs.busy_until = repaired;
      break;
    }
    case VehicleState::kBroken:
      vs.busy_until = std::max(vs.busy_until, repaired);
      break;
    case VehicleState::kIdle:
      vs.state = VehicleState::kBroken;
      vs.busy_until = repaired;
      break;
  }
}

// Applies all events stamped <= clock. Same-time ordering: completions, then
// breakdowns, then repairs, then releases.
void apply_due_events(SimState& s, const Instance& inst) {
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t v = 0; v < s.vehicles.size(); ++v) {
      if (s.vehicles[v].state == VehicleState::kWorking && s.vehicles[v].busy_until <= s.clock) {
        complete(s, inst, v);
        changed = true;
      }
    }
    while (s.next_breakdown < s.breakdown_order.size()) {
      const auto& b = inst.breakdowns[s.breakdown_order[s.next_breakdown]];
      if (b.at > s.clock) break;
      strike(s, inst, b);
      ++s.next_breakdown;
      changed = true;
    }
    for (auto& vs : s.vehicles) {
      if (vs.state == VehicleState::kBroken && vs.busy_until <= s.clock) {
        vs.state = VehicleState::kIdle;
        changed = true;
      }
    }
    while (s.next_release < inst.tasks.size() && inst.tasks[s.next_release].arrival <= s.clock) {
      pool_insert(s.pool, s.next_release);
      ++s.next_release;
      changed = true;
    }
  }
}

Time next_event_time(const SimState& s, const Instance& inst) {
  Time t = std::numeric_limits<Time>::infinity();
  if (s.next_release < inst.tasks.size()) t = std::min(t, inst.tasks[s.next_release].arrival);
  if (s.next_breakdown < s.breakdown_order.size())
    t = std::min(t, inst.breakdowns[s.breakdown_order[s.next_breakdown]].at);
  for (const auto& vs : s.vehicles)
    if (vs.state != VehicleState::kIdle) t = std::min(t, vs.busy_until);
  return t;
}

}  // namespace

std::size_t SimState::assigned_count() const noexcept {
  return static_cast<std::size_t>(std::count_if(vehicles.begin(), vehicles.end(),
                                                 [](const VehicleStatus& v) { return v.task.has_value(); }));
}

bool SimState::any_idle() const noexcept {
  return std::any_of(vehicles.begin(), vehicles.end(),
                     [](const VehicleStatus& v) { return v.state == VehicleState::kIdle; });
}

Time SimState::available_at(std::size_t vehicle) const {
  const auto& vs = vehicles.at(vehicle);
  return vs.state == VehicleState::kIdle ? clock : vs.busy_until;
}

SimState initial_state(const Instance& inst) {
  SimState s;
  s.vehicles.resize(inst.vehicles.size());
  for (std::size_t v = 0; v < inst.vehicles.size(); ++v) s.vehicles[v].site = inst.vehicles[v].start_site;
  s.history.resize(inst.vehicles.size());
  s.breakdown_order.resize(inst.breakdowns.size());
  std::iota(s.breakdown_order.begin(), s.breakdown_order.end(), std::size_t{0});
  std::stable_sort(s.breakdown_order.begin(), s.breakdown_order.end(), [&](std::size_t a, std::size_t b) {
    return inst.breakdowns[a].at < inst.breakdowns[b].at;
  });
  return s;
}

bool next_decision_point(SimState& s, const Instance& inst) {
  if (s.terminal(inst)) return false;
  for (;;) {
    apply_due_events(s, inst);
    if (s.terminal(inst)) return false;
    if (!s.pool.empty() && s.any_idle()) return true;
    const Time t = next_event_time(s, inst);
    if (t == std::numeric_limits<Time>::infinity()) {
      throw DeadlockError("no events remain at t=" + std::to_string(s.clock) + " with " +
                          std::to_string(inst.task_count() - s.served) + " task(s) unserved");
    }
    s.clock = std::max(s.clock, t);
  }
}

void apply_assignment(SimState& s, const Instance& inst, std::size_t vehicle, std::size_t task) {
  if (vehicle >= s.vehicles.size()) throw ConstraintViolation("vehicle index out of range");
  auto& vs = s.vehicles[vehicle];
  if (vs.state != VehicleState::kIdle) {
    throw ConstraintViolation("vehicle " + std::to_string(inst.vehicles[vehicle].id) +
                              " is not Idle and cannot take a task");
  }
  auto it = std::lower_bound(s.pool.begin(), s.pool.end(), task);
  if (it == s.pool.end() || *it != task) throw ConstraintViolation("unknown task: not in the pool");
  s.pool.erase(it);
  const auto& t = inst.tasks[task];
  vs.state = VehicleState::kWorking;
  vs.task = task;
  vs.assigned_at = s.clock;
  vs.busy_until = s.clock + inst.travel_time(vs.site, t.pickup) + inst.travel_time(t.pickup, t.delivery);
}

Time makespan(const SimState& s, const Instance& inst) {
  if (!s.terminal(inst)) throw Error("makespan requested for a non-terminal state");
  Time m = 0.0;
  for (const auto& h : s.history)
    if (!h.empty()) m = std::max(m, h.back().finish);
  return m;
}

std::vector<Time> per_task_delay(const SimState& s, const Instance& inst) {
  std::vector<Time> delay(inst.task_count(), 0.0);
  for (const auto& h : s.history) {
    for (const auto& served : h) {
      const auto& t = inst.tasks[served.task];
      delay[served.task] = std::max(served.finish - t.arrival - t.expiry, 0.0);
    }
  }
  return delay;
}

Time tardiness(const SimState& s, const Instance& inst) {
  if (!s.terminal(inst)) throw Error("tardiness requested for a non-terminal state");
  if (inst.task_count() == 0) throw Error("tardiness is undefined for an instance without tasks");
  const auto d = per_task_delay(s, inst);
  return std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
}

EpisodeResult run_episode(const Instance& inst, const DecisionFn& policy, std::uint64_t seed,
                          EpisodeOptions options) {
  Rng rng = make_rng({seed, tag(Stream::kEpisode)});
  SimState s = initial_state(inst);
  EpisodeResult r;
  while (next_decision_point(s, inst)) {
    const Decision d = policy(s, inst, rng);
    if (d.vehicle >= s.vehicles.size() || s.vehicles[d.vehicle].state != VehicleState::kIdle)
      throw ConstraintViolation("policy selected a vehicle that is not Idle");
    std::size_t task = 0;
    if (d.task) {
      task = *d.task;
    } else if (d.rule) {
      task = select_task(*d.rule, s.pool, s.vehicles[d.vehicle], inst);
    } else {
      throw ConstraintViolation("decision names neither a rule nor a task");
    }
    if (options.record_trace) r.trace.push_back({s.clock, d.vehicle, d.rule, task});
    apply_assignment(s, inst, d.vehicle, task);
    ++r.decision_count;
  }
  r.makespan = makespan(s, inst);
  r.per_task_delay = per_task_delay(s, inst);
  r.tardiness = inst.task_count() == 0 ? 0.0 : tardiness(s, inst);
  return r;
}

}  // namespace dmh
