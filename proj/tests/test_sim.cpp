#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "dmh/error.hpp"
#include "dmh/harness.hpp"
#include "dmh/rules.hpp"
#include "dmh/sim.hpp"
#include "micro.hpp"

using namespace dmh;

namespace {

Instance single_task(Time depot_to_a, Time a_to_c, Time arrival, Time expiry) {
  Instance inst;
  inst.id = "single";
  inst.sites = {{"D", SiteKind::kDepot}, {"A", SiteKind::kPickup}, {"C", SiteKind::kDelivery}};
  const Time dc = depot_to_a + a_to_c;
  inst.travel = {{0, depot_to_a, dc}, {depot_to_a, 0, a_to_c}, {dc, a_to_c, 0}};
  inst.vehicles = {{7, 0}};
  inst.tasks = {{1, 1, 2, arrival, expiry}};
  return inst;
}

// Straight-line recomputation of a schedule from its per-vehicle assignment
// lists: each task starts when both the vehicle and the task are available.
struct StraightLine {
  Time makespan = 0.0;
  std::vector<Time> delay;
};

StraightLine straight_line(const Instance& inst, const std::vector<TraceEntry>& trace) {
  StraightLine out;
  out.delay.assign(inst.task_count(), 0.0);
  std::vector<Time> free_at(inst.vehicles.size(), 0.0);
  std::vector<std::size_t> site(inst.vehicles.size());
  for (std::size_t v = 0; v < site.size(); ++v) site[v] = inst.vehicles[v].start_site;
  for (const auto& e : trace) {
    const auto& t = inst.tasks[e.task];
    const Time start = std::max(free_at[e.vehicle], t.arrival);
    const Time finish = start + inst.travel[site[e.vehicle]][t.pickup] + inst.travel[t.pickup][t.delivery];
    free_at[e.vehicle] = finish;
    site[e.vehicle] = t.delivery;
    out.delay[e.task] = std::max(finish - t.arrival - t.expiry, 0.0);
    out.makespan = std::max(out.makespan, finish);
  }
  return out;
}

}  // namespace

TEST_CASE("first decision point of MICRO-1 is at t=0 with u1 and u2 waiting") {
  const Instance inst = testing::micro1();
  SimState s = initial_state(inst);
  REQUIRE(next_decision_point(s, inst));
  CHECK(s.clock == 0.0);
  CHECK(s.pool == std::vector<std::size_t>{0, 1});
  CHECK(s.vehicles[0].state == VehicleState::kIdle);
  CHECK(s.vehicles[1].state == VehicleState::kIdle);
}

TEST_CASE("after both vehicles leave at t=0 the next decision is at t=25") {
  const Instance inst = testing::micro1();
  SimState s = initial_state(inst);
  REQUIRE(next_decision_point(s, inst));
  apply_assignment(s, inst, 0, 0);
  CHECK(s.vehicles[0].busy_until == 25.0);
  CHECK(next_decision_point(s, inst));  // v2 still idle with u2 waiting
  apply_assignment(s, inst, 1, 1);
  CHECK(s.vehicles[1].busy_until == 30.0);
  REQUIRE(next_decision_point(s, inst));
  CHECK(s.clock == 25.0);
  CHECK(s.pool == std::vector<std::size_t>{2});
  CHECK(s.vehicles[0].state == VehicleState::kIdle);
  CHECK(s.vehicles[0].site == 2);  // B
  CHECK(s.history[0].size() == 1);
  CHECK(s.history[0][0].finish == 25.0);
}

TEST_CASE("terminal state returns the terminal marker without moving the clock") {
  const Instance inst = testing::micro1();
  SimState s = initial_state(inst);
  while (next_decision_point(s, inst)) apply_assignment(s, inst, s.vehicles[0].state == VehicleState::kIdle ? 0 : 1, s.pool.front());
  const Time clock = s.clock;
  CHECK_FALSE(next_decision_point(s, inst));
  CHECK(s.clock == clock);
  CHECK(s.terminal(inst));
}

TEST_CASE("assignment legality") {
  const Instance inst = testing::micro1();
  SimState s = initial_state(inst);
  REQUIRE(next_decision_point(s, inst));
  SUBCASE("task must be in the pool") { CHECK_THROWS_AS(apply_assignment(s, inst, 0, 2), ConstraintViolation); }
  SUBCASE("Working vehicle is not available") {
    apply_assignment(s, inst, 0, 0);
    CHECK_THROWS_AS(apply_assignment(s, inst, 0, 1), ConstraintViolation);
  }
  SUBCASE("Broken vehicle is not available") {
    s.vehicles[1].state = VehicleState::kBroken;
    s.vehicles[1].busy_until = 50.0;
    CHECK_THROWS_AS(apply_assignment(s, inst, 1, 1), ConstraintViolation);
  }
}

TEST_CASE("zero empty leg when the vehicle already stands at the pickup") {
  Instance inst = testing::micro1();
  inst.vehicles[0].start_site = 1;  // A
  SimState s = initial_state(inst);
  REQUIRE(next_decision_point(s, inst));
  apply_assignment(s, inst, 0, 0);
  CHECK(s.vehicles[0].busy_until == 15.0);
}

TEST_CASE("makespan and tardiness") {
  SUBCASE("MICRO-1 under FCFS") {
    const Instance inst = testing::micro1();
    const auto r = run_episode(inst, baseline_policy(BaselineKind::kFCFS), 0);
    CHECK(r.makespan == 65.0);
    CHECK(r.tardiness == 10.0);
    CHECK(r.per_task_delay == std::vector<Time>{0.0, 0.0, 30.0});
    CHECK(r.decision_count == 3);
  }
  SUBCASE("empty instance has makespan 0 and undefined tardiness") {
    Instance inst = testing::micro1();
    inst.tasks.clear();
    SimState s = initial_state(inst);
    CHECK_FALSE(next_decision_point(s, inst));
    CHECK(makespan(s, inst) == 0.0);
    CHECK_THROWS_AS(tardiness(s, inst), Error);
  }
  SUBCASE("single task from the depot") {
    const Instance inst = single_task(10, 15, 0, 100);
    const auto r = run_episode(inst, baseline_policy(BaselineKind::kFCFS), 0);
    CHECK(r.makespan == 25.0);
    CHECK(r.tardiness == 0.0);
  }
  SUBCASE("late single task: finish 65, arrival 5, expiry 30") {
    const Instance inst = single_task(40, 20, 5, 30);
    const auto r = run_episode(inst, baseline_policy(BaselineKind::kFCFS), 0);
    CHECK(r.makespan == 65.0);
    CHECK(r.tardiness == 30.0);
  }
  SUBCASE("non-terminal state is refused") {
    const Instance inst = testing::micro1();
    SimState s = initial_state(inst);
    CHECK_THROWS_AS(makespan(s, inst), Error);
    CHECK_THROWS_AS(tardiness(s, inst), Error);
  }
}

TEST_CASE("breakdown while travelling to the pickup freezes the vehicle at its origin") {
  Instance inst = testing::micro1();
  inst.vehicles.resize(1);
  inst.breakdowns = {{1, 4.0, 6.0}};
  SimState s = initial_state(inst);
  REQUIRE(next_decision_point(s, inst));
  apply_assignment(s, inst, 0, 0);
  REQUIRE(next_decision_point(s, inst));
  // Struck at t=4, repaired at t=10; u3 released at t=5 meanwhile.
  CHECK(s.clock == 10.0);
  CHECK(s.vehicles[0].state == VehicleState::kIdle);
  CHECK(s.vehicles[0].site == 0);
  CHECK(s.pool == std::vector<std::size_t>{0, 1, 2});
  CHECK(inst.tasks[0].arrival == 0.0);
  CHECK(s.history[0].empty());
}

TEST_CASE("breakdown on the laden leg leaves the vehicle at the pickup") {
  Instance inst = testing::micro1();
  inst.vehicles.resize(1);
  inst.breakdowns = {{1, 12.0, 8.0}};
  SimState s = initial_state(inst);
  REQUIRE(next_decision_point(s, inst));
  apply_assignment(s, inst, 0, 0);
  REQUIRE(next_decision_point(s, inst));
  CHECK(s.clock == 20.0);
  CHECK(s.vehicles[0].site == 1);  // A
  apply_assignment(s, inst, 0, 0);
  CHECK(s.vehicles[0].busy_until == 35.0);
}

TEST_CASE("a Broken vehicle accepts nothing until repaired") {
  Instance inst = testing::micro1();
  inst.breakdowns = {{2, 0.0, 40.0}};
  SimState s = initial_state(inst);
  REQUIRE(next_decision_point(s, inst));
  CHECK(s.vehicles[1].state == VehicleState::kBroken);
  CHECK_THROWS_AS(apply_assignment(s, inst, 1, 0), ConstraintViolation);
  const auto r = run_episode(inst, baseline_policy(BaselineKind::kFCFS), 0, {.record_trace = true});
  for (const auto& e : r.trace)
    if (e.vehicle == 1) CHECK(e.time >= 40.0);
}

TEST_CASE("deadlock is reported when no event can progress") {
  const Instance inst = testing::micro1();
  SimState s = initial_state(inst);
  s.next_release = inst.task_count();  // tasks claimed released but nowhere to be found
  CHECK_THROWS_AS(next_decision_point(s, inst), DeadlockError);
}

TEST_CASE("run_episode is deterministic in its seed") {
  const auto instances = generate_instances(3, GeneratorParams{6, 3, 15, 2.0}, 11);
  for (const auto& inst : instances) {
    for (auto kind : {BaselineKind::kMIX, BaselineKind::kRandom}) {
      const auto a = run_episode(inst, baseline_policy(kind), 5, {.record_trace = true});
      const auto b = run_episode(inst, baseline_policy(kind), 5, {.record_trace = true});
      CHECK(a == b);
    }
  }
  bool differs = false;
  const auto& inst = instances.front();
  const auto ref = run_episode(inst, baseline_policy(BaselineKind::kRandom), 0, {.record_trace = true});
  for (std::uint64_t seed = 1; seed < 20 && !differs; ++seed)
    differs = !(run_episode(inst, baseline_policy(BaselineKind::kRandom), seed, {.record_trace = true}) == ref);
  CHECK(differs);
}

TEST_CASE("state invariants hold at every decision point") {
  const auto instances = generate_instances(20, GeneratorParams{7, 3, 14, 3.0}, 3);
  std::uint64_t seed = 0;
  for (const auto& inst : instances) {
    const DecisionFn policy = baseline_policy(BaselineKind::kRandom);
    Rng rng{++seed};
    SimState s = initial_state(inst);
    Time last_clock = 0.0;
    while (next_decision_point(s, inst)) {
      CHECK(s.clock >= last_clock);
      last_clock = s.clock;
      // Conservation: pending + pool + assigned + served = m.
      CHECK(s.pending_count(inst) + s.pool.size() + s.assigned_count() + s.served == inst.task_count());
      // Exclusivity: one task per Working vehicle, no task held twice or held while pooled.
      std::set<std::size_t> held;
      for (const auto& vs : s.vehicles) {
        CHECK((vs.state == VehicleState::kWorking) == vs.task.has_value());
        if (vs.task) {
          CHECK(held.insert(*vs.task).second);
          CHECK(std::find(s.pool.begin(), s.pool.end(), *vs.task) == s.pool.end());
        }
      }
      for (std::size_t b = 0; b < s.next_breakdown; ++b) CHECK(inst.breakdowns[s.breakdown_order[b]].at <= s.clock);
      for (std::size_t k = 0; k < s.next_release; ++k) CHECK(inst.tasks[k].arrival <= s.clock);
      const Decision d = policy(s, inst, rng);
      apply_assignment(s, inst, d.vehicle, *d.task);
    }
    CHECK(s.served == inst.task_count());
  }
}

TEST_CASE("makespan matches a straight-line recomputation on small breakdown-free instances") {
  GeneratorParams params{5, 2, 4, 0.0};
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    params.vehicles = 1 + seed % 2;
    params.tasks = 1 + seed % 4;
    const auto inst = generate_instances(1, params, seed).front();
    for (auto kind : {BaselineKind::kRandom, BaselineKind::kMIX, BaselineKind::kSTD}) {
      const auto r = run_episode(inst, baseline_policy(kind), seed, {.record_trace = true});
      const auto oracle = straight_line(inst, r.trace);
      CHECK(r.makespan == doctest::Approx(oracle.makespan).epsilon(1e-12));
      for (std::size_t k = 0; k < inst.task_count(); ++k)
        CHECK(r.per_task_delay[k] == doctest::Approx(oracle.delay[k]).epsilon(1e-12));
    }
  }
}

TEST_CASE("exhaustive enumeration of assignment orders agrees with the straight-line schedule") {
  // Every possible sequence of legal (vehicle, task) choices on tiny instances.
  GeneratorParams params{4, 2, 3, 0.0};
  for (std::uint64_t seed = 100; seed < 115; ++seed) {
    const auto inst = generate_instances(1, params, seed).front();
    std::size_t leaves = 0;
    std::function<void(SimState, std::vector<TraceEntry>)> walk = [&](SimState s, std::vector<TraceEntry> trace) {
      if (!next_decision_point(s, inst)) {
        ++leaves;
        const auto oracle = straight_line(inst, trace);
        CHECK(makespan(s, inst) == doctest::Approx(oracle.makespan).epsilon(1e-12));
        const auto delay = per_task_delay(s, inst);
        for (std::size_t k = 0; k < delay.size(); ++k) CHECK(delay[k] == doctest::Approx(oracle.delay[k]).epsilon(1e-12));
        return;
      }
      for (std::size_t v = 0; v < s.vehicles.size(); ++v) {
        if (s.vehicles[v].state != VehicleState::kIdle) continue;
        for (std::size_t task : s.pool) {
          SimState next = s;
          auto t = trace;
          t.push_back({s.clock, v, std::nullopt, task});
          apply_assignment(next, inst, v, task);
          walk(std::move(next), std::move(t));
        }
      }
    };
    walk(initial_state(inst), {});
    CHECK(leaves >= 1);
  }
}
