#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "dmh/error.hpp"
#include "dmh/harness.hpp"
#include "dmh/rules.hpp"
#include "micro.hpp"

using namespace dmh;

namespace {

const TaskSpec& by_id(const Instance& inst, TaskId id) { return inst.tasks[inst.task_index(id)]; }

// One episode per (policy, instance) cell with the given outcome.
EpisodeTable table_of(const std::vector<std::vector<std::pair<double, double>>>& cells) {
  EpisodeTable t;
  for (std::size_t p = 0; p < cells.size(); ++p) t.policies.push_back("P" + std::to_string(p));
  for (std::size_t i = 0; i < cells.front().size(); ++i) t.instances.push_back("I" + std::to_string(i));
  for (const auto& row : cells) {
    t.results.emplace_back();
    for (const auto& cell : row) t.results.back().push_back({cell});
  }
  return t;
}

}  // namespace

TEST_CASE("generator is seeded") {
  const auto a = generate_instances(8, GeneratorParams{}, 7);
  const auto b = generate_instances(8, GeneratorParams{}, 7);
  REQUIRE(a.size() == 8);
  for (std::size_t k = 0; k < 8; ++k) CHECK(to_json(a[k]) == to_json(b[k]));
  CHECK(a.front().id == "DMH-01");
  CHECK(a.back().id == "DMH-08");
  CHECK(to_json(generate_instances(1, GeneratorParams{}, 8)[0]) != to_json(a[0]));
}

TEST_CASE("generated instances are valid, metric and sorted") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    GeneratorParams p{3 + seed % 6, 1 + seed % 3, 1 + seed % 20, 0.5 * (seed % 5)};
    for (const auto& inst : generate_instances(2, p, seed)) {
      CHECK_NOTHROW(validate(inst));
      CHECK(inst.sites.size() == p.sites);
      CHECK(inst.vehicles.size() == p.vehicles);
      CHECK(inst.task_count() == p.tasks);
      CHECK(std::is_sorted(inst.tasks.begin(), inst.tasks.end(),
                           [](const TaskSpec& x, const TaskSpec& y) { return x.arrival < y.arrival; }));
      const std::size_t n = inst.sites.size();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          for (std::size_t k = 0; k < n; ++k) CHECK(inst.travel[i][k] <= inst.travel[i][j] + inst.travel[j][k] + 1e-9);
      // Every instance must be solvable.
      CHECK(run_episode(inst, baseline_policy(BaselineKind::kFCFS), 0).per_task_delay.size() == p.tasks);
    }
  }
}

TEST_CASE("generator parameter validation") {
  CHECK_THROWS_AS(generate_instances(1, GeneratorParams{6, 0, 12, 1.0}, 0), ValidationError);
  CHECK_THROWS_AS(generate_instances(1, GeneratorParams{1, 2, 12, 1.0}, 0), ValidationError);
  CHECK_THROWS_AS(generate_instances(1, GeneratorParams{6, 2, 12, -1.0}, 0), ValidationError);
  CHECK(generate_instances(0, GeneratorParams{}, 0).empty());
}

TEST_CASE("arrival noise") {
  const auto base = generate_instances(4, GeneratorParams{6, 2, 20, 1.0}, 3);
  SUBCASE("zero magnitude is the identity") {
    const auto same = noise_instances(base, 0.0, 9);
    for (std::size_t k = 0; k < base.size(); ++k) CHECK(to_json(same[k]) == to_json(base[k]));
  }
  SUBCASE("perturbations are bounded, clamped and leave other fields alone") {
    const auto noisy = noise_instances(base, 5.0, 9);
    for (std::size_t k = 0; k < base.size(); ++k) {
      CHECK_NOTHROW(validate(noisy[k]));
      CHECK(noisy[k].id == base[k].id);
      CHECK(noisy[k].breakdowns.size() == base[k].breakdowns.size());
      for (const auto& t : base[k].tasks) {
        const auto& u = by_id(noisy[k], t.id);
        CHECK(std::abs(u.arrival - t.arrival) <= 5.0);
        CHECK(u.arrival >= 0.0);
        CHECK(u.expiry == t.expiry);
        CHECK(u.pickup == t.pickup);
        CHECK(u.delivery == t.delivery);
      }
    }
    const auto again = noise_instances(base, 5.0, 9);
    CHECK(to_json(again[0]) == to_json(noisy[0]));
  }
  SUBCASE("a larger magnitude keeps a larger bound") {
    const auto noisy = noise_instances(base, 20.0, 9);
    double widest = 0.0;
    for (std::size_t k = 0; k < base.size(); ++k)
      for (const auto& t : base[k].tasks) {
        const double shift = std::abs(by_id(noisy[k], t.id).arrival - t.arrival);
        CHECK(shift <= 20.0);
        widest = std::max(widest, shift);
      }
    CHECK(widest > 5.0);
  }
  SUBCASE("arrivals pushed below zero are clamped to zero") {
    Instance inst = testing::micro1();
    inst.tasks = {{1, 1, 2, 2.0, 40}};
    bool clamped = false;
    for (std::uint64_t seed = 0; seed < 200 && !clamped; ++seed) {
      const double o = noise_instances({inst}, 5.0, seed)[0].tasks[0].arrival;
      CHECK(o >= 0.0);
      clamped = o == 0.0;
    }
    CHECK(clamped);
  }
}

TEST_CASE("two-point normalisation and strict satisfaction") {
  // Two policies, one instance: means 1800 vs 2000.
  const auto r = summarize(table_of({{{1800, 10}}, {{2000, 50}}}), 50);
  CHECK(r.scores.at("P0").makespan_score == 1.0);
  CHECK(r.scores.at("P1").makespan_score == 0.0);
  CHECK(r.scores.at("P0").tardiness_score == 1.0);
  CHECK(r.scores.at("P1").tardiness_score == 0.0);
  CHECK(r.scores.at("P0").satisfaction == 1.0);
  CHECK(r.scores.at("P1").satisfaction == 0.0);  // F_t == xi is a violation
}

TEST_CASE("identical policies all score 1") {
  const auto r = summarize(table_of({{{100, 5}, {80, 70}}, {{100, 5}, {80, 70}}}), 50);
  for (const auto& name : {"P0", "P1"}) {
    CHECK(r.scores.at(name).makespan_score == 1.0);
    CHECK(r.scores.at(name).tardiness_score == 1.0);
    CHECK(r.scores.at(name).satisfaction == 0.5);
  }
}

TEST_CASE("per-instance means drive the rows") {
  EpisodeTable t;
  t.policies = {"A", "B"};
  t.instances = {"X"};
  t.results = {{{{10, 0}, {20, 60}, {30, 40}}}, {{{5, 0}}}};
  const auto r = summarize(t, 50);
  REQUIRE(r.rows.size() == 2);
  CHECK(r.rows[0].mean_makespan == 20.0);
  CHECK(r.rows[0].mean_tardiness == doctest::Approx(100.0 / 3.0));
  CHECK(r.rows[0].satisfied_fraction == doctest::Approx(2.0 / 3.0));
  CHECK(r.scores.at("A").makespan_score == 0.0);
  CHECK(r.scores.at("B").makespan_score == 1.0);
}

TEST_CASE("scores are invariant to a common affine rescaling") {
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int round = 0; round < 100; ++round) {
    const std::size_t np = 2 + gen() % 4, ni = 1 + gen() % 4;
    std::vector<std::vector<std::pair<double, double>>> raw(np, std::vector<std::pair<double, double>>(ni));
    for (auto& row : raw)
      for (auto& cell : row) cell = {1000 + 1000 * u(gen), 100 * u(gen)};
    const double a = 0.1 + 10 * u(gen), b = 1000 * (u(gen) - 0.5);
    auto scaled = raw;
    for (auto& row : scaled)
      for (auto& cell : row) cell = {a * cell.first + b, a * cell.second + b};
    const auto r1 = summarize(table_of(raw), 50);
    const auto r2 = summarize(table_of(scaled), 50);
    for (const auto& [name, s] : r1.scores) {
      CHECK(r2.scores.at(name).makespan_score == doctest::Approx(s.makespan_score).epsilon(1e-9));
      CHECK(r2.scores.at(name).tardiness_score == doctest::Approx(s.tardiness_score).epsilon(1e-9));
      CHECK(s.makespan_score >= 0.0);
      CHECK(s.makespan_score <= 1.0);
    }
  }
}

TEST_CASE("lowering the threshold never raises satisfaction") {
  std::mt19937_64 gen(6);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  std::vector<std::vector<std::pair<double, double>>> raw(3, std::vector<std::pair<double, double>>(4));
  for (auto& row : raw)
    for (auto& cell : row) cell = {u(gen), u(gen)};
  double prev[3] = {2, 2, 2};
  for (double xi = 100; xi >= 0; xi -= 5) {
    const auto r = summarize(table_of(raw), xi);
    for (std::size_t p = 0; p < 3; ++p) {
      const double s = r.scores.at("P" + std::to_string(p)).satisfaction;
      CHECK(s <= prev[p]);
      prev[p] = s;
    }
  }
}

TEST_CASE("evaluation protocol") {
  const Instance inst = testing::micro1();
  const std::vector<NamedPolicy> policies{{"FCFS", baseline_policy(BaselineKind::kFCFS)},
                                          {"Random", baseline_policy(BaselineKind::kRandom)}};
  const auto r = evaluate_policies(policies, {inst}, 30, {0, 1, 2, 3, 4}, 50, 2);
  CHECK(r.trials == 30);
  CHECK(r.seeds.size() == 5);
  CHECK(r.rows[0].mean_makespan == 65.0);
  CHECK(r.rows[0].mean_tardiness == 10.0);
  CHECK(r.rows[0].satisfied_fraction == 1.0);

  // Same report regardless of thread count.
  const auto serial = evaluate_policies(policies, {inst}, 30, {0, 1, 2, 3, 4}, 50, 1);
  CHECK(report_csv(serial) == report_csv(r));
  CHECK_THROWS_AS(evaluate_policies(policies, {inst}, 0, {0}, 50), ValidationError);
}

TEST_CASE("report files") {
  const auto r = summarize(table_of({{{1800, 10}}, {{2000, 50}}}), 50);
  const std::string csv = report_csv(r);
  CHECK(csv.rfind(std::string(kReportCsvHeader) + "\n", 0) == 0);
  CHECK(csv.find("P0,I0,1800,10,1\n") != std::string::npos);
  const auto j = report_summary(r);
  CHECK(j["policies"]["P0"]["M"] == 1.0);
  CHECK(j["policies"]["P1"]["P"] == 0.0);
  CHECK(j["xi"] == 50.0);
  CHECK(j.contains("trials"));
  CHECK(j["seeds"].is_array());
}

TEST_CASE("leave-one-out splits") {
  const auto eight = generate_instances(8, GeneratorParams{}, 1);
  const auto splits = leave_one_out_splits(eight);
  REQUIRE(splits.size() == 8);
  for (std::size_t k = 0; k < 8; ++k) {
    CHECK(splits[k].train.size() == 7);
    CHECK(splits[k].held_out.id == eight[k].id);
    for (const auto& t : splits[k].train) CHECK(t.id != eight[k].id);
  }
  CHECK(leave_one_out_splits({eight[0], eight[1]}).size() == 2);
  CHECK_THROWS_AS(leave_one_out_splits({eight[0]}), ValidationError);
  CHECK_THROWS_AS(leave_one_out_splits({eight[0], eight[1], eight[0]}), ValidationError);
}
