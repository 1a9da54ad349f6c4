#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "dmh/instance.hpp"
#include "dmh/sim.hpp"

namespace dmh {

struct GeneratorParams {
  std::size_t sites = 6;
  std::size_t vehicles = 2;
  std::size_t tasks = 12;
  // Breakdowns per instance: floor(rate), plus one more with probability
  // equal to the fractional part.
  double breakdown_rate = 1.0;
  // Side of the square site layout, in time units of travel.
  double scale = 60.0;
  // Offered load: mean service demand per unit time relative to fleet capacity.
  double load = 1.5;
};

void validate(const GeneratorParams& params);

/// Seeded procedural instances: Euclidean travel times between random sites,
/// Poisson arrivals, and expiries mixing tight and loose deadlines. Instance
/// ids are "<prefix>-NN" (1-based, two digits).
std::vector<Instance> generate_instances(std::size_t count, const GeneratorParams& params, std::uint64_t seed,
                                         const std::string& prefix = "DMH");

/// Shifts each arrival by U[-delta, +delta] (clamped at 0) and re-sorts tasks
/// by arrival. Everything else is unchanged.
std::vector<Instance> noise_instances(const std::vector<Instance>& instances, double delta, std::uint64_t seed);

struct NamedPolicy {
  std::string name;
  DecisionFn policy;
};

/// Raw per-episode outcomes: results[policy][instance] holds one entry per
/// episode.
struct EpisodeTable {
  std::vector<std::string> policies;
  std::vector<std::string> instances;
  std::vector<std::vector<std::vector<std::pair<double, double>>>> results;  // (F_m, F_t)
};

struct PolicyInstanceRow {
  std::string policy;
  std::string instance;
  double mean_makespan = 0.0;
  double mean_tardiness = 0.0;
  double satisfied_fraction = 0.0;  // episodes with F_t < xi
};

struct PolicyScore {
  double makespan_score = 0.0;   // M
  double tardiness_score = 0.0;  // C
  double satisfaction = 0.0;     // P
};

struct EvalReport {
  std::vector<PolicyInstanceRow> rows;
  std::map<std::string, PolicyScore> scores;
  std::vector<std::string> policy_order;
  double xi = 50.0;
  std::size_t trials = 0;
  std::vector<std::uint64_t> seeds;
};

/// Normalised makespan and tardiness scores over per-policy means, and the
/// strict constraint-satisfaction fraction. When all compared means on an
/// instance coincide every policy scores 1 there.
EvalReport summarize(const EpisodeTable& table, double xi);

/// Runs trials x seeds episodes per (policy, instance). Episode seeds are
/// derived from (seed, trial).
EvalReport evaluate_policies(const std::vector<NamedPolicy>& policies, const std::vector<Instance>& instances,
                             std::size_t trials, const std::vector<std::uint64_t>& seeds, double xi,
                             std::size_t jobs = 1);

struct Split {
  std::vector<Instance> train;
  Instance held_out;
};

std::vector<Split> leave_one_out_splits(const std::vector<Instance>& instances);

inline constexpr const char* kReportCsvHeader = "policy,instance,mean_Fm,mean_Ft,P_instance";

std::string report_csv(const EvalReport& report);
nlohmann::json report_summary(const EvalReport& report);

}  // namespace dmh
