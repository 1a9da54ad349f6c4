#include "dmh/rules.hpp"

#include <tuple>
#include <vector>

#include "dmh/error.hpp"

namespace dmh {

std::string_view to_string(RuleId rule) {
  switch (rule) {
    case RuleId::kFCFS: return "FCFS";
    case RuleId::kEDD: return "EDD";
    case RuleId::kNVF: return "NVF";
    case RuleId::kSTD: return "STD";
  }
  return "?";
}

std::string_view to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::kFCFS: return "FCFS";
    case BaselineKind::kEDD: return "EDD";
    case BaselineKind::kNVF: return "NVF";
    case BaselineKind::kSTD: return "STD";
    case BaselineKind::kMIX: return "MIX";
    case BaselineKind::kRandom: return "Random";
  }
  return "?";
}

std::optional<BaselineKind> parse_baseline(std::string_view name) {
  for (auto k : {BaselineKind::kFCFS, BaselineKind::kEDD, BaselineKind::kNVF, BaselineKind::kSTD,
                 BaselineKind::kMIX, BaselineKind::kRandom}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

namespace {

double rule_key(RuleId rule, const TaskSpec& t, std::size_t from, const Instance& inst) {
  switch (rule) {
    case RuleId::kFCFS: return t.arrival;
    case RuleId::kEDD: return t.due();
    case RuleId::kNVF: return inst.travel_time(from, t.pickup);
    case RuleId::kSTD: return inst.travel_time(from, t.pickup) + inst.laden_time(t);
  }
  return 0.0;
}

std::size_t lowest_idle(const SimState& s) {
  for (std::size_t v = 0; v < s.vehicles.size(); ++v)
    if (s.vehicles[v].state == VehicleState::kIdle) return v;
  throw ConstraintViolation("no Idle vehicle at a decision point");
}

}  // namespace

std::size_t select_task(RuleId rule, std::span<const std::size_t> pool, const VehicleStatus& vehicle,
                        const Instance& inst) {
  if (pool.empty()) throw Error("select_task called with an empty pool");
  std::size_t best = pool.front();
  auto best_key = std::make_tuple(rule_key(rule, inst.tasks[best], vehicle.site, inst), inst.tasks[best].id);
  for (std::size_t task : pool.subspan(1)) {
    auto key = std::make_tuple(rule_key(rule, inst.tasks[task], vehicle.site, inst), inst.tasks[task].id);
    if (key < best_key) {
      best = task;
      best_key = key;
    }
  }
  return best;
}

DecisionFn baseline_policy(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::kFCFS:
    case BaselineKind::kEDD:
    case BaselineKind::kNVF:
    case BaselineKind::kSTD: {
      const RuleId rule = static_cast<RuleId>(static_cast<int>(kind));
      return [rule](const SimState& s, const Instance&, Rng&) {
        return Decision{lowest_idle(s), rule, std::nullopt};
      };
    }
    case BaselineKind::kMIX:
      return [](const SimState& s, const Instance&, Rng& rng) {
        std::uniform_int_distribution<int> pick(0, static_cast<int>(kRuleCount) - 1);
        return Decision{lowest_idle(s), static_cast<RuleId>(pick(rng)), std::nullopt};
      };
    case BaselineKind::kRandom:
      return [](const SimState& s, const Instance&, Rng& rng) {
        std::vector<std::size_t> idle;
        for (std::size_t v = 0; v < s.vehicles.size(); ++v)
          if (s.vehicles[v].state == VehicleState::kIdle) idle.push_back(v);
        if (idle.empty() || s.pool.empty()) throw ConstraintViolation("Random baseline has no legal pair");
        std::uniform_int_distribution<std::size_t> pick(0, s.pool.size() * idle.size() - 1);
        const std::size_t k = pick(rng);
        return Decision{idle[k % idle.size()], std::nullopt, s.pool[k / idle.size()]};
      };
  }
  throw Error("unknown baseline kind");
}

}  // namespace dmh
