#include "dmh/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "dmh/error.hpp"
#include "dmh/parallel.hpp"
#include "dmh/rng.hpp"

namespace dmh {

void validate(const GeneratorParams& p) {
  if (p.sites < 2) throw ValidationError("generate.sites must be >= 2");
  if (p.vehicles < 1) throw ValidationError("generate.vehicles must be >= 1");
  if (p.tasks < 1) throw ValidationError("generate.tasks must be >= 1");
  if (!(p.breakdown_rate >= 0.0) || !std::isfinite(p.breakdown_rate))
    throw ValidationError("generate.breakdown_rate must be >= 0");
  if (!(p.scale > 0.0)) throw ValidationError("generate.scale must be > 0");
  if (!(p.load > 0.0)) throw ValidationError("generate.load must be > 0");
}

namespace {

std::string two_digit(std::size_t n) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%02zu", n);
  return buf;
}

Instance generate_one(const GeneratorParams& p, Rng& rng, std::string id) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Instance inst;
  inst.id = std::move(id);

  const std::size_t n = p.sites;
  std::vector<std::pair<double, double>> xy(n);
  for (auto& [x, y] : xy) {
    x = unit(rng) * p.scale;
    y = unit(rng) * p.scale;
  }
  constexpr SiteKind kCycle[] = {SiteKind::kPickup, SiteKind::kDelivery, SiteKind::kBoth};
  for (std::size_t i = 0; i < n; ++i) {
    inst.sites.push_back({i == 0 ? "D" : "S" + std::to_string(i), i == 0 ? SiteKind::kDepot : kCycle[(i - 1) % 3]});
  }
  inst.travel.assign(n, std::vector<Time>(n, 0.0));
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = std::hypot(xy[i].first - xy[j].first, xy[i].second - xy[j].second);
      inst.travel[i][j] = inst.travel[j][i] = d;
      total += d;
    }
  }
  const double mean_leg = total / static_cast<double>(n * (n - 1) / 2);

  for (std::size_t v = 0; v < p.vehicles; ++v) inst.vehicles.push_back({static_cast<VehicleId>(v + 1), 0});

  std::vector<std::size_t> pickups, deliveries;
  for (std::size_t i = 1; i < n; ++i) {
    if (inst.sites[i].kind != SiteKind::kDelivery) pickups.push_back(i);
    if (inst.sites[i].kind != SiteKind::kPickup) deliveries.push_back(i);
  }
  const bool typed = !pickups.empty() && !deliveries.empty() && (pickups.size() > 1 || deliveries.size() > 1 ||
                                                                 pickups.front() != deliveries.front());
  if (!typed) {
    pickups.clear();
    for (std::size_t i = 0; i < n; ++i) pickups.push_back(i);
    deliveries = pickups;
  }

  // Each task costs roughly an empty leg plus a laden leg.
  const double service = 2.0 * mean_leg;
  const double rate = p.load * static_cast<double>(p.vehicles) / std::max(service, 1e-9);
  std::exponential_distribution<double> gap(rate);
  std::uniform_real_distribution<double> slack(1.0, 4.0);
  Time clock = 0.0;
  for (std::size_t k = 0; k < p.tasks; ++k) {
    if (k > 0) clock += gap(rng);
    TaskSpec t;
    t.id = static_cast<TaskId>(k + 1);
    t.pickup = pickups[std::uniform_int_distribution<std::size_t>(0, pickups.size() - 1)(rng)];
    do {
      t.delivery = deliveries[std::uniform_int_distribution<std::size_t>(0, deliveries.size() - 1)(rng)];
    } while (t.delivery == t.pickup);
    t.arrival = clock;
    t.expiry = (mean_leg + inst.travel[t.pickup][t.delivery]) * slack(rng);
    inst.tasks.push_back(t);
  }

  std::size_t breakdowns = static_cast<std::size_t>(std::floor(p.breakdown_rate));
  if (unit(rng) < p.breakdown_rate - std::floor(p.breakdown_rate)) ++breakdowns;
  std::uniform_real_distribution<double> repair(0.5 * mean_leg, 1.5 * mean_leg);
  for (std::size_t b = 0; b < breakdowns; ++b) {
    BreakdownSpec bd;
    bd.vehicle = inst.vehicles[std::uniform_int_distribution<std::size_t>(0, p.vehicles - 1)(rng)].id;
    bd.at = unit(rng) * (clock + mean_leg);
    bd.repair = repair(rng);
    inst.breakdowns.push_back(bd);
  }
  std::stable_sort(inst.breakdowns.begin(), inst.breakdowns.end(),
                   [](const BreakdownSpec& a, const BreakdownSpec& b) { return a.at < b.at; });
  validate(inst);
  return inst;
}

}  // namespace

std::vector<Instance> generate_instances(std::size_t count, const GeneratorParams& params, std::uint64_t seed,
                                         const std::string& prefix) {
  validate(params);
  std::vector<Instance> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng = make_rng({seed, i, tag(Stream::kGenerator)});
    out.push_back(generate_one(params, rng, prefix + "-" + two_digit(i + 1)));
  }
  return out;
}

std::vector<Instance> noise_instances(const std::vector<Instance>& instances, double delta, std::uint64_t seed) {
  if (!(delta >= 0.0) || !std::isfinite(delta)) throw ValidationError("noise magnitude must be >= 0");
  std::vector<Instance> out = instances;
  if (delta == 0.0) return out;
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto& tasks = out[i].tasks;
    for (std::size_t k = 0; k < tasks.size(); ++k) {
      Rng rng = make_rng({seed, i, static_cast<std::uint64_t>(tasks[k].id), tag(Stream::kArrivalNoise)});
      const double shift = std::uniform_real_distribution<double>(-delta, delta)(rng);
      tasks[k].arrival = std::max(0.0, tasks[k].arrival + shift);
    }
    std::stable_sort(tasks.begin(), tasks.end(), [](const TaskSpec& a, const TaskSpec& b) {
      return a.arrival < b.arrival || (a.arrival == b.arrival && a.id < b.id);
    });
  }
  return out;
}

EvalReport summarize(const EpisodeTable& table, double xi) {
  const std::size_t np = table.policies.size();
  const std::size_t ni = table.instances.size();
  if (table.results.size() != np) throw ValidationError("episode table does not match its policy list");
  EvalReport report;
  report.xi = xi;
  report.policy_order = table.policies;

  std::vector<std::vector<double>> fm(np, std::vector<double>(ni)), ft(np, std::vector<double>(ni));
  std::vector<std::size_t> satisfied(np, 0), episodes(np, 0);
  for (std::size_t p = 0; p < np; ++p) {
    if (table.results[p].size() != ni) throw ValidationError("episode table does not match its instance list");
    for (std::size_t i = 0; i < ni; ++i) {
      const auto& eps = table.results[p][i];
      if (eps.empty()) throw ValidationError("no episodes for policy '" + table.policies[p] + "'");
      double sm = 0.0, st = 0.0;
      std::size_t ok = 0;
      for (const auto& [m, t] : eps) {
        sm += m;
        st += t;
        if (t < xi) ++ok;
      }
      const double k = static_cast<double>(eps.size());
      fm[p][i] = sm / k;
      ft[p][i] = st / k;
      satisfied[p] += ok;
      episodes[p] += eps.size();
      report.rows.push_back({table.policies[p], table.instances[i], fm[p][i], ft[p][i], static_cast<double>(ok) / k});
    }
  }

  auto normalized = [&](const std::vector<std::vector<double>>& v, std::size_t p, std::size_t i) {
    double hi = v[0][i], lo = v[0][i];
    for (std::size_t q = 1; q < np; ++q) {
      hi = std::max(hi, v[q][i]);
      lo = std::min(lo, v[q][i]);
    }
    if (!(hi > lo)) return 1.0;
    return (hi - v[p][i]) / (hi - lo);
  };
  for (std::size_t p = 0; p < np; ++p) {
    PolicyScore s;
    for (std::size_t i = 0; i < ni; ++i) {
      s.makespan_score += normalized(fm, p, i);
      s.tardiness_score += normalized(ft, p, i);
    }
    if (ni > 0) {
      s.makespan_score /= static_cast<double>(ni);
      s.tardiness_score /= static_cast<double>(ni);
    }
    s.satisfaction = episodes[p] == 0 ? 0.0 : static_cast<double>(satisfied[p]) / static_cast<double>(episodes[p]);
    report.scores[table.policies[p]] = s;
  }
  return report;
}

EvalReport evaluate_policies(const std::vector<NamedPolicy>& policies, const std::vector<Instance>& instances,
                             std::size_t trials, const std::vector<std::uint64_t>& seeds, double xi,
                             std::size_t jobs) {
  if (policies.empty()) throw ValidationError("evaluation needs at least one policy");
  if (trials < 1) throw ValidationError("evaluation needs trials >= 1");
  if (seeds.empty()) throw ValidationError("evaluation needs at least one seed");
  {
    std::set<std::string> names;
    for (const auto& p : policies)
      if (!names.insert(p.name).second) throw ValidationError("duplicate policy name '" + p.name + "'");
  }

  EpisodeTable table;
  for (const auto& p : policies) table.policies.push_back(p.name);
  for (const auto& inst : instances) table.instances.push_back(inst.id);
  const std::size_t per_cell = trials * seeds.size();
  table.results.assign(policies.size(), std::vector<std::vector<std::pair<double, double>>>(
                                            instances.size(), std::vector<std::pair<double, double>>(per_cell)));

  const std::size_t cells = policies.size() * instances.size();
  parallel_for(cells * per_cell, jobs, [&](std::size_t job) {
    const std::size_t e = job % per_cell;
    const std::size_t cell = job / per_cell;
    const std::size_t p = cell / instances.size();
    const std::size_t i = cell % instances.size();
    const std::uint64_t seed = derive_seed({seeds[e / trials], e % trials, tag(Stream::kEvaluation)});
    const auto r = run_episode(instances[i], policies[p].policy, seed);
    table.results[p][i][e] = {r.makespan, r.tardiness};
  });

  EvalReport report = summarize(table, xi);
  report.trials = trials;
  report.seeds = seeds;
  return report;
}

std::vector<Split> leave_one_out_splits(const std::vector<Instance>& instances) {
  if (instances.size() < 2) throw ValidationError("leave-one-out needs at least two instances");
  std::set<std::string> ids;
  for (const auto& inst : instances)
    if (!ids.insert(inst.id).second) throw ValidationError("duplicate instance id '" + inst.id + "'");
  std::vector<Split> splits;
  splits.reserve(instances.size());
  for (std::size_t k = 0; k < instances.size(); ++k) {
    Split s{{}, instances[k]};
    for (std::size_t j = 0; j < instances.size(); ++j)
      if (j != k) s.train.push_back(instances[j]);
    splits.push_back(std::move(s));
  }
  return splits;
}

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

std::string report_csv(const EvalReport& report) {
  std::ostringstream os;
  os << kReportCsvHeader << '\n';
  for (const auto& r : report.rows) {
    os << r.policy << ',' << r.instance << ',' << num(r.mean_makespan) << ',' << num(r.mean_tardiness) << ','
       << num(r.satisfied_fraction) << '\n';
  }
  return os.str();
}

nlohmann::json report_summary(const EvalReport& report) {
  nlohmann::json policies = nlohmann::json::object();
  for (const auto& [name, s] : report.scores)
    policies[name] = {{"M", s.makespan_score}, {"C", s.tardiness_score}, {"P", s.satisfaction}};
  return nlohmann::json{{"policies", policies}, {"xi", report.xi}, {"trials", report.trials}, {"seeds", report.seeds}};
}

}  // namespace dmh
