#include "dmh/acerl.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "dmh/parallel.hpp"
#include "dmh/rng.hpp"

namespace dmh {

void validate(const EsConfig& c) {
  if (c.population == 0) throw ValidationError("es.population must be >= 1");
  if (c.antithetic && c.population % 2 != 0) throw ValidationError("es.population must be even with antithetic sampling");
  if (!(c.sigma > 0.0)) throw ValidationError("es.sigma must be > 0");
  if (!(c.step_size > 0.0)) throw ValidationError("es.step_size must be > 0");
  if (!std::isfinite(c.xi)) throw ValidationError("es.xi must be finite");
  if (!(c.p_f > 0.0 && c.p_f < 1.0)) throw ValidationError("es.p_f must lie in (0, 1)");
  if (!(c.ucb_alpha >= 0.0)) throw ValidationError("es.ucb_alpha must be >= 0");
  if (c.window < 2) throw ValidationError("es.window must be >= 2");
  if (!(c.gamma > 0.0 && c.gamma <= 1.0)) throw ValidationError("es.gamma must lie in (0, 1]");
  if (c.hidden.empty()) throw ValidationError("es.hidden needs at least one layer");
  for (auto w : c.hidden)
    if (w == 0) throw ValidationError("es.hidden widths must be >= 1");
}

nlohmann::json to_json(const EsConfig& c) {
  return nlohmann::json{
      {"population", c.population}, {"generations", c.generations},
      {"sigma", c.sigma},           {"step_size", c.step_size},
      {"xi", c.xi},                 {"p_f", c.p_f},
      {"ucb_alpha", c.ucb_alpha},   {"window", c.window},
      {"seed", c.seed},             {"antithetic", c.antithetic},
      {"gamma", c.gamma},           {"checkpoint_every", c.checkpoint_every},
      {"hidden", c.hidden},
  };
}

EsConfig es_config_from_json(const nlohmann::json& doc) {
  EsConfig c;
  if (!doc.is_object()) throw ValidationError("es: expected an object");
  static const std::set<std::string> known = {"population", "generations", "sigma",     "step_size", "xi",
                                              "p_f",        "ucb_alpha",   "window",    "seed",      "antithetic",
                                              "gamma",      "checkpoint_every", "hidden"};
  for (const auto& [key, _] : doc.items())
    if (!known.contains(key)) throw ValidationError("es: unknown field '" + key + "'");
  auto get = [&](const char* key, auto& field) {
    auto it = doc.find(key);
    if (it == doc.end()) return;
    try {
      it->get_to(field);
    } catch (const nlohmann::json::exception&) {
      throw ValidationError(std::string("field 'es.") + key + "' has the wrong type");
    }
  };
  get("population", c.population);
  get("generations", c.generations);
  get("sigma", c.sigma);
  get("step_size", c.step_size);
  get("xi", c.xi);
  get("p_f", c.p_f);
  get("ucb_alpha", c.ucb_alpha);
  get("window", c.window);
  get("seed", c.seed);
  get("antithetic", c.antithetic);
  get("gamma", c.gamma);
  get("checkpoint_every", c.checkpoint_every);
  get("hidden", c.hidden);
  return c;
}

EpisodeValues evaluate(const MlpArch& arch, std::span<const double> params, const Instance& instance,
                       std::uint64_t seed, DecodeMode mode) {
  auto shared = std::make_shared<const std::vector<double>>(params.begin(), params.end());
  const auto result = run_episode(instance, mlp_policy(arch, std::move(shared), mode), seed);
  return {-result.makespan, result.tardiness};
}

double penalty(double cost, double xi) {
  const double v = std::max(0.0, cost - xi);
  return v * v;
}

double relaxed_penalty(double g_val, double xi, double rho) {
  const double z = (g_val - xi) / rho;
  return rho * (std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))));
}

double sr_surrogate(double f_val, double g_val, double xi, double rho, double p_f) {
  return p_f * f_val - (1.0 - p_f) * relaxed_penalty(g_val, xi, rho);
}

std::vector<double> perturbation(std::size_t dim, std::uint64_t seed, std::size_t generation, std::size_t index) {
  Rng rng = make_rng({seed, generation, index, tag(Stream::kNoise)});
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> eps(dim);
  for (double& e : eps) e = normal(rng);
  return eps;
}

std::vector<Candidate> sample_population(std::span<const double> params, const EsConfig& config,
                                         std::size_t generation) {
  if (config.antithetic && config.population % 2 != 0)
    throw ValidationError("es.population must be even with antithetic sampling");
  std::vector<Candidate> out;
  out.reserve(config.population);
  auto emit = [&](std::vector<double> eps) {
    Candidate c;
    c.params.resize(params.size());
    for (std::size_t k = 0; k < params.size(); ++k) c.params[k] = params[k] + config.sigma * eps[k];
    c.noise = std::move(eps);
    out.push_back(std::move(c));
  };
  if (config.antithetic) {
    for (std::size_t p = 0; p < config.population / 2; ++p) {
      auto eps = perturbation(params.size(), config.seed, generation, p);
      auto mirrored = eps;
      for (double& e : mirrored) e = -e;
      emit(std::move(eps));
      emit(std::move(mirrored));
    }
  } else {
    for (std::size_t i = 0; i < config.population; ++i) emit(perturbation(params.size(), config.seed, generation, i));
  }
  return out;
}

std::vector<double> estimate_gradient(const std::function<double(std::span<const double>)>& f,
                                      std::span<const double> theta, double sigma, std::size_t pairs,
                                      std::uint64_t seed) {
  const std::size_t d = theta.size();
  std::vector<double> grad(d, 0.0);
  std::vector<double> plus(d), minus(d);
  for (std::size_t p = 0; p < pairs; ++p) {
    const auto eps = perturbation(d, seed, 0, p);
    for (std::size_t k = 0; k < d; ++k) {
      plus[k] = theta[k] + sigma * eps[k];
      minus[k] = theta[k] - sigma * eps[k];
    }
    const double diff = f(plus) - f(minus);
    for (std::size_t k = 0; k < d; ++k) grad[k] += diff * eps[k];
  }
  const double scale = 1.0 / (2.0 * sigma * static_cast<double>(pairs));
  for (double& g : grad) g *= scale;
  return grad;
}

// ---------------------------------------------------------------------------

AisState::AisState(std::vector<std::string> ids, std::size_t window)
    : ids_(std::move(ids)), window_(window), windows_(ids_.size()), counts_(ids_.size(), 0) {
  if (ids_.empty()) throw ValidationError("adaptive instance sampling needs at least one instance");
  if (window_ == 0) throw ValidationError("reward window must be >= 1");
}

AisState::AisState(std::vector<std::string> ids, std::size_t window, std::vector<std::vector<double>> rewards,
                   std::vector<std::size_t> counts)
    : AisState(std::move(ids), window) {
  if (rewards.size() != ids_.size() || counts.size() != ids_.size())
    throw ValidationError("reward windows and counts must match the instance list");
  for (std::size_t i = 0; i < rewards.size(); ++i)
    for (double r : rewards[i]) record(i, r);
  counts_ = std::move(counts);
}

void AisState::record(std::size_t instance, double reward) {
  auto& w = windows_.at(instance);
  w.push_back(reward);
  while (w.size() > window_) w.pop_front();
}

double AisState::advantage(std::size_t instance) const {
  const auto& w = windows_.at(instance);
  if (w.size() < 2) return 1.0;
  const auto [lo, hi] = std::minmax_element(w.begin(), w.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) return 1.0;
  double sum = 0.0;
  for (double r : w) sum += (*hi - r) / range;
  return sum / static_cast<double>(w.size());
}

std::vector<double> AisState::scores(double ucb_alpha) const {
  const double total = static_cast<double>(std::accumulate(counts_.begin(), counts_.end(), std::size_t{0}));
  std::vector<double> s(size());
  for (std::size_t i = 0; i < size(); ++i) {
    if (counts_[i] == 0) throw ValidationError("UCB score undefined for an instance that was never selected");
    s[i] = advantage(i) + ucb_alpha * std::sqrt(std::log(total) / static_cast<double>(counts_[i]));
  }
  return s;
}

std::vector<double> AisState::probabilities(double ucb_alpha) const {
  std::vector<double> p(size(), 0.0);
  const auto unseen = std::find(counts_.begin(), counts_.end(), std::size_t{0});
  if (unseen != counts_.end()) {
    p[static_cast<std::size_t>(unseen - counts_.begin())] = 1.0;
    return p;
  }
  const auto s = scores(ucb_alpha);
  const double top = *std::max_element(s.begin(), s.end());
  double z = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) z += p[i] = std::exp(s[i] - top);
  for (double& v : p) v /= z;
  return p;
}

std::size_t AisState::select(double ucb_alpha, std::uint64_t draw_seed) {
  const auto p = probabilities(ucb_alpha);
  Rng rng{draw_seed};
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  std::size_t chosen = 0;
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    acc += p[i];
    chosen = i;
    if (u < acc) break;
  }
  ++counts_[chosen];
  return chosen;
}

std::size_t ais_select(AisState& state, const EsConfig& config, std::uint64_t draw_seed) {
  return state.select(config.ucb_alpha, draw_seed);
}

// ---------------------------------------------------------------------------

void intrinsic_stochastic_ranking(std::span<FitnessRecord> records, double p_f, double xi,
                                  std::uint64_t sweep_seed) {
  for (const auto& r : records) {
    if (!r.reward || !r.cost)
      throw ValidationError("incomplete fitness record for noise index " + std::to_string(r.noise_index));
  }

  std::vector<std::string> order;
  std::map<std::string, std::vector<std::size_t>> buffers;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto [it, inserted] = buffers.try_emplace(records[i].instance_id);
    if (inserted) order.push_back(records[i].instance_id);
    it->second.push_back(i);
  }

  for (std::size_t b = 0; b < order.size(); ++b) {
    auto& l = buffers[order[b]];
    const std::size_t mu = l.size();
    Rng rng = make_rng({sweep_seed, b, tag(Stream::kRanking)});
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t sweep = 0; sweep < mu; ++sweep) {
      for (std::size_t j = 0; j + 1 < mu; ++j) {
        const double delta = unit(rng);
        const auto& a = records[l[j]];
        const auto& c = records[l[j + 1]];
        const double pa = penalty(*a.cost, xi);
        const double pc = penalty(*c.cost, xi);
        if ((pa == 0.0 && pc == 0.0) || delta < p_f) {
          if (*a.reward < *c.reward) std::swap(l[j], l[j + 1]);
        } else if (pa > pc) {
          std::swap(l[j], l[j + 1]);
        }
      }
    }
    for (std::size_t i = 0; i < mu; ++i) records[l[i]].rank_fitness = static_cast<double>(mu - i);
  }
}

double shaped_fitness(double rank, std::size_t buffer_size) {
  const double mu = static_cast<double>(buffer_size);
  return (rank - (mu + 1.0) / 2.0) / mu;
}

StepResult gradient_step(std::span<const double> params, std::span<const ScoredNoise> evaluated,
                         const EsConfig& config) {
  if (evaluated.empty()) throw ValidationError("gradient step needs at least one evaluated perturbation");
  const std::size_t d = params.size();
  double baseline = 0.0;
  if (!config.antithetic) {
    for (const auto& e : evaluated) baseline += e.fitness;
    baseline /= static_cast<double>(evaluated.size());
  }
  std::vector<double> grad(d, 0.0);
  for (const auto& e : evaluated) {
    if (e.noise.size() != d) throw ShapeError("noise vector length does not match the parameters");
    const double w = e.fitness - baseline;
    if (w == 0.0) continue;
    for (std::size_t k = 0; k < d; ++k) grad[k] += w * e.noise[k];
  }
  const double scale = config.step_size / (static_cast<double>(evaluated.size()) * config.sigma);
  StepResult out;
  out.params.resize(d);
  double sq = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    const double u = scale * grad[k];
    sq += u * u;
    out.params[k] = params[k] + u;
  }
  out.update_l2 = std::sqrt(sq);
  if (!std::isfinite(out.update_l2)) throw DivergenceError("non-finite parameter update");
  return out;
}

// ---------------------------------------------------------------------------

TrainResult train(const std::vector<Instance>& instances, const EsConfig& config, const TrainOptions& options) {
  validate(config);
  if (instances.empty()) throw ValidationError("training needs at least one instance");
  const std::size_t fleet = instances.front().vehicles.size();
  std::vector<std::string> ids;
  for (const auto& inst : instances) {
    if (inst.vehicles.size() != fleet) throw ShapeError("training instances must share one fleet size");
    if (inst.task_count() == 0) throw ValidationError("training instance '" + inst.id + "' has no tasks");
    ids.push_back(inst.id);
  }
  {
    std::set<std::string> unique(ids.begin(), ids.end());
    if (unique.size() != ids.size()) throw ValidationError("training instance ids must be unique");
  }

  TrainResult result;
  result.arch = MlpArch::for_fleet(fleet, config.hidden);
  result.initial_params = init_params(result.arch, config.seed);
  std::vector<double> theta = result.initial_params;
  const std::size_t dim = theta.size();

  AisState ais(ids, config.window);
  const std::size_t lambda = config.population;
  const std::size_t groups = config.antithetic ? lambda / 2 : lambda;
  const std::size_t group_size = config.antithetic ? 2 : 1;

  for (std::size_t gen = 0; gen < config.generations; ++gen) {
    const auto started = std::chrono::steady_clock::now();

    std::vector<std::size_t> assigned(groups);
    for (std::size_t k = 0; k < groups; ++k)
      assigned[k] = ais_select(ais, config, derive_seed({config.seed, gen, k, tag(Stream::kInstanceDraw)}));

    std::vector<std::vector<double>> base(groups);
    std::vector<EpisodeValues> values(lambda);
    parallel_for(groups, options.jobs, [&](std::size_t k) {
      base[k] = perturbation(dim, config.seed, gen, k);
      const std::uint64_t episode_seed = derive_seed({config.seed, gen, k, tag(Stream::kEpisode)});
      std::vector<double> candidate(dim);
      for (std::size_t m = 0; m < group_size; ++m) {
        const double sign = m == 0 ? 1.0 : -1.0;
        for (std::size_t q = 0; q < dim; ++q) candidate[q] = theta[q] + sign * config.sigma * base[k][q];
        values[k * group_size + m] =
            evaluate(result.arch, candidate, instances[assigned[k]], episode_seed, DecodeMode::kSample);
      }
    });

    GenerationLog row;
    row.generation = gen;
    row.mean_reward.assign(instances.size(), 0.0);
    row.mean_cost.assign(instances.size(), 0.0);
    std::vector<std::size_t> episodes(instances.size(), 0);
    std::vector<FitnessRecord> records(lambda);
    std::size_t feasible = 0;
    for (std::size_t i = 0; i < lambda; ++i) {
      const std::size_t inst = assigned[i / group_size];
      records[i] = FitnessRecord{i, ids[inst], values[i].reward, values[i].cost, std::nullopt};
      ais.record(inst, values[i].reward);
      row.mean_reward[inst] += values[i].reward;
      row.mean_cost[inst] += values[i].cost;
      ++episodes[inst];
      if (values[i].cost <= config.xi) ++feasible;
    }
    for (std::size_t j = 0; j < instances.size(); ++j) {
      if (episodes[j] == 0) {
        row.mean_reward[j] = row.mean_cost[j] = std::numeric_limits<double>::quiet_NaN();
      } else {
        row.mean_reward[j] /= static_cast<double>(episodes[j]);
        row.mean_cost[j] /= static_cast<double>(episodes[j]);
      }
    }

    intrinsic_stochastic_ranking(records, config.p_f, config.xi,
                                 derive_seed({config.seed, gen, tag(Stream::kRanking)}));

    std::vector<ScoredNoise> scored(lambda);
    for (std::size_t i = 0; i < lambda; ++i) {
      const std::size_t k = i / group_size;
      scored[i].noise = base[k];
      if (i % group_size == 1)
        for (double& e : scored[i].noise) e = -e;
      scored[i].fitness = shaped_fitness(*records[i].rank_fitness, episodes[assigned[k]]);
    }

    StepResult step;
    try {
      step = gradient_step(theta, scored, config);
    } catch (const DivergenceError& e) {
      throw TrainingDiverged(std::string(e.what()) + " at generation " + std::to_string(gen), gen, theta);
    }
    theta = std::move(step.params);

    row.counts = ais.counts();
    row.update_l2 = step.update_l2;
    row.feasible_fraction = static_cast<double>(feasible) / static_cast<double>(lambda);
    row.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    if (options.on_generation) options.on_generation(row);
    result.log.push_back(std::move(row));

    if (options.on_checkpoint && config.checkpoint_every > 0 && (gen + 1) % config.checkpoint_every == 0)
      options.on_checkpoint(gen + 1, theta);
  }
  result.params = std::move(theta);
  return result;
}

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

std::string log_csv_header(const std::vector<std::string>& ids) {
  std::ostringstream os;
  os << "generation,wall_ms";
  for (const auto& id : ids) os << ",mean_JR:" << id;
  for (const auto& id : ids) os << ",mean_JC:" << id;
  for (const auto& id : ids) os << ",N:" << id;
  os << ",update_l2,feasible_fraction";
  return os.str();
}

std::string log_csv_row(const GenerationLog& r) {
  std::ostringstream os;
  os << r.generation << ',' << num(r.wall_ms);
  for (double v : r.mean_reward) os << ',' << num(v);
  for (double v : r.mean_cost) os << ',' << num(v);
  for (auto n : r.counts) os << ',' << n;
  os << ',' << num(r.update_l2) << ',' << num(r.feasible_fraction);
  return os.str();
}

}  // namespace dmh
