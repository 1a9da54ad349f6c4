#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dmh/error.hpp"
#include "dmh/instance.hpp"
#include "dmh/policy.hpp"

namespace dmh {

/// Settings of the constrained evolution-strategies trainer.
struct EsConfig {
  std::size_t population = 256;  // λ, even when antithetic
  std::size_t generations = 128;
  double sigma = 0.05;
  double step_size = 0.02;
  double xi = 50.0;       // tardiness threshold
  double p_f = 0.45;      // probability of comparing by reward regardless of feasibility
  double ucb_alpha = 1.0;
  std::size_t window = 10;  // reward window per training instance
  std::uint64_t seed = 0;
  bool antithetic = true;
  // Stored for completeness; episodes are scored undiscounted.
  double gamma = 0.97;
  std::size_t checkpoint_every = 8;
  std::vector<std::size_t> hidden{128, 128};
};

void validate(const EsConfig& config);
nlohmann::json to_json(const EsConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
EsConfig es_config_from_json(const nlohmann::json& doc);

/// Episodic values of one evaluation: reward J_R = -makespan and
/// cost J_C = tardiness.
struct EpisodeValues {
  double reward = 0.0;
  double cost = 0.0;

  bool operator==(const EpisodeValues&) const = default;
};

EpisodeValues evaluate(const MlpArch& arch, std::span<const double> params, const Instance& instance,
                       std::uint64_t seed, DecodeMode mode = DecodeMode::kGreedy);

/// Squared hinge above the threshold: max(0, cost - xi)^2.
double penalty(double cost, double xi);

/// Smooth stand-in for the hinge: rho * ln(1 + exp((g - xi) / rho)).
double relaxed_penalty(double g_val, double xi, double rho);

/// p_f * F - (1 - p_f) * relaxed_penalty(g).
double sr_surrogate(double f_val, double g_val, double xi, double rho, double p_f);

// ---------------------------------------------------------------------------
// Population sampling

/// Standard normal perturbation for one antithetic pair (or one individual
/// when sampling is not mirrored). Depends only on (seed, generation, index).
std::vector<double> perturbation(std::size_t dim, std::uint64_t seed, std::size_t generation, std::size_t index);

struct Candidate {
  std::vector<double> noise;
  std::vector<double> params;
};

/// λ candidates. Mirrored sampling emits (+ε, -ε) for each of λ/2 base
/// noises, in that order.
std::vector<Candidate> sample_population(std::span<const double> params, const EsConfig& config,
                                         std::size_t generation);

/// Antithetic estimate of the gradient of the Gaussian-smoothed objective:
/// (1 / (2σ N)) Σ (f(θ + σε) - f(θ - σε)) ε over N pairs.
std::vector<double> estimate_gradient(const std::function<double(std::span<const double>)>& f,
                                      std::span<const double> theta, double sigma, std::size_t pairs,
                                      std::uint64_t seed);

// ---------------------------------------------------------------------------
// Adaptive instance sampling

class AisState {
 public:
  AisState(std::vector<std::string> ids, std::size_t window);
  /// Restores a state from explicit reward windows and selection counts.
  AisState(std::vector<std::string> ids, std::size_t window, std::vector<std::vector<double>> rewards,
           std::vector<std::size_t> counts);

  std::size_t size() const noexcept { return ids_.size(); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  const std::vector<std::size_t>& counts() const noexcept { return counts_; }
  const std::deque<double>& rewards(std::size_t instance) const { return windows_.at(instance); }

  /// Pushes an episodic reward, evicting the oldest beyond the window.
  void record(std::size_t instance, double reward);

  /// Mean normalised distance of the window's rewards from its maximum.
  /// Windows with fewer than two values or zero range score 1.
  double advantage(std::size_t instance) const;

  /// advantage + ucb_alpha * sqrt(log(total count) / count); requires every
  /// count to be positive.
  std::vector<double> scores(double ucb_alpha) const;

  /// Selection distribution. While some instance has never been selected the
  /// lowest such index gets probability 1.
  std::vector<double> probabilities(double ucb_alpha) const;

  /// Draws an instance and increments its count.
  std::size_t select(double ucb_alpha, std::uint64_t draw_seed);

 private:
  std::vector<std::string> ids_;
  std::size_t window_;
  std::vector<std::deque<double>> windows_;
  std::vector<std::size_t> counts_;
};

std::size_t ais_select(AisState& state, const EsConfig& config, std::uint64_t draw_seed);

// ---------------------------------------------------------------------------
// Intrinsic stochastic ranking

struct FitnessRecord {
  std::size_t noise_index = 0;
  std::string instance_id;
  std::optional<double> reward;  // J_R
  std::optional<double> cost;    // J_C
  std::optional<double> rank_fitness;
};

/// Groups records by instance (first-appearance order) and runs, per group of
/// size μ', μ' sweeps of adjacent stochastic comparisons. Two neighbours are
/// compared by reward when both are feasible or with probability p_f, and by
/// penalty otherwise. The record finishing at position i (0-based) gets
/// fitness μ' - i. Throws ValidationError on a record without reward or cost.
void intrinsic_stochastic_ranking(std::span<FitnessRecord> records, double p_f, double xi,
                                  std::uint64_t sweep_seed);

/// Centers rank r of a buffer of size μ' to (r - (μ'+1)/2) / μ'.
double shaped_fitness(double rank, std::size_t buffer_size);

struct ScoredNoise {
  std::vector<double> noise;
  double fitness = 0.0;
};

struct StepResult {
  std::vector<double> params;
  double update_l2 = 0.0;
};

/// θ + α/(λσ) Σ f_i ε_i. With mirrored sampling the entries come in (+ε, -ε)
/// order and the sum equals Σ_pairs (f⁺ - f⁻) ε. Without mirroring the
/// fitness values are centered on their mean first. Throws DivergenceError
/// when the result is not finite.
StepResult gradient_step(std::span<const double> params, std::span<const ScoredNoise> evaluated,
                         const EsConfig& config);

// ---------------------------------------------------------------------------
// Training loop

struct GenerationLog {
  std::size_t generation = 0;
  double wall_ms = 0.0;
  std::vector<double> mean_reward;  // per instance, NaN when not selected
  std::vector<double> mean_cost;
  std::vector<std::size_t> counts;
  double update_l2 = 0.0;
  double feasible_fraction = 0.0;
};

struct TrainOptions {
  std::size_t jobs = 1;
  /// Called with the parameters after every `checkpoint_every` generations.
  std::function<void(std::size_t generation, const std::vector<double>& params)> on_checkpoint;
  std::function<void(const GenerationLog&)> on_generation;
};

struct TrainResult {
  MlpArch arch;
  std::vector<double> initial_params;
  std::vector<double> params;
  std::vector<GenerationLog> log;
};

/// Raised when an update turns non-finite; carries the last finite
/// parameters so callers can keep them.
class TrainingDiverged : public DivergenceError {
 public:
  TrainingDiverged(const std::string& what, std::size_t generation, std::vector<double> last_good)
      : DivergenceError(what), generation_(generation), last_good_(std::move(last_good)) {}
  std::size_t generation() const noexcept { return generation_; }
  const std::vector<double>& last_good() const noexcept { return last_good_; }

 private:
  std::size_t generation_;
  std::vector<double> last_good_;
};

/// All instances must share one fleet size.
TrainResult train(const std::vector<Instance>& instances, const EsConfig& config, const TrainOptions& options = {});

std::string log_csv_header(const std::vector<std::string>& instance_ids);
std::string log_csv_row(const GenerationLog& row);

}  // namespace dmh
