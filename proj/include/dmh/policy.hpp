#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dmh/sim.hpp"

namespace dmh {

// Observation layout: kTaskSlots task slots of kTaskFeatures values, then
// kVehicleFeatures values per vehicle.
//   task slot:  slack, waiting, laden travel, present flag
//   vehicle:    idle, working, broken one-hot, time until available, site
// Times are divided by the instance horizon (sum of laden travel times).
inline constexpr std::size_t kTaskSlots = 10;
inline constexpr std::size_t kTaskFeatures = 4;
inline constexpr std::size_t kVehicleFeatures = 5;

constexpr std::size_t observation_size(std::size_t vehicles) noexcept {
  return kTaskSlots * kTaskFeatures + vehicles * kVehicleFeatures;
}
constexpr std::size_t action_count(std::size_t vehicles) noexcept { return kRuleCount * vehicles; }

/// Time scale used to normalise observation times; never zero.
Time feature_horizon(const Instance& inst);

std::vector<double> featurize(const SimState& state, const Instance& inst);

/// Fully connected tanh network with a linear output layer.
struct MlpArch {
  std::size_t input = 0;
  std::vector<std::size_t> hidden{128, 128};
  std::size_t actions = 0;

  std::size_t parameter_count() const noexcept;
  static MlpArch for_fleet(std::size_t vehicles, std::vector<std::size_t> hidden = {128, 128});

  bool operator==(const MlpArch&) const = default;
};

/// Parameters are laid out layer by layer: weights (row-major, out x in)
/// followed by biases.
std::vector<double> forward(const MlpArch& arch, std::span<const double> params, std::span<const double> obs);

/// Scaled Gaussian weights (1/sqrt(fan_in)) and zero biases.
std::vector<double> init_params(const MlpArch& arch, std::uint64_t seed);

/// Entry (vehicle * 4 + rule) is legal iff the vehicle is Idle.
std::vector<bool> action_mask(const SimState& state);

enum class DecodeMode { kGreedy, kSample };

struct Action {
  RuleId rule = RuleId::kFCFS;
  std::size_t vehicle = 0;

  bool operator==(const Action&) const = default;
};

Action decode_action(std::span<const double> logits, const std::vector<bool>& mask, DecodeMode mode, Rng& rng);
Action decode_action(std::span<const double> logits, const std::vector<bool>& mask, DecodeMode mode,
                     std::uint64_t seed);

/// Softmax over the legal entries; illegal entries get probability 0.
std::vector<double> masked_softmax(std::span<const double> logits, const std::vector<bool>& mask);

/// Decision function backed by the network. Throws ShapeError if the
/// architecture does not fit the instance it is run on.
DecisionFn mlp_policy(MlpArch arch, std::shared_ptr<const std::vector<double>> params, DecodeMode mode);

struct Checkpoint {
  MlpArch arch;
  std::vector<double> theta;
  std::string config_hash;
  std::uint64_t seed = 0;
};

nlohmann::json to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const nlohmann::json& doc);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace dmh
