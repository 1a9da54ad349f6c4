#include "dmh/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <tuple>

#include "dmh/error.hpp"
#include "dmh/rules.hpp"

namespace dmh {

Time feature_horizon(const Instance& inst) {
  Time h = 0.0;
  for (const auto& t : inst.tasks) h += inst.laden_time(t);
  return h > 0.0 ? h : 1.0;
}

std::vector<double> featurize(const SimState& s, const Instance& inst) {
  const Time h = feature_horizon(inst);
  std::vector<double> obs(observation_size(s.vehicles.size()), 0.0);

  std::vector<std::size_t> slots(s.pool.begin(), s.pool.end());
  std::sort(slots.begin(), slots.end(), [&](std::size_t a, std::size_t b) {
    const auto& ta = inst.tasks[a];
    const auto& tb = inst.tasks[b];
    return std::tie(ta.arrival, ta.id) < std::tie(tb.arrival, tb.id);
  });
  const std::size_t used = std::min(slots.size(), kTaskSlots);
  for (std::size_t k = 0; k < used; ++k) {
    const auto& t = inst.tasks[slots[k]];
    double* f = obs.data() + k * kTaskFeatures;
    f[0] = (t.due() - s.clock) / h;
    f[1] = (s.clock - t.arrival) / h;
    f[2] = inst.laden_time(t) / h;
    f[3] = 1.0;
  }

  const double site_scale = inst.sites.size() > 1 ? static_cast<double>(inst.sites.size() - 1) : 1.0;
  for (std::size_t v = 0; v < s.vehicles.size(); ++v) {
    const auto& vs = s.vehicles[v];
    double* f = obs.data() + kTaskSlots * kTaskFeatures + v * kVehicleFeatures;
    f[static_cast<std::size_t>(vs.state)] = 1.0;
    f[3] = (s.available_at(v) - s.clock) / h;
    // Where the vehicle will be once it is available.
    const std::size_t site = vs.state == VehicleState::kWorking ? inst.tasks[*vs.task].delivery : vs.site;
    f[4] = static_cast<double>(site) / site_scale;
  }
  return obs;
}

std::size_t MlpArch::parameter_count() const noexcept {
  std::size_t n = 0;
  std::size_t in = input;
  for (std::size_t width : hidden) {
    n += in * width + width;
    in = width;
  }
  return n + in * actions + actions;
}

MlpArch MlpArch::for_fleet(std::size_t vehicles, std::vector<std::size_t> hidden) {
  return MlpArch{observation_size(vehicles), std::move(hidden), action_count(vehicles)};
}

namespace {

// y = W x + b for one layer starting at params[offset]; returns new offset.
std::size_t affine(std::span<const double> params, std::size_t offset, std::span<const double> x,
                   std::vector<double>& y) {
  const std::size_t in = x.size();
  const double* w = params.data() + offset;
  const double* b = w + y.size() * in;
  for (std::size_t o = 0; o < y.size(); ++o) {
    const double* row = w + o * in;
    double acc = b[o];
    for (std::size_t i = 0; i < in; ++i) acc += row[i] * x[i];
    y[o] = acc;
  }
  return offset + y.size() * in + y.size();
}

}  // namespace

std::vector<double> forward(const MlpArch& arch, std::span<const double> params, std::span<const double> obs) {
  if (params.size() != arch.parameter_count()) {
    throw ShapeError("parameter vector has " + std::to_string(params.size()) + " entries, architecture needs " +
                     std::to_string(arch.parameter_count()));
  }
  if (obs.size() != arch.input) {
    throw ShapeError("observation has " + std::to_string(obs.size()) + " entries, network input is " +
                     std::to_string(arch.input));
  }
  std::vector<double> x(obs.begin(), obs.end());
  std::vector<double> y;
  std::size_t offset = 0;
  for (std::size_t width : arch.hidden) {
    y.assign(width, 0.0);
    offset = affine(params, offset, x, y);
    for (double& v : y) v = std::tanh(v);
    x.swap(y);
  }
  y.assign(arch.actions, 0.0);
  affine(params, offset, x, y);
  return y;
}

std::vector<double> init_params(const MlpArch& arch, std::uint64_t seed) {
  Rng rng = make_rng({seed, tag(Stream::kInit)});
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> p;
  p.reserve(arch.parameter_count());
  std::size_t in = arch.input;
  auto layer = [&](std::size_t out) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(in, 1)));
    for (std::size_t k = 0; k < out * in; ++k) p.push_back(scale * normal(rng));
    p.insert(p.end(), out, 0.0);
    in = out;
  };
  for (std::size_t width : arch.hidden) layer(width);
  layer(arch.actions);
  return p;
}

std::vector<bool> action_mask(const SimState& s) {
  std::vector<bool> mask(action_count(s.vehicles.size()), false);
  for (std::size_t v = 0; v < s.vehicles.size(); ++v) {
    if (s.vehicles[v].state != VehicleState::kIdle) continue;
    for (std::size_t r = 0; r < kRuleCount; ++r) mask[v * kRuleCount + r] = true;
  }
  return mask;
}

std::vector<double> masked_softmax(std::span<const double> logits, const std::vector<bool>& mask) {
  if (mask.size() != logits.size()) throw ShapeError("mask and logits differ in length");
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < logits.size(); ++i)
    if (mask[i]) top = std::max(top, logits[i]);
  if (top == -std::numeric_limits<double>::infinity()) throw ConstraintViolation("no legal action");
  std::vector<double> p(logits.size(), 0.0);
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!mask[i]) continue;
    p[i] = std::exp(logits[i] - top);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

Action decode_action(std::span<const double> logits, const std::vector<bool>& mask, DecodeMode mode, Rng& rng) {
  if (mask.size() != logits.size()) throw ShapeError("mask and logits differ in length");
  std::size_t chosen = logits.size();
  if (mode == DecodeMode::kGreedy) {
    for (std::size_t i = 0; i < logits.size(); ++i) {
      if (mask[i] && (chosen == logits.size() || logits[i] > logits[chosen])) chosen = i;
    }
    if (chosen == logits.size()) throw ConstraintViolation("no legal action");
  } else {
    const auto p = masked_softmax(logits, mask);
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (!mask[i]) continue;
      acc += p[i];
      chosen = i;
      if (u < acc) break;
    }
  }
  return Action{static_cast<RuleId>(chosen % kRuleCount), chosen / kRuleCount};
}

Action decode_action(std::span<const double> logits, const std::vector<bool>& mask, DecodeMode mode,
                     std::uint64_t seed) {
  Rng rng{seed};
  return decode_action(logits, mask, mode, rng);
}

DecisionFn mlp_policy(MlpArch arch, std::shared_ptr<const std::vector<double>> params, DecodeMode mode) {
  if (params->size() != arch.parameter_count()) throw ShapeError("checkpoint theta does not match its architecture");
  return [arch = std::move(arch), params = std::move(params), mode](const SimState& s, const Instance& inst,
                                                                   Rng& rng) {
    if (action_count(s.vehicles.size()) != arch.actions || observation_size(s.vehicles.size()) != arch.input) {
      throw ShapeError("policy was built for a different fleet size than instance '" + inst.id + "'");
    }
    const auto logits = forward(arch, *params, featurize(s, inst));
    const Action a = decode_action(logits, action_mask(s), mode, rng);
    return Decision{a.vehicle, a.rule, std::nullopt};
  };
}

nlohmann::json to_json(const Checkpoint& c) {
  return nlohmann::json{
      {"arch", {{"input", c.arch.input}, {"hidden", c.arch.hidden}, {"actions", c.arch.actions}}},
      {"theta", c.theta},
      {"config_hash", c.config_hash},
      {"seed", c.seed},
  };
}

Checkpoint checkpoint_from_json(const nlohmann::json& doc) {
  Checkpoint c;
  try {
    const auto& arch = doc.at("arch");
    c.arch.input = arch.at("input").get<std::size_t>();
    c.arch.hidden = arch.at("hidden").get<std::vector<std::size_t>>();
    c.arch.actions = arch.at("actions").get<std::size_t>();
    c.theta = doc.at("theta").get<std::vector<double>>();
    c.config_hash = doc.at("config_hash").get<std::string>();
    c.seed = doc.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("checkpoint: ") + e.what());
  }
  if (c.theta.size() != c.arch.parameter_count()) {
    throw ShapeError("checkpoint theta has " + std::to_string(c.theta.size()) + " entries, architecture needs " +
                     std::to_string(c.arch.parameter_count()));
  }
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint '" + path.string() + "'");
  out << to_json(ckpt).dump() << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read checkpoint '" + path.string() + "'");
  try {
    return checkpoint_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("'" + path.string() + "': " + e.what());
  }
}

}  // namespace dmh
