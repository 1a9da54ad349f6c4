#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace dmh {

using Time = double;
using TaskId = std::int64_t;
using VehicleId = std::int64_t;

enum class SiteKind { kPickup, kDelivery, kBoth, kDepot };

struct Site {
  std::string id;
  SiteKind kind = SiteKind::kBoth;
};

// Sites are referenced by index inside the library; the JSON form uses ids.
struct TaskSpec {
  TaskId id = 0;
  std::size_t pickup = 0;
  std::size_t delivery = 0;
  Time arrival = 0.0;
  Time expiry = 0.0;

  Time due() const noexcept { return arrival + expiry; }
};

struct VehicleSpec {
  VehicleId id = 0;
  std::size_t start_site = 0;
};

struct BreakdownSpec {
  VehicleId vehicle = 0;
  Time at = 0.0;
  Time repair = 0.0;
};

/// Static description of one material-handling problem: the site graph with
/// its travel durations, the fleet, the release schedule and the breakdowns.
struct Instance {
  std::string id;
  std::vector<Site> sites;
  std::vector<std::vector<Time>> travel;
  std::vector<VehicleSpec> vehicles;
  std::vector<TaskSpec> tasks;
  std::vector<BreakdownSpec> breakdowns;

  std::size_t task_count() const noexcept { return tasks.size(); }
  Time travel_time(std::size_t from, std::size_t to) const { return travel[from][to]; }
  Time laden_time(const TaskSpec& t) const { return travel[t.pickup][t.delivery]; }

  /// Index of the vehicle with the given id; throws ValidationError if absent.
  std::size_t vehicle_index(VehicleId id) const;
  std::size_t site_index(const std::string& site_id) const;
  std::size_t task_index(TaskId id) const;
};

/// Checks every structural invariant and throws ValidationError naming the
/// first one that is broken.
void validate(const Instance& instance);

nlohmann::json to_json(const Instance& instance);
/// Parses and validates. Schema problems name the offending field.
Instance instance_from_json(const nlohmann::json& doc);

Instance load_instance(const std::filesystem::path& path);
void save_instance(const Instance& instance, const std::filesystem::path& path);

/// Loads every `*.json` file of a directory except `manifest.json`, sorted by
/// file name.
std::vector<Instance> load_instance_dir(const std::filesystem::path& dir);

std::string to_string(SiteKind kind);

}  // namespace dmh
