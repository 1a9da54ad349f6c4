#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dmh/acerl.hpp"
#include "dmh/harness.hpp"

namespace dmh {

struct EvalSettings {
  std::size_t trials = 30;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  double xi = 50.0;
  std::vector<std::string> policies{"FCFS", "EDD", "NVF", "STD", "MIX", "Random"};
};

struct GenerateSettings {
  std::size_t count = 8;
  std::string prefix = "DMH";
  GeneratorParams params;
};

/// Everything a CLI run needs. The master `seed` also drives es.seed.
struct RunConfig {
  std::string instance_dir = "instances";
  std::string output_dir = "out";
  std::string checkpoint;
  std::uint64_t seed = 0;
  EsConfig es;
  EvalSettings eval;
  GenerateSettings generate;
  double noise_delta = 0.0;
  std::size_t jobs = 0;  // 0: DMH_JOBS or hardware concurrency
};

nlohmann::json to_json(const RunConfig& config);
/// Missing keys keep defaults; unknown keys and wrong types are rejected.
RunConfig run_config_from_json(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);

/// 16 hex digits of FNV-1a over the canonical JSON of the fields that affect
/// artifact contents (paths and the worker count are excluded).
std::string config_hash(const RunConfig& config);

}  // namespace dmh
