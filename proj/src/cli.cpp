#include "dmh/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>

#include "dmh/acerl.hpp"
#include "dmh/config.hpp"
#include "dmh/error.hpp"
#include "dmh/harness.hpp"
#include "dmh/instance.hpp"
#include "dmh/parallel.hpp"
#include "dmh/policy.hpp"
#include "dmh/rules.hpp"

namespace dmh::cli {

namespace fs = std::filesystem;

namespace {

struct Flags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> instances;
  std::optional<std::size_t> jobs;
  std::optional<std::size_t> count;
  std::optional<double> delta;
  std::vector<std::string> policies;
  bool force = false;
};

RunConfig resolve(const Flags& f) {
  RunConfig c = f.config_path.empty() ? RunConfig{} : load_run_config(f.config_path);
  if (f.seed) c.seed = *f.seed;
  if (f.out) c.output_dir = *f.out;
  if (f.instances) c.instance_dir = *f.instances;
  if (f.jobs) c.jobs = *f.jobs;
  if (f.count) c.generate.count = *f.count;
  if (f.delta) c.noise_delta = *f.delta;
  c.es.seed = c.seed;
  validate(c.es);
  return c;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory '" + dir.string() + "'");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void refuse_existing(const std::vector<fs::path>& targets, bool force) {
  if (force) return;
  for (const auto& t : targets)
    if (fs::exists(t)) throw IoError("'" + t.string() + "' already exists (use --force to overwrite)");
}

nlohmann::json manifest(const std::vector<Instance>& instances, const RunConfig& c) {
  nlohmann::json ids = nlohmann::json::array();
  for (const auto& inst : instances) ids.push_back(inst.id);
  return {{"ids", ids}, {"seed", c.seed}, {"config_hash", config_hash(c)}};
}

int cmd_generate(const RunConfig& c, bool force, std::ostream& out) {
  const fs::path dir = c.output_dir;
  const auto instances = generate_instances(c.generate.count, c.generate.params, c.seed, c.generate.prefix);
  std::vector<fs::path> targets{dir / "manifest.json"};
  for (const auto& inst : instances) targets.push_back(dir / (inst.id + ".json"));
  ensure_dir(dir);
  refuse_existing(targets, force);
  for (const auto& inst : instances) save_instance(inst, dir / (inst.id + ".json"));
  auto m = manifest(instances, c);
  const auto& g = c.generate.params;
  m["generator"] = {{"sites", g.sites},   {"vehicles", g.vehicles},       {"tasks", g.tasks},
                    {"scale", g.scale},   {"breakdown_rate", g.breakdown_rate}, {"load", g.load}};
  write_text(dir / "manifest.json", m.dump(2) + "\n");
  out << "wrote " << instances.size() << " instance(s) to " << dir.string() << '\n';
  return 0;
}

int cmd_noise(const RunConfig& c, bool force, std::ostream& out) {
  const auto instances = load_instance_dir(c.instance_dir);
  const auto noisy = noise_instances(instances, c.noise_delta, c.seed);
  const fs::path dir = c.output_dir;
  std::vector<fs::path> targets{dir / "manifest.json"};
  for (const auto& inst : noisy) targets.push_back(dir / (inst.id + ".json"));
  ensure_dir(dir);
  refuse_existing(targets, force);
  for (const auto& inst : noisy) save_instance(inst, dir / (inst.id + ".json"));
  auto m = manifest(noisy, c);
  m["delta"] = c.noise_delta;
  write_text(dir / "manifest.json", m.dump(2) + "\n");
  out << "wrote " << noisy.size() << " noised instance(s) (delta=" << c.noise_delta << ") to " << dir.string()
      << '\n';
  return 0;
}

int cmd_train(const RunConfig& c, std::ostream& out) {
  const auto instances = load_instance_dir(c.instance_dir);
  if (instances.empty()) throw ValidationError("no instance files in '" + c.instance_dir + "'");
  const fs::path dir = c.output_dir;
  ensure_dir(dir);
  const std::string hash = config_hash(c);
  const MlpArch arch = MlpArch::for_fleet(instances.front().vehicles.size(), c.es.hidden);
  auto checkpoint = [&](const std::vector<double>& theta) { return Checkpoint{arch, theta, hash, c.seed}; };
  const fs::path final_path = c.checkpoint.empty() ? dir / "checkpoint.json" : fs::path(c.checkpoint);

  std::vector<std::string> ids;
  for (const auto& inst : instances) ids.push_back(inst.id);
  std::ofstream log(dir / "train_log.csv", std::ios::binary);
  if (!log) throw IoError("cannot write '" + (dir / "train_log.csv").string() + "'");
  log << log_csv_header(ids) << '\n';

  TrainOptions opts;
  opts.jobs = resolve_jobs(c.jobs);
  opts.on_generation = [&](const GenerationLog& row) { log << log_csv_row(row) << '\n' << std::flush; };
  opts.on_checkpoint = [&](std::size_t gen, const std::vector<double>& theta) {
    char name[48];
    std::snprintf(name, sizeof name, "checkpoint-g%04zu.json", gen);
    save_checkpoint(checkpoint(theta), dir / name);
  };
  try {
    const auto result = train(instances, c.es, opts);
    save_checkpoint(checkpoint(result.params), final_path);
  } catch (const TrainingDiverged& e) {
    save_checkpoint(checkpoint(e.last_good()), dir / "checkpoint-last-good.json");
    throw;
  }
  out << "trained on " << instances.size() << " instance(s) for " << c.es.generations << " generation(s); wrote "
      << final_path.string() << '\n';
  return 0;
}

int cmd_evaluate(const RunConfig& c, const std::vector<std::string>& extra, std::ostream& out) {
  const auto instances = load_instance_dir(c.instance_dir);
  if (instances.empty()) throw ValidationError("no instance files in '" + c.instance_dir + "'");
  std::vector<std::string> specs = c.eval.policies;
  if (!c.checkpoint.empty()) specs.push_back(c.checkpoint);
  for (const auto& e : extra)
    if (std::find(specs.begin(), specs.end(), e) == specs.end()) specs.push_back(e);

  std::vector<NamedPolicy> policies;
  for (const auto& spec : specs) {
    if (auto kind = parse_baseline(spec)) {
      policies.push_back({spec, baseline_policy(*kind)});
      continue;
    }
    const Checkpoint ckpt = load_checkpoint(spec);
    for (const auto& inst : instances) {
      if (ckpt.arch.input != observation_size(inst.vehicles.size()) ||
          ckpt.arch.actions != action_count(inst.vehicles.size())) {
        throw ShapeError("checkpoint '" + spec + "' does not fit the fleet of instance '" + inst.id + "'");
      }
    }
    auto theta = std::make_shared<const std::vector<double>>(ckpt.theta);
    policies.push_back({fs::path(spec).stem().string(), mlp_policy(ckpt.arch, theta, DecodeMode::kGreedy)});
  }

  const auto report =
      evaluate_policies(policies, instances, c.eval.trials, c.eval.seeds, c.eval.xi, resolve_jobs(c.jobs));
  const fs::path dir = c.output_dir;
  ensure_dir(dir);
  write_text(dir / "report.csv", report_csv(report));
  auto summary = report_summary(report);
  summary["config_hash"] = config_hash(c);
  summary["seed"] = c.seed;
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  for (const auto& name : report.policy_order) {
    const auto& s = report.scores.at(name);
    out << name << ": M=" << s.makespan_score << " C=" << s.tardiness_score << " P=" << s.satisfaction << '\n';
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dynamic material handling: simulation, constrained ES training and evaluation", "dmh"};
  app.require_subcommand(1);
  Flags f;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config_path, "JSON run configuration");
    sub->add_option("--seed", f.seed, "master seed (overrides the config)");
    sub->add_option("--out", f.out, "output directory");
    sub->add_option("--jobs", f.jobs, "worker threads for episode evaluation (default: DMH_JOBS or all cores)");
  };
  auto* gen = app.add_subcommand("generate", "write seeded procedural instances");
  add_common(gen);
  gen->add_option("--count", f.count, "number of instances");
  gen->add_flag("--force", f.force, "overwrite existing files");
  auto* noise = app.add_subcommand("noise", "perturb task arrival times by +/- delta");
  add_common(noise);
  noise->add_option("--instances", f.instances, "input instance directory");
  noise->add_option("--delta", f.delta, "noise magnitude");
  noise->add_flag("--force", f.force, "overwrite existing files");
  auto* trn = app.add_subcommand("train", "train a policy with the constrained ES trainer");
  add_common(trn);
  trn->add_option("--instances", f.instances, "training instance directory");
  auto* ev = app.add_subcommand("evaluate", "compare baselines and checkpoints");
  add_common(ev);
  ev->add_option("--instances", f.instances, "evaluation instance directory");
  ev->add_option("--policy", f.policies, "baseline name or checkpoint path (repeatable)");

  std::vector<std::string> argv_storage{"dmh"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_storage) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : static_cast<int>(ExitCode::kValidation);
  }

  try {
    const RunConfig c = resolve(f);
    if (*gen) return cmd_generate(c, f.force, out);
    if (*noise) return cmd_noise(c, f.force, out);
    if (*trn) return cmd_train(c, out);
    if (*ev) return cmd_evaluate(c, f.policies, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(e.exit_code());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::kIo);
  }
  return static_cast<int>(ExitCode::kValidation);
}

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace dmh::cli
