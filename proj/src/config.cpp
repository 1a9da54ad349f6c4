#include "dmh/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "dmh/error.hpp"

namespace dmh {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where) {
  if (!obj.is_object()) throw ValidationError("field '" + where + "': expected an object");
  for (const auto& [key, _] : obj.items())
    if (!known.contains(key)) throw ValidationError("unknown field '" + where + "." + key + "'");
}

template <class T>
void read(const json& obj, const char* key, T& field, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    it->get_to(field);
  } catch (const json::exception&) {
    throw ValidationError("field '" + where + "." + key + "' has the wrong type");
  }
}

json es_without_seed(const EsConfig& es) {
  json j = to_json(es);
  j.erase("seed");
  return j;
}

json content_json(const RunConfig& c) {
  const auto& g = c.generate.params;
  return json{
      {"seed", c.seed},
      {"es", es_without_seed(c.es)},
      {"eval", {{"trials", c.eval.trials}, {"seeds", c.eval.seeds}, {"xi", c.eval.xi}, {"policies", c.eval.policies}}},
      {"generate",
       {{"count", c.generate.count},
        {"prefix", c.generate.prefix},
        {"sites", g.sites},
        {"vehicles", g.vehicles},
        {"tasks", g.tasks},
        {"breakdown_rate", g.breakdown_rate},
        {"scale", g.scale},
        {"load", g.load}}},
      {"noise", {{"delta", c.noise_delta}}},
  };
}

}  // namespace

json to_json(const RunConfig& c) {
  json j = content_json(c);
  j["instance_dir"] = c.instance_dir;
  j["output_dir"] = c.output_dir;
  j["checkpoint"] = c.checkpoint;
  j["jobs"] = c.jobs;
  return j;
}

RunConfig run_config_from_json(const json& doc) {
  RunConfig c;
  reject_unknown(doc, {"instance_dir", "output_dir", "checkpoint", "seed", "es", "eval", "generate", "noise", "jobs"},
                 "config");
  read(doc, "instance_dir", c.instance_dir, "config");
  read(doc, "output_dir", c.output_dir, "config");
  read(doc, "checkpoint", c.checkpoint, "config");
  read(doc, "seed", c.seed, "config");
  read(doc, "jobs", c.jobs, "config");
  if (auto it = doc.find("es"); it != doc.end()) {
    if (it->is_object() && it->contains("seed"))
      throw ValidationError("field 'es.seed' is not allowed; set the top-level 'seed'");
    c.es = es_config_from_json(*it);
  }
  if (auto it = doc.find("eval"); it != doc.end()) {
    reject_unknown(*it, {"trials", "seeds", "xi", "policies"}, "eval");
    read(*it, "trials", c.eval.trials, "eval");
    read(*it, "seeds", c.eval.seeds, "eval");
    read(*it, "xi", c.eval.xi, "eval");
    read(*it, "policies", c.eval.policies, "eval");
  }
  if (auto it = doc.find("generate"); it != doc.end()) {
    reject_unknown(*it, {"count", "prefix", "sites", "vehicles", "tasks", "breakdown_rate", "scale", "load"},
                   "generate");
    read(*it, "count", c.generate.count, "generate");
    read(*it, "prefix", c.generate.prefix, "generate");
    read(*it, "sites", c.generate.params.sites, "generate");
    read(*it, "vehicles", c.generate.params.vehicles, "generate");
    read(*it, "tasks", c.generate.params.tasks, "generate");
    read(*it, "breakdown_rate", c.generate.params.breakdown_rate, "generate");
    read(*it, "scale", c.generate.params.scale, "generate");
    read(*it, "load", c.generate.params.load, "generate");
  }
  if (auto it = doc.find("noise"); it != doc.end()) {
    reject_unknown(*it, {"delta"}, "noise");
    read(*it, "delta", c.noise_delta, "noise");
  }
  c.es.seed = c.seed;
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file '" + path.string() + "'");
  try {
    return run_config_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ValidationError("'" + path.string() + "': " + e.what());
  }
}

std::string config_hash(const RunConfig& c) {
  const std::string text = content_json(c).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace dmh
