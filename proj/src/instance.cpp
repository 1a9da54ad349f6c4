#include "dmh/instance.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "dmh/error.hpp"

namespace dmh {

namespace {

using nlohmann::json;

SiteKind parse_kind(const std::string& s) {
  if (s == "pickup") return SiteKind::kPickup;
  if (s == "delivery") return SiteKind::kDelivery;
  if (s == "both") return SiteKind::kBoth;
  if (s == "depot") return SiteKind::kDepot;
  throw ValidationError("field 'sites[].kind': unknown site kind '" + s + "'");
}

const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) throw ValidationError("field '" + where + "': expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ValidationError("missing field '" + where + "." + key + "'");
  return *it;
}

double as_number(const json& v, const std::string& where) {
  if (!v.is_number()) throw ValidationError("field '" + where + "': expected a number");
  return v.get<double>();
}

std::int64_t as_int(const json& v, const std::string& where) {
  if (!v.is_number_integer()) throw ValidationError("field '" + where + "': expected an integer");
  return v.get<std::int64_t>();
}

std::string as_string(const json& v, const std::string& where) {
  if (!v.is_string()) throw ValidationError("field '" + where + "': expected a string");
  return v.get<std::string>();
}

const json& as_array(const json& v, const std::string& where) {
  if (!v.is_array()) throw ValidationError("field '" + where + "': expected an array");
  return v;
}

}  // namespace

std::string to_string(SiteKind kind) {
  switch (kind) {
    case SiteKind::kPickup: return "pickup";
    case SiteKind::kDelivery: return "delivery";
    case SiteKind::kBoth: return "both";
    case SiteKind::kDepot: return "depot";
  }
  return "both";
}

std::size_t Instance::vehicle_index(VehicleId vid) const {
  for (std::size_t i = 0; i < vehicles.size(); ++i)
    if (vehicles[i].id == vid) return i;
  throw ValidationError("unknown vehicle id " + std::to_string(vid));
}

std::size_t Instance::site_index(const std::string& site_id) const {
  for (std::size_t i = 0; i < sites.size(); ++i)
    if (sites[i].id == site_id) return i;
  throw ValidationError("unknown site id '" + site_id + "'");
}

std::size_t Instance::task_index(TaskId tid) const {
  for (std::size_t i = 0; i < tasks.size(); ++i)
    if (tasks[i].id == tid) return i;
  throw ValidationError("unknown task id " + std::to_string(tid));
}

void validate(const Instance& inst) {
  const std::size_t n = inst.sites.size();
  if (n == 0) throw ValidationError("instance has no sites");
  {
    std::set<std::string> ids;
    for (const auto& s : inst.sites)
      if (!ids.insert(s.id).second) throw ValidationError("duplicate site id '" + s.id + "'");
  }
  if (inst.travel.size() != n) throw ValidationError("travel matrix is not square with dimension |sites|");
  for (std::size_t i = 0; i < n; ++i) {
    if (inst.travel[i].size() != n)
      throw ValidationError("travel matrix is not square with dimension |sites|");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (inst.travel[i][i] != 0.0) throw ValidationError("travel diagonal not zero");
    for (std::size_t j = 0; j < n; ++j) {
      const Time t = inst.travel[i][j];
      if (!std::isfinite(t) || t < 0.0) throw ValidationError("travel entries must be finite and >= 0");
      if (t != inst.travel[j][i]) throw ValidationError("travel not symmetric");
    }
  }
  if (inst.vehicles.empty()) throw ValidationError("instance needs at least one vehicle");
  {
    std::set<VehicleId> ids;
    for (const auto& v : inst.vehicles) {
      if (!ids.insert(v.id).second) throw ValidationError("duplicate vehicle id " + std::to_string(v.id));
      if (v.start_site >= n) throw ValidationError("vehicle start_site out of range");
    }
  }
  {
    std::set<TaskId> ids;
    Time prev = 0.0;
    for (std::size_t k = 0; k < inst.tasks.size(); ++k) {
      const auto& t = inst.tasks[k];
      if (!ids.insert(t.id).second) throw ValidationError("duplicate task id " + std::to_string(t.id));
      if (t.pickup >= n || t.delivery >= n) throw ValidationError("task site out of range");
      if (t.pickup == t.delivery) throw ValidationError("task pickup equals delivery");
      if (!std::isfinite(t.arrival) || t.arrival < 0.0) throw ValidationError("task arrival must be >= 0");
      if (!std::isfinite(t.expiry) || t.expiry <= 0.0) throw ValidationError("task expiry must be > 0");
      if (k > 0 && t.arrival < prev) throw ValidationError("tasks not sorted by arrival");
      prev = t.arrival;
    }
  }
  for (const auto& b : inst.breakdowns) {
    inst.vehicle_index(b.vehicle);
    if (!std::isfinite(b.at) || b.at < 0.0) throw ValidationError("breakdown time must be >= 0");
    if (!std::isfinite(b.repair) || b.repair < 0.0) throw ValidationError("breakdown repair must be >= 0");
  }
}

nlohmann::json to_json(const Instance& inst) {
  json sites = json::array();
  for (const auto& s : inst.sites) sites.push_back({{"id", s.id}, {"kind", to_string(s.kind)}});
  json vehicles = json::array();
  for (const auto& v : inst.vehicles)
    vehicles.push_back({{"id", v.id}, {"start_site", inst.sites[v.start_site].id}});
  json tasks = json::array();
  for (const auto& t : inst.tasks) {
    tasks.push_back({{"id", t.id},
                     {"pickup", inst.sites[t.pickup].id},
                     {"delivery", inst.sites[t.delivery].id},
                     {"arrival", t.arrival},
                     {"expiry", t.expiry}});
  }
  json breakdowns = json::array();
  for (const auto& b : inst.breakdowns)
    breakdowns.push_back({{"vehicle", b.vehicle}, {"at", b.at}, {"repair", b.repair}});
  return json{{"id", inst.id},       {"sites", sites}, {"travel", inst.travel},
              {"vehicles", vehicles}, {"tasks", tasks}, {"breakdowns", breakdowns}};
}

Instance instance_from_json(const json& doc) {
  Instance inst;
  inst.id = as_string(require(doc, "id", "instance"), "id");

  const auto& sites = as_array(require(doc, "sites", "instance"), "sites");
  for (std::size_t i = 0; i < sites.size(); ++i) {
    const std::string where = "sites[" + std::to_string(i) + "]";
    Site s;
    s.id = as_string(require(sites[i], "id", where), where + ".id");
    s.kind = parse_kind(as_string(require(sites[i], "kind", where), where + ".kind"));
    inst.sites.push_back(std::move(s));
  }

  const auto& travel = as_array(require(doc, "travel", "instance"), "travel");
  for (std::size_t i = 0; i < travel.size(); ++i) {
    const std::string where = "travel[" + std::to_string(i) + "]";
    const auto& row = as_array(travel[i], where);
    std::vector<Time> r;
    r.reserve(row.size());
    for (std::size_t j = 0; j < row.size(); ++j)
      r.push_back(as_number(row[j], where + "[" + std::to_string(j) + "]"));
    inst.travel.push_back(std::move(r));
  }

  const auto& vehicles = as_array(require(doc, "vehicles", "instance"), "vehicles");
  for (std::size_t i = 0; i < vehicles.size(); ++i) {
    const std::string where = "vehicles[" + std::to_string(i) + "]";
    VehicleSpec v;
    v.id = as_int(require(vehicles[i], "id", where), where + ".id");
    v.start_site = inst.site_index(as_string(require(vehicles[i], "start_site", where), where + ".start_site"));
    inst.vehicles.push_back(v);
  }

  const auto& tasks = as_array(require(doc, "tasks", "instance"), "tasks");
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const std::string where = "tasks[" + std::to_string(i) + "]";
    TaskSpec t;
    t.id = as_int(require(tasks[i], "id", where), where + ".id");
    t.pickup = inst.site_index(as_string(require(tasks[i], "pickup", where), where + ".pickup"));
    t.delivery = inst.site_index(as_string(require(tasks[i], "delivery", where), where + ".delivery"));
    t.arrival = as_number(require(tasks[i], "arrival", where), where + ".arrival");
    t.expiry = as_number(require(tasks[i], "expiry", where), where + ".expiry");
    inst.tasks.push_back(t);
  }

  const auto& bds = as_array(require(doc, "breakdowns", "instance"), "breakdowns");
  for (std::size_t i = 0; i < bds.size(); ++i) {
    const std::string where = "breakdowns[" + std::to_string(i) + "]";
    BreakdownSpec b;
    b.vehicle = as_int(require(bds[i], "vehicle", where), where + ".vehicle");
    b.at = as_number(require(bds[i], "at", where), where + ".at");
    b.repair = as_number(require(bds[i], "repair", where), where + ".repair");
    inst.breakdowns.push_back(b);
  }

  validate(inst);
  return inst;
}

Instance load_instance(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read instance file '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("'" + path.string() + "': " + e.what());
  }
  try {
    return instance_from_json(doc);
  } catch (const ValidationError& e) {
    throw ValidationError("'" + path.string() + "': " + e.what());
  }
}

void save_instance(const Instance& instance, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write instance file '" + path.string() + "'");
  out << to_json(instance).dump(2) << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::vector<Instance> load_instance_dir(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError("instance directory not found: '" + dir.string() + "'");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto& p = entry.path();
    if (p.extension() == ".json" && p.filename() != "manifest.json") files.push_back(p);
  }
  std::sort(files.begin(), files.end());
  std::vector<Instance> out;
  out.reserve(files.size());
  for (const auto& f : files) out.push_back(load_instance(f));
  return out;
}

}  // namespace dmh
