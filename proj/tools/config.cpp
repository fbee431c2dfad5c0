#include "config.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <json.hpp>
#include <set>

#include "flood/error.hpp"

namespace flood::cli {

namespace {

using nlohmann::json;

// Every object in the config is checked against its key set so that a typo
// fails loudly instead of silently falling back to a default.
void allow_keys(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) throw ValidationError("config: " + where + " must be an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) throw ValidationError("config: unknown key " + where + "." + key);
  }
}

double number(const json& obj, const std::string& where, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) throw ValidationError("config: " + where + "." + key + " must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ValidationError("config: " + where + "." + key + " must be finite");
  return d;
}

double required_number(const json& obj, const std::string& where, const char* key) {
  if (!obj.contains(key)) throw ValidationError("config: missing " + where + "." + key);
  return number(obj, where, key, 0.0);
}

long integer(const json& obj, const std::string& where, const char* key, long fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer()) throw ValidationError("config: " + where + "." + key + " must be an integer");
  return v.get<long>();
}

fs::path path_of(const json& v, const fs::path& base, const std::string& where) {
  if (!v.is_string() || v.get<std::string>().empty()) {
    throw ValidationError("config: " + where + " must be a nonempty path string");
  }
  const fs::path p = v.get<std::string>();
  return p.is_absolute() ? p : base / p;
}

fs::path path(const json& obj, const std::string& where, const char* key, const fs::path& base,
              const fs::path& fallback = {}) {
  if (!obj.contains(key)) {
    if (fallback.empty()) throw ValidationError("config: missing " + where + "." + key);
    return base / fallback;
  }
  return path_of(obj.at(key), base, where + "." + key);
}

const json& section(const json& root, const char* key) {
  static const json empty = json::object();
  return root.contains(key) ? root.at(key) : empty;
}

std::vector<double> parse_levels(const json& v) {
  std::vector<double> out;
  if (v.is_array()) {
    for (const auto& x : v) {
      if (!x.is_number()) throw ValidationError("config: library.levels entries must be numbers");
      out.push_back(x.get<double>());
    }
  } else if (v.is_object()) {
    allow_keys(v, "library.levels", {"from", "to", "step"});
    const double from = required_number(v, "library.levels", "from");
    const double to = required_number(v, "library.levels", "to");
    const double step = required_number(v, "library.levels", "step");
    if (!(step > 0.0) || to < from) {
      throw ValidationError("config: library.levels needs step > 0 and to >= from");
    }
    const long n = static_cast<long>(std::floor((to - from) / step + 1e-9)) + 1;
    if (n > 100000) throw ValidationError("config: library.levels range produces too many levels");
    for (long i = 0; i < n; ++i) out.push_back(from + static_cast<double>(i) * step);
  } else {
    throw ValidationError("config: library.levels must be a list or a {from, to, step} range");
  }
  if (out.empty()) throw ValidationError("config: library.levels is empty");
  return out;
}

void parse(PipelineConfig& c, const json& root) {
  allow_keys(root, "config",
             {"terrain", "boundary", "solver", "steady", "library", "observations", "thresholds", "forecast",
              "evaluate", "render"});
  const fs::path& base = c.base;

  const json& t = section(root, "terrain");
  allow_keys(t, "terrain", {"dem", "riverbed", "manning", "flatten", "gauge"});
  c.dem = path(t, "terrain", "dem", base);
  c.riverbed = path(t, "terrain", "riverbed", base);
  if (t.contains("manning") && t.at("manning").is_string()) {
    c.manning_grid = path_of(t.at("manning"), base, "terrain.manning");
  } else {
    c.manning = number(t, "terrain", "manning", c.manning);
    if (!(c.manning > 0.0)) throw ValidationError("config: terrain.manning must be positive");
  }
  if (t.contains("flatten")) {
    const json& f = t.at("flatten");
    allow_keys(f, "terrain.flatten", {"inlet_elevation", "outlet_elevation", "flow_axis"});
    FlattenSpec spec;
    spec.inlet_elevation = required_number(f, "terrain.flatten", "inlet_elevation");
    spec.outlet_elevation = required_number(f, "terrain.flatten", "outlet_elevation");
    const std::string axis = f.value("flow_axis", std::string("row"));
    if (axis == "row") {
      spec.axis = FlowAxis::row;
    } else if (axis == "col") {
      spec.axis = FlowAxis::col;
    } else {
      throw ValidationError("config: terrain.flatten.flow_axis must be \"row\" or \"col\"");
    }
    c.flatten = spec;
  }
  if (!t.contains("gauge")) throw ValidationError("config: missing terrain.gauge");
  allow_keys(t.at("gauge"), "terrain.gauge", {"x", "y"});
  c.gauge_x = required_number(t.at("gauge"), "terrain.gauge", "x");
  c.gauge_y = required_number(t.at("gauge"), "terrain.gauge", "y");

  const json& b = section(root, "boundary");
  allow_keys(b, "boundary", {"inlet", "outlet"});
  c.inlet_mask = path(b, "boundary", "inlet", base);
  c.outlet_mask = path(b, "boundary", "outlet", base);

  const json& s = section(root, "solver");
  allow_keys(s, "solver", {"g", "cfl_alpha", "h_dry", "max_dt", "tiles"});
  c.solver.g = number(s, "solver", "g", c.solver.g);
  c.solver.cfl_alpha = number(s, "solver", "cfl_alpha", c.solver.cfl_alpha);
  c.solver.h_dry = number(s, "solver", "h_dry", c.solver.h_dry);
  c.solver.max_dt = number(s, "solver", "max_dt", c.solver.max_dt);
  c.tiles = static_cast<int>(integer(s, "solver", "tiles", c.tiles));
  c.solver.validate();
  if (c.tiles < 1) throw ValidationError("config: solver.tiles must be at least 1");

  const json& st = section(root, "steady");
  allow_keys(st, "steady", {"epsilon", "window", "max_steps"});
  c.steady.epsilon = number(st, "steady", "epsilon", c.steady.epsilon);
  c.steady.window = static_cast<int>(integer(st, "steady", "window", c.steady.window));
  c.steady.max_steps = integer(st, "steady", "max_steps", c.steady.max_steps);
  c.steady.validate();

  const json& l = section(root, "library");
  allow_keys(l, "library", {"dir", "levels", "mass_tolerance"});
  c.library_dir = path(l, "library", "dir", base, "library");
  if (l.contains("levels")) c.levels = parse_levels(l.at("levels"));
  c.mass_tolerance = number(l, "library", "mass_tolerance", c.mass_tolerance);

  if (root.contains("observations")) {
    const json& obs = root.at("observations");
    if (!obs.is_array()) throw ValidationError("config: observations must be a list");
    for (std::size_t i = 0; i < obs.size(); ++i) {
      const std::string where = "observations[" + std::to_string(i) + "]";
      allow_keys(obs[i], where, {"level", "wet", "valid"});
      SnapshotSpec snap;
      snap.level = required_number(obs[i], where, "level");
      snap.wet = path(obs[i], where, "wet", base);
      if (obs[i].contains("valid")) snap.valid = path_of(obs[i].at("valid"), base, where + ".valid");
      c.snapshots.push_back(std::move(snap));
    }
  }
  const json& th = section(root, "thresholds");
  allow_keys(th, "thresholds", {"dir"});
  c.thresholds_dir = path(th, "thresholds", "dir", base, "thresholds");

  const json& f = section(root, "forecast");
  allow_keys(f, "forecast",
             {"level", "sigma", "n_samples", "seed", "p_some", "p_higher", "p_highest", "wet_depth", "out"});
  if (f.contains("level")) c.level = required_number(f, "forecast", "level");
  c.sigma = number(f, "forecast", "sigma", c.sigma);
  c.n_samples = static_cast<int>(integer(f, "forecast", "n_samples", c.n_samples));
  if (f.contains("seed")) {
    if (!f.at("seed").is_number_unsigned()) throw ValidationError("config: forecast.seed must be a non-negative integer");
    c.seed = f.at("seed").get<std::uint64_t>();
  }
  c.risk.p_some = number(f, "forecast", "p_some", c.risk.p_some);
  c.risk.p_higher = number(f, "forecast", "p_higher", c.risk.p_higher);
  c.risk.p_highest = number(f, "forecast", "p_highest", c.risk.p_highest);
  c.risk.validate();
  c.wet_depth = number(f, "forecast", "wet_depth", c.wet_depth);
  if (!(c.wet_depth > 0.0)) throw ValidationError("config: forecast.wet_depth must be positive");
  c.forecast_dir = path(f, "forecast", "out", base, "forecast");

  const json& e = section(root, "evaluate");
  allow_keys(e, "evaluate", {"truth", "valid", "weighting", "out"});
  if (e.contains("truth")) {
    const json& tr = e.at("truth");
    if (tr.is_array()) {
      for (std::size_t i = 0; i < tr.size(); ++i) {
        c.truth.push_back(path_of(tr[i], base, "evaluate.truth[" + std::to_string(i) + "]"));
      }
    } else {
      c.truth.push_back(path_of(tr, base, "evaluate.truth"));
    }
  }
  if (e.contains("valid")) c.truth_valid = path_of(e.at("valid"), base, "evaluate.valid");
  const std::string weighting = e.value("weighting", std::string("per_event"));
  if (weighting == "per_event") {
    c.weighting = Weighting::per_event;
  } else if (weighting == "per_pixel") {
    c.weighting = Weighting::per_pixel;
  } else {
    throw ValidationError("config: evaluate.weighting must be \"per_event\" or \"per_pixel\"");
  }
  c.evaluation_dir = path(e, "evaluate", "out", base, "evaluation");

  const json& r = section(root, "render");
  allow_keys(r, "render", {"scale"});
  c.render_scale = static_cast<int>(integer(r, "render", "scale", c.render_scale));
  if (c.render_scale < 1 || c.render_scale > 64) throw ValidationError("config: render.scale must lie in [1, 64]");
}

}  // namespace

PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json root;
  try {
    root = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  PipelineConfig c;
  c.base = fs::absolute(path).parent_path();
  try {
    parse(c, root);
  } catch (const json::exception& e) {
    throw ValidationError("config " + path.string() + ": " + e.what());
  }
  return c;
}

std::optional<int> workers_from_env() {
  const char* v = std::getenv("FLOOD_WORKERS");
  if (!v || !*v) return std::nullopt;
  int n = 0;
  const char* end = v + std::char_traits<char>::length(v);
  auto [ptr, ec] = std::from_chars(v, end, n);
  if (ec != std::errc() || ptr != end || n < 1) {
    throw ValidationError("FLOOD_WORKERS must be a positive integer, got \"" + std::string(v) + "\"");
  }
  return n;
}

}  // namespace flood::cli
