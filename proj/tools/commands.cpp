#include "commands.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <random>
#include <string>

#include "flood/error.hpp"
#include "flood/evaluation.hpp"
#include "flood/library.hpp"
#include "flood/risk.hpp"
#include "flood/synthetic.hpp"
#include "flood/threshold_model.hpp"
#include "render.hpp"

namespace flood::cli {

using nlohmann::json;

namespace {

void write_json(const json& j, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

void write_text(const std::string& s, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << s;
  if (!out) throw IoError("failed writing " + path.string());
}

int worker_count(const PipelineConfig& c) { return workers_from_env().value_or(c.tiles); }

MaskGrid read_mask_matching(const fs::path& path, const GeoTransform& geo, const std::string& what) {
  MaskGrid m = read_ascii_mask(path);
  if (!(m.geo() == geo)) throw ValidationError(what + " " + path.string() + " does not match the DEM geometry");
  return m;
}

std::vector<CellIndex> cells_of(const MaskGrid& m) {
  std::vector<CellIndex> out;
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) {
      if (m.at(r, c)) out.push_back({r, c});
    }
  }
  return out;
}

}  // namespace

StagedDir::StagedDir(const fs::path& target) {
  target_ = fs::absolute(target).lexically_normal();
  if (target_.filename().empty()) target_ = target_.parent_path();
  staging_ = target_.parent_path() / ("." + target_.filename().string() + ".partial");
  std::error_code ec;
  fs::create_directories(target_.parent_path(), ec);
  if (ec) throw IoError("cannot create " + target_.parent_path().string() + ": " + ec.message());
  fs::remove_all(staging_, ec);
  fs::create_directories(staging_, ec);
  if (ec) throw IoError("cannot create staging directory " + staging_.string() + ": " + ec.message());
}

StagedDir::~StagedDir() {
  if (committed_) return;
  std::error_code ec;
  fs::remove_all(staging_, ec);
}

void StagedDir::commit() {
  std::error_code ec;
  fs::remove_all(target_, ec);
  if (ec) throw IoError("cannot replace " + target_.string() + ": " + ec.message());
  fs::rename(staging_, target_, ec);
  if (ec) throw IoError("cannot move output into " + target_.string() + ": " + ec.message());
  committed_ = true;
}

TerrainModel load_terrain(const PipelineConfig& c) {
  Grid dem = read_ascii_grid(c.dem);
  const GeoTransform& geo = dem.geo();
  MaskGrid river = read_mask_matching(c.riverbed, geo, "riverbed mask");
  if (c.flatten) {
    dem = flatten_riverbed(dem, river, c.flatten->inlet_elevation, c.flatten->outlet_elevation, c.flatten->axis);
  }
  Grid manning = uniform_manning(geo, c.manning);
  if (c.manning_grid) {
    manning = read_ascii_grid(*c.manning_grid);
    if (!(manning.geo() == geo)) {
      throw ValidationError("Manning grid " + c.manning_grid->string() + " does not match the DEM geometry");
    }
  }
  const CellIndex gauge = locate_gauge(geo, c.gauge_x, c.gauge_y, river);
  TerrainModel t{std::move(dem), std::move(river), std::move(manning), gauge};
  t.validate();
  return t;
}

BoundaryCondition load_boundary(const PipelineConfig& c, const GeoTransform& geo) {
  BoundaryCondition bc;
  bc.inlet_cells = cells_of(read_mask_matching(c.inlet_mask, geo, "inlet mask"));
  bc.outlet_cells = cells_of(read_mask_matching(c.outlet_mask, geo, "outlet mask"));
  if (bc.inlet_cells.empty()) throw ValidationError("inlet mask " + c.inlet_mask.string() + " selects no cells");
  return bc;
}

void run_flatten(const PipelineConfig& c, const Overrides& o) {
  if (!c.flatten) throw ValidationError("flatten needs terrain.flatten in the config");
  const TerrainModel t = load_terrain(c);
  StagedDir out(o.out.value_or(c.base / "flattened"));
  write_ascii_grid(t.elevation, out.path() / "dem_flat.asc");
  out.commit();
  std::cout << "flattened DEM written to " << (out.target() / "dem_flat.asc").string() << '\n';
}

void run_build(const PipelineConfig& c, const Overrides& o) {
  if (c.levels.empty()) throw ValidationError("build needs library.levels in the config");
  const TerrainModel t = load_terrain(c);
  const BoundaryCondition bc = load_boundary(c, t.geo());
  LibraryBuildOptions opts;
  opts.tiles = worker_count(c);
  opts.mass_tolerance = c.mass_tolerance;
  opts.wet_depth = c.wet_depth;
  std::vector<std::string> warnings;
  const SteadyLibrary lib = build_library(t, c.solver, bc, c.levels, c.steady, opts, &warnings);

  json report;
  report["terrain_fingerprint"] = fingerprint_hex(lib.terrain_fingerprint);
  report["gauge_cell"] = {t.gauge_cell.row, t.gauge_cell.col};
  report["levels_requested"] = c.levels.size();
  report["entries"] = json::array();
  for (const auto& e : lib.entries) {
    report["entries"].push_back({{"inflow_level", e.inflow_level},
                                 {"gauge_level", e.gauge_level},
                                 {"steps", e.steps},
                                 {"mass_error", e.mass_error},
                                 {"wet_cells", wet_cell_count(e.depth, c.wet_depth)}});
  }
  report["warnings"] = warnings;

  StagedDir out(o.out.value_or(c.library_dir));
  save_library(lib, out.path());
  write_json(report, out.path() / "build_report.json");
  out.commit();

  std::printf("%-14s %-14s %-10s %-12s %s\n", "inflow_level", "gauge_level", "steps", "mass_error", "wet_cells");
  for (const auto& e : lib.entries) {
    std::printf("%-14.4f %-14.4f %-10ld %-12.3e %zu\n", e.inflow_level, e.gauge_level, e.steps, e.mass_error,
                wet_cell_count(e.depth, c.wet_depth));
  }
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
  std::cout << lib.entries.size() << " entries written to " << out.target().string() << '\n';
}

void run_train(const PipelineConfig& c, const Overrides& o) {
  if (c.snapshots.empty()) throw ValidationError("train needs at least one entry in observations");
  ObservationStack stack;
  for (const auto& s : c.snapshots) {
    MaskGrid wet = read_ascii_mask(s.wet);
    if (stack.snapshots.empty()) stack.geo = wet.geo();
    MaskGrid valid = s.valid ? read_ascii_mask(*s.valid) : MaskGrid(wet.geo(), true);
    stack.snapshots.push_back({s.level, std::move(wet), std::move(valid)});
  }
  const ThresholdField field = fit_thresholds(stack);

  StagedDir out(o.out.value_or(c.thresholds_dir));
  save_threshold_field(field, out.path());
  out.commit();
  std::cout << "thresholds fitted from " << stack.snapshots.size() << " snapshots; " << field.coverage.count() << " of "
            << field.geo.size() << " pixels observed; written to " << out.target().string() << '\n';
}

void run_forecast(const PipelineConfig& c, const Overrides& o) {
  ForecastInput fc;
  if (o.level) {
    fc.level = *o.level;
  } else if (c.level) {
    fc.level = *c.level;
  } else {
    throw ValidationError("forecast needs --level or forecast.level in the config");
  }
  fc.sigma = c.sigma;
  fc.n_samples = c.n_samples;
  fc.seed = o.seed.value_or(c.seed);
  fc.validate();

  const TerrainModel t = load_terrain(c);
  const SteadyLibrary lib = load_library(c.library_dir, t.fingerprint());
  const ThresholdField field = load_threshold_field(c.thresholds_dir);
  if (!(field.geo == t.geo())) throw ValidationError("threshold field does not match the DEM geometry");
  if (!(lib.entries.front().depth.geo() == t.geo())) throw ValidationError("library does not match the DEM geometry");

  const std::vector<double> samples = sample_levels(fc);
  const RiskMap sim = discretize(probability_map(lib, samples, c.wet_depth), c.risk);
  const RiskMap risk = fuse(sim, predict(field, fc.level));

  std::map<std::size_t, long> picks;
  for (double s : samples) ++picks[static_cast<std::size_t>(&query(lib, s) - lib.entries.data())];

  json meta;
  meta["level"] = fc.level;
  meta["sigma"] = fc.sigma;
  meta["n_samples"] = fc.n_samples;
  meta["seed"] = fc.seed;
  meta["p_some"] = c.risk.p_some;
  meta["p_higher"] = c.risk.p_higher;
  meta["p_highest"] = c.risk.p_highest;
  meta["wet_depth"] = c.wet_depth;
  meta["terrain_fingerprint"] = fingerprint_hex(lib.terrain_fingerprint);
  meta["entries_sampled"] = json::array();
  for (const auto& [k, n] : picks) {
    meta["entries_sampled"].push_back({{"gauge_level", lib.entries[k].gauge_level}, {"samples", n}});
  }
  meta["cells"] = {{"some", risk.some.count()}, {"higher", risk.higher.count()}, {"highest", risk.highest.count()}};

  StagedDir out(o.out.value_or(c.forecast_dir));
  save_risk_map(risk, out.path());
  write_ppm(render_risk(t.elevation, risk, nullptr, c.render_scale), out.path() / "risk.ppm");
  write_json(meta, out.path() / "forecast.json");
  out.commit();
  std::cout << "forecast at level " << format_double(fc.level) << ": some " << risk.some.count() << ", higher "
            << risk.higher.count() << ", highest " << risk.highest.count() << " cells; written to "
            << out.target().string() << '\n';
}

void run_evaluate(const PipelineConfig& c, const Overrides& o) {
  const std::vector<fs::path> truths = o.truths.empty() ? c.truth : o.truths;
  const std::vector<fs::path> forecasts = o.forecasts.empty() ? std::vector<fs::path>{c.forecast_dir} : o.forecasts;
  if (truths.empty()) throw ValidationError("evaluate needs --truth or evaluate.truth in the config");
  if (forecasts.size() != 1 && forecasts.size() != truths.size()) {
    throw ValidationError("evaluate needs one forecast, or one forecast per truth raster");
  }

  std::vector<EvalReport> reports;
  std::string csv = csv_header();
  std::optional<RiskMap> shared;
  if (forecasts.size() == 1) shared = load_risk_map(forecasts.front());
  for (std::size_t k = 0; k < truths.size(); ++k) {
    const RiskMap risk = shared ? *shared : load_risk_map(forecasts[k]);
    const MaskGrid truth = read_mask_matching(truths[k], risk.some.geo(), "truth raster");
    const MaskGrid valid = c.truth_valid ? read_mask_matching(*c.truth_valid, risk.some.geo(), "valid mask")
                                         : MaskGrid(risk.some.geo(), true);
    reports.push_back(evaluate(risk, truth, valid));
    csv += to_csv_row(truths[k].stem().string(), reports.back());
  }
  const EvalReport total = aggregate(reports, c.weighting);
  csv += to_csv_row("aggregate", total);

  StagedDir out(o.out.value_or(c.evaluation_dir));
  write_text(to_text(total), out.path() / "report.txt");
  write_text(csv, out.path() / "events.csv");
  out.commit();
  std::cout << to_text(total);
}

void run_render(const PipelineConfig& c, const Overrides& o) {
  const fs::path forecast = o.forecasts.empty() ? c.forecast_dir : o.forecasts.front();
  const TerrainModel t = load_terrain(c);
  const RiskMap risk = load_risk_map(forecast);
  std::optional<MaskGrid> truth;
  if (!o.truths.empty()) truth = read_mask_matching(o.truths.front(), t.geo(), "truth raster");

  StagedDir out(o.out.value_or(c.base / "render"));
  write_ppm(render_risk(t.elevation, risk, truth ? &*truth : nullptr, c.render_scale), out.path() / "risk.ppm");
  out.commit();
  std::cout << "rendered " << (out.target() / "risk.ppm").string() << '\n';
}

void write_demo_dataset(const fs::path& dir, int rows, int cols, std::uint64_t seed) {
  ValleySpec vs;
  vs.rows = rows;
  vs.cols = cols;
  const Scenario s = synthetic_valley(vs);
  const GeoTransform& geo = s.terrain.geo();
  const double drop = vs.bed_slope * vs.cell_size;
  const double outlet_bed = vs.base_elevation - drop * (rows - 1);
  std::mt19937_64 gen(seed);
  auto uniform = [&gen] { return static_cast<double>(gen() >> 11) * 0x1.0p-53; };

  // Roughen the riverbed so that flattening has something to do.
  Grid dem = s.terrain.elevation;
  for (std::size_t i = 0; i < dem.size(); ++i) {
    if (s.terrain.riverbed[i]) dem[i] += 0.5 * uniform();
  }

  MaskGrid inlet(geo), outlet(geo);
  for (const auto& c : s.boundary.inlet_cells) inlet.set(c.row, c.col, true);
  for (const auto& c : s.boundary.outlet_cells) outlet.set(c.row, c.col, true);

  // Historical extents: a water surface parallel to the bed, anchored at the
  // gauge level.
  const CellIndex g = s.terrain.gauge_cell;
  const double gauge_bed = s.terrain.elevation.at(g.row, g.col);
  auto extent = [&](double level) {
    MaskGrid wet(geo);
    for (int r = 0; r < rows; ++r) {
      const double surface = level - drop * (r - g.row);
      for (int c = 0; c < cols; ++c) wet.set(r, c, s.terrain.elevation.at(r, c) < surface);
    }
    return wet;
  };

  StagedDir out(dir);
  const fs::path root = out.path();
  fs::create_directories(root / "observations");
  fs::create_directories(root / "truth");
  write_ascii_grid(dem, root / "dem.asc");
  write_ascii_mask(s.terrain.riverbed, root / "riverbed.asc");
  write_ascii_mask(inlet, root / "inlet.asc");
  write_ascii_mask(outlet, root / "outlet.asc");

  json obs = json::array();
  for (int k = 0; k < 12; ++k) {
    const double level = gauge_bed + 0.5 + 4.0 * uniform();
    MaskGrid valid(geo);
    for (std::size_t i = 0; i < geo.size(); ++i) valid.set(i, uniform() >= 0.08);
    char name[32];
    std::snprintf(name, sizeof name, "%02d", k);
    write_ascii_mask(extent(level), root / "observations" / ("wet_" + std::string(name) + ".asc"));
    write_ascii_mask(valid, root / "observations" / ("valid_" + std::string(name) + ".asc"));
    obs.push_back({{"level", level},
                   {"wet", "observations/wet_" + std::string(name) + ".asc"},
                   {"valid", "observations/valid_" + std::string(name) + ".asc"}});
  }
  json truths = json::array();
  for (int k = 0; k < 3; ++k) {
    const double level = gauge_bed + 1.55 + 1.0 * k;
    const std::string name = "truth/event_" + std::to_string(k) + ".asc";
    write_ascii_mask(extent(level), root / name);
    truths.push_back(name);
  }

  json cfg;
  cfg["terrain"] = {{"dem", "dem.asc"},
                    {"riverbed", "riverbed.asc"},
                    {"manning", vs.manning},
                    {"flatten", {{"inlet_elevation", vs.base_elevation},
                                 {"outlet_elevation", outlet_bed},
                                 {"flow_axis", "row"}}},
                    {"gauge", {{"x", s.gauge_x}, {"y", s.gauge_y}}}};
  cfg["boundary"] = {{"inlet", "inlet.asc"}, {"outlet", "outlet.asc"}};
  cfg["solver"] = {{"tiles", 1}};
  // Starting below the inlet bed gives a dry bottom entry for forecasts under the river.
  cfg["library"] = {{"dir", "library"},
                    {"levels", {{"from", vs.base_elevation - 0.5}, {"to", vs.base_elevation + 4.5}, {"step", 0.5}}}};
  cfg["observations"] = obs;
  cfg["thresholds"] = {{"dir", "thresholds"}};
  cfg["forecast"] = {{"level", gauge_bed + 2.5}, {"sigma", 0.25}, {"n_samples", 100}, {"seed", 42},
                     {"out", "forecast"}};
  cfg["evaluate"] = {{"truth", truths}, {"out", "evaluation"}};
  write_json(cfg, root / "config.json");
  out.commit();
  std::cout << "demo dataset written to " << out.target().string() << '\n';
}

}  // namespace flood::cli
