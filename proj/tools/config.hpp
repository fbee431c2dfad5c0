#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "flood/evaluation.hpp"
#include "flood/library.hpp"
#include "flood/risk.hpp"
#include "flood/solver.hpp"
#include "flood/terrain.hpp"

namespace flood::cli {

namespace fs = std::filesystem;

struct FlattenSpec {
  double inlet_elevation = 0.0;
  double outlet_elevation = 0.0;
  FlowAxis axis = FlowAxis::row;
};

struct SnapshotSpec {
  double level = 0.0;
  fs::path wet;
  std::optional<fs::path> valid;
};

/// Everything one pipeline run needs. Relative paths in the config file are
/// resolved against the directory that holds it.
struct PipelineConfig {
  fs::path base;

  // terrain
  fs::path dem;
  fs::path riverbed;
  std::optional<fs::path> manning_grid;
  double manning = 0.05;
  std::optional<FlattenSpec> flatten;
  double gauge_x = 0.0;
  double gauge_y = 0.0;

  // boundary
  fs::path inlet_mask;
  fs::path outlet_mask;

  SolverParams solver;
  int tiles = 1;
  SteadyCriteria steady;

  fs::path library_dir;
  std::vector<double> levels;
  double mass_tolerance = 1e-6;

  std::vector<SnapshotSpec> snapshots;
  fs::path thresholds_dir;

  std::optional<double> level;
  double sigma = 0.25;
  int n_samples = 100;
  std::uint64_t seed = 0;
  RiskThresholds risk;
  double wet_depth = 0.05;
  fs::path forecast_dir;

  std::vector<fs::path> truth;
  std::optional<fs::path> truth_valid;
  Weighting weighting = Weighting::per_event;
  fs::path evaluation_dir;

  int render_scale = 4;
};

/// Reads and validates a JSON config. Missing files are IoErrors; schema
/// problems are ValidationErrors naming the offending key.
PipelineConfig load_config(const fs::path& path);

/// Positive integer from FLOOD_WORKERS, if set.
std::optional<int> workers_from_env();

}  // namespace flood::cli
