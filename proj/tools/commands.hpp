#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "config.hpp"
#include "flood/solver.hpp"
#include "flood/terrain.hpp"

namespace flood::cli {

/// Command-line values that take precedence over the config file.
struct Overrides {
  std::optional<double> level;
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> out;
  std::vector<fs::path> forecasts;
  std::vector<fs::path> truths;
};

/// Output directory that is filled under a hidden sibling name and renamed
/// into place on commit(). Dropped without commit, the partial tree is
/// removed.
class StagedDir {
 public:
  explicit StagedDir(const fs::path& target);
  ~StagedDir();
  StagedDir(const StagedDir&) = delete;
  StagedDir& operator=(const StagedDir&) = delete;

  const fs::path& path() const { return staging_; }
  const fs::path& target() const { return target_; }
  void commit();

 private:
  fs::path target_;
  fs::path staging_;
  bool committed_ = false;
};

/// DEM (flattened when configured), riverbed, roughness and snapped gauge.
TerrainModel load_terrain(const PipelineConfig& config);
BoundaryCondition load_boundary(const PipelineConfig& config, const GeoTransform& geo);

void run_flatten(const PipelineConfig& config, const Overrides& o);
void run_build(const PipelineConfig& config, const Overrides& o);
void run_train(const PipelineConfig& config, const Overrides& o);
void run_forecast(const PipelineConfig& config, const Overrides& o);
void run_evaluate(const PipelineConfig& config, const Overrides& o);
void run_render(const PipelineConfig& config, const Overrides& o);

/// Writes a self-contained demo dataset (synthetic valley, historical
/// snapshots, truth events and config.json) into dir.
void write_demo_dataset(const fs::path& dir, int rows, int cols, std::uint64_t seed);

}  // namespace flood::cli
