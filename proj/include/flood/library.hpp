#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "flood/raster.hpp"
#include "flood/solver.hpp"
#include "flood/terrain.hpp"

namespace flood {

struct LibraryEntry {
  double inflow_level = 0.0;  // boundary water level that produced this extent
  double gauge_level = 0.0;   // steady h + z at the gauge cell
  Grid depth;
  long steps = 0;
  double mass_error = 0.0;  // relative mass-balance error of the run
};

/// Steady-state extents indexed by the simulated gauge level.
/// Entries are strictly increasing in gauge_level.
struct SteadyLibrary {
  std::vector<LibraryEntry> entries;
  std::uint64_t terrain_fingerprint = 0;
};

struct LibraryBuildOptions {
  int tiles = 1;
  /// Runs whose relative mass error exceeds this abort the build.
  double mass_tolerance = 1e-6;
  /// Depth above which a cell counts as wet for the monotonicity check.
  double wet_depth = 0.05;
};

/// Entries whose gauge levels differ by less than this are merged.
inline constexpr double gauge_collapse_tolerance = 1e-3;

/// One steady run per inflow level. Runs with the same gauge level (within
/// a millimetre) collapse to the one with the lower inflow level. A
/// non-monotone wet area across entries is reported through warnings, not
/// treated as an error.
SteadyLibrary build_library(const TerrainModel& terrain, const SolverParams& params, const BoundaryCondition& cells,
                            const std::vector<double>& inflow_levels, const SteadyCriteria& steady,
                            const LibraryBuildOptions& options = {}, std::vector<std::string>* warnings = nullptr);

/// Nearest entry by gauge level; an exact midpoint goes to the lower entry.
const LibraryEntry& query(const SteadyLibrary& library, double level);

std::size_t wet_cell_count(const Grid& depth, double wet_depth);

/// Writes manifest.json plus one ASCII depth grid per entry into dir.
void save_library(const SteadyLibrary& library, const std::filesystem::path& dir);

/// Loads a library. When expected_fingerprint is nonzero, a mismatch with
/// the stored terrain fingerprint is a ValidationError.
SteadyLibrary load_library(const std::filesystem::path& dir, std::uint64_t expected_fingerprint = 0);

std::string fingerprint_hex(std::uint64_t fp);

}  // namespace flood
