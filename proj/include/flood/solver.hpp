#pragma once

#include <memory>
#include <vector>

#include "flood/raster.hpp"
#include "flood/terrain.hpp"

namespace flood {

struct SolverParams {
  double g = 9.81;
  double cfl_alpha = 0.5;
  double h_dry = 1e-3;  // faces with flow depth at or below this carry no flux
  double max_dt = 60.0;

  void validate() const;
};

/// Water-level boundary. Inlet cells are held at inflow_level (water-surface
/// elevation); perimeter faces of outlet cells are free outfalls. Every other
/// perimeter or nodata face is a closed wall.
struct BoundaryCondition {
  double inflow_level = 0.0;
  std::vector<CellIndex> inlet_cells;
  std::vector<CellIndex> outlet_cells;

  void validate(const GeoTransform& geo) const;
};

struct SteadyCriteria {
  double epsilon = 1e-4;  // meters
  int window = 100;       // steps between checks
  long max_steps = 1'000'000;

  void validate() const;
};

/// Depth at cell centers, flux on the staggered faces.
///
/// qx has rows x (cols + 1) entries: face (r, c) sits between cells (r, c-1)
/// and (r, c), positive toward increasing column. qy has (rows + 1) x cols
/// entries: face (r, c) sits between cells (r-1, c) and (r, c), positive
/// toward increasing row.
struct SimulationState {
  Grid h;
  std::vector<double> qx;
  std::vector<double> qy;
  double t = 0.0;

  static constexpr double depth_nodata = -9999.0;

  /// Zero depth and flux everywhere; nodata cells of the terrain stay nodata.
  static SimulationState dry(const TerrainModel& terrain);

  double qx_at(int row, int face_col) const {
    return qx[static_cast<std::size_t>(row) * (h.cols() + 1) + face_col];
  }
  double qy_at(int face_row, int col) const {
    return qy[static_cast<std::size_t>(face_row) * h.cols() + col];
  }
  double& qx_at(int row, int face_col) { return qx[static_cast<std::size_t>(row) * (h.cols() + 1) + face_col]; }
  double& qy_at(int face_row, int col) { return qy[static_cast<std::size_t>(face_row) * h.cols() + col]; }

  /// Total water volume (m^3), summed in row-major order.
  double volume() const;
};

/// Volumes in m^3. Clamping negative depths back to zero creates water, so
/// the balance reads  final - initial = inflow - outflow + clamped_deficit.
struct MassAudit {
  double inflow = 0.0;
  double outflow = 0.0;
  double clamped_deficit = 0.0;
  double initial_storage = 0.0;
  double final_storage = 0.0;

  double residual() const { return inflow - outflow + clamped_deficit - (final_storage - initial_storage); }
  double throughput() const { return inflow + outflow; }
  /// |residual| / throughput; zero when nothing moved through the boundary.
  double relative_error() const;
};

struct SteadyResult {
  Grid depth;
  double gauge_level = 0.0;
  MassAudit mass_audit;
  long steps = 0;
  double residual = 0.0;  // max |dh| over the final check window
  double time = 0.0;
};

double stable_dt(const SimulationState& state, const GeoTransform& geo, const SolverParams& params);

/// One explicit step of the inertial scheme.
SimulationState step(const SimulationState& state, const TerrainModel& terrain, const SolverParams& params,
                     const BoundaryCondition& bc, double dt);

/// Integrates from a dry start (inlet cells filled to inflow_level) until
/// the depth field stops changing. The result is bitwise independent of
/// the tile count.
SteadyResult run_to_steady(const TerrainModel& terrain, const SolverParams& params, const BoundaryCondition& bc,
                           const SteadyCriteria& steady, int tiles = 1);

struct RunOutcome {
  long steps = 0;
  bool converged = false;
  double residual = 0.0;
};

/// Stateful tiled integrator behind step() and run_to_steady().
///
/// The grid is cut into a near-square array of rectangular tiles. Each tile
/// keeps its own arrays with a one-cell halo; after every flux phase and
/// every depth phase tiles pull the halo strips they need from their
/// neighbours. Every face is computed by exactly one tile with the same
/// arithmetic regardless of the decomposition.
class Simulation {
 public:
  Simulation(const TerrainModel& terrain, const SolverParams& params, const BoundaryCondition& bc,
             const SimulationState& initial, int tiles = 1);
  ~Simulation();
  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  /// One step with a caller-chosen dt.
  void advance(double dt);
  /// n steps with the adaptive stable dt.
  void advance_steps(long n);
  /// Adaptive steps until the steady criterion holds or max_steps is hit.
  RunOutcome run_until_steady(const SteadyCriteria& steady);

  double stable_dt() const;
  SimulationState state() const;
  MassAudit audit() const;
  long steps() const;
  double time() const;
  int tile_rows() const;
  int tile_cols() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace flood
