#include "flood/solver.hpp"

#include <algorithm>
#include <barrier>
#include <cmath>
#include <functional>
#include <limits>
#include <set>
#include <string>
#include <thread>

#include "flood/error.hpp"

namespace flood {

void SolverParams::validate() const {
  if (!(g > 0.0) || !std::isfinite(g)) throw ValidationError("gravity must be positive");
  if (!(cfl_alpha > 0.0 && cfl_alpha <= 1.0)) throw ValidationError("cfl_alpha must lie in (0, 1]");
  if (!(h_dry > 0.0) || !std::isfinite(h_dry)) throw ValidationError("h_dry must be positive");
  if (!(max_dt > 0.0) || !std::isfinite(max_dt)) throw ValidationError("max_dt must be positive");
}

void SteadyCriteria::validate() const {
  if (!(epsilon > 0.0)) throw ValidationError("steady epsilon must be positive");
  if (window < 1) throw ValidationError("steady window must be at least one step");
  if (max_steps < 1) throw ValidationError("max_steps must be at least one");
}

void BoundaryCondition::validate(const GeoTransform& geo) const {
  if (!std::isfinite(inflow_level)) throw ValidationError("inflow level must be finite");
  std::set<CellIndex> inlets;
  for (const auto& c : inlet_cells) {
    if (!geo.contains(c.row, c.col)) {
      throw ValidationError("inlet cell (" + std::to_string(c.row) + ", " + std::to_string(c.col) +
                            ") lies outside the grid");
    }
    inlets.insert(c);
  }
  for (const auto& c : outlet_cells) {
    if (!geo.contains(c.row, c.col)) {
      throw ValidationError("outlet cell (" + std::to_string(c.row) + ", " + std::to_string(c.col) +
                            ") lies outside the grid");
    }
    if (inlets.count(c)) {
      throw ValidationError("cell (" + std::to_string(c.row) + ", " + std::to_string(c.col) +
                            ") is both inlet and outlet");
    }
    if (c.row != 0 && c.col != 0 && c.row != geo.rows - 1 && c.col != geo.cols - 1) {
      throw ValidationError("outlet cell (" + std::to_string(c.row) + ", " + std::to_string(c.col) +
                            ") is not on the grid perimeter");
    }
  }
}

SimulationState SimulationState::dry(const TerrainModel& terrain) {
  const auto& geo = terrain.geo();
  SimulationState s{Grid(geo, 0.0, depth_nodata), {}, {}, 0.0};
  for (std::size_t i = 0; i < geo.size(); ++i) {
    if (terrain.elevation.is_nodata(i)) s.h[i] = depth_nodata;
  }
  s.qx.assign(static_cast<std::size_t>(geo.rows) * (geo.cols + 1), 0.0);
  s.qy.assign(static_cast<std::size_t>(geo.rows + 1) * geo.cols, 0.0);
  return s;
}

double SimulationState::volume() const {
  const double area = h.geo().cell_size * h.geo().cell_size;
  double v = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (!h.is_nodata(i)) v += h[i] * area;
  }
  return v;
}

double MassAudit::relative_error() const {
  const double r = std::abs(residual());
  const double scale = throughput();
  if (scale > 0.0) return r / scale;
  return r == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
}

namespace {

double dt_from_depth(double h_max, double cell_size, const SolverParams& p) {
  if (!(h_max > p.h_dry)) return p.max_dt;
  return std::min(p.max_dt, p.cfl_alpha * cell_size / std::sqrt(p.g * h_max));
}

}  // namespace

double stable_dt(const SimulationState& state, const GeoTransform& geo, const SolverParams& params) {
  double h_max = 0.0;
  for (std::size_t i = 0; i < state.h.size(); ++i) {
    if (!state.h.is_nodata(i)) h_max = std::max(h_max, state.h[i]);
  }
  return dt_from_depth(h_max, geo.cell_size, params);
}

// ---------------------------------------------------------------------------
// Tiled engine

namespace {

enum FaceKind : std::uint8_t { closed = 0, interior = 1, outfall = 2 };

inline double pow7_3(double h) { return h * h * std::cbrt(h); }

struct Copy {
  int src_tile;
  std::uint32_t src;
  std::uint32_t dst;
};

struct Outfall {
  bool along_x;       // face in qx (true) or qy (false)
  std::uint32_t face;  // local face index
  std::uint32_t cell;  // local index of the outlet cell
  std::uint32_t inner; // local index of the cell behind it
  double sign;         // +1 when outward is the positive axis direction
  std::uint32_t o0, o1, o2, o3;  // orthogonal faces in the other flux array
};

struct InletCell {
  std::uint32_t cell;
  std::size_t global;
  double target;
  double added = 0.0;
  double removed = 0.0;
};

struct Tile {
  int r0 = 0, r1 = 0, c0 = 0, c1 = 0;
  int nr = 0, nc = 0;
  bool east_most = false, south_most = false;

  // Padded cell arrays, (nr + 2) x (nc + 2).
  std::vector<double> h, z, n;
  std::vector<std::uint8_t> wall;
  // Face arrays: qx is (nr + 2) x (nc + 3), qy is (nr + 3) x (nc + 2).
  std::array<std::vector<double>, 2> qx, qy;
  std::vector<std::uint8_t> kx, ky;

  std::vector<Outfall> outfalls;
  std::vector<double> outfall_volume;
  std::vector<std::size_t> outfall_key;
  std::vector<InletCell> inlets;
  std::vector<double> deficit;   // per padded cell, volume created by clamping
  std::vector<double> snapshot;  // per padded cell, depth at the last steady check

  std::vector<Copy> pull_h, pull_qx, pull_qy;

  double h_max = 0.0;
  double change = 0.0;
  std::size_t bad_cell = std::numeric_limits<std::size_t>::max();

  std::uint32_t ci(int lr, int lc) const { return static_cast<std::uint32_t>((lr + 1) * (nc + 2) + (lc + 1)); }
  std::uint32_t xi(int lr, int lc) const { return static_cast<std::uint32_t>((lr + 1) * (nc + 3) + (lc + 1)); }
  std::uint32_t yi(int lr, int lc) const { return static_cast<std::uint32_t>((lr + 1) * (nc + 2) + (lc + 1)); }
  int owned_x_cols() const { return nc + (east_most ? 1 : 0); }
  int owned_y_rows() const { return nr + (south_most ? 1 : 0); }
};

struct Control {
  double dt = 0.0;
  bool adaptive = true;
  long run_steps = 0;
  long target_steps = 0;
  bool steady = false;
  int window = 1;
  double epsilon = 0.0;
  bool check_now = false;

  bool stop = false;
  bool converged = false;
  bool failed = false;
  std::size_t bad_cell = 0;
  double bad_time = 0.0;
  double residual = std::numeric_limits<double>::infinity();
};

// Splits n items into k nearly equal contiguous blocks.
std::vector<int> block_bounds(int n, int k) {
  std::vector<int> b(static_cast<std::size_t>(k) + 1);
  for (int i = 0; i <= k; ++i) b[static_cast<std::size_t>(i)] = static_cast<int>(static_cast<long long>(n) * i / k);
  return b;
}

// Tile rows x tile columns for a requested tile count, near square, with
// the longer grid axis receiving the larger factor.
std::pair<int, int> tile_shape(int tiles, int rows, int cols) {
  int a = 1;
  for (int d = 1; d * d <= tiles; ++d) {
    if (tiles % d == 0) a = d;
  }
  int b = tiles / a;
  int tr = rows >= cols ? b : a;
  int tc = rows >= cols ? a : b;
  return {std::clamp(tr, 1, rows), std::clamp(tc, 1, cols)};
}

}  // namespace

struct Simulation::Impl {
  GeoTransform geo;
  SolverParams params;
  double dx = 0.0;
  double area = 0.0;
  double inflow_level = 0.0;
  std::vector<std::uint8_t> wall;  // global, per cell

  int tr = 1, tc = 1;
  std::vector<int> row_bounds, col_bounds;
  std::vector<int> row_tile, col_tile;  // global index -> tile coordinate
  std::vector<Tile> tiles;

  Control ctl;
  long total_steps = 0;
  double t = 0.0;
  double initial_storage = 0.0;

  int tile_id(int trow, int tcol) const { return trow * tc + tcol; }

  Impl(const TerrainModel& terrain, const SolverParams& p, const BoundaryCondition& bc, const SimulationState& init,
       int requested_tiles);

  void setup_tile(Tile& tile, const TerrainModel& terrain, const SimulationState& init,
                  const std::vector<std::uint8_t>& is_inlet, const std::vector<std::uint8_t>& is_outlet);
  void build_pulls(Tile& tile);

  void flux_phase(Tile& tile, int cur, int nxt);
  void depth_phase(Tile& tile, int nxt);
  void pull_faces(Tile& tile, int nxt);
  void pull_depth(Tile& tile);
  void finish_step() noexcept;

  RunOutcome run(long max_steps, bool adaptive, double fixed_dt, const SteadyCriteria* steady);
  void worker(Tile& tile, const std::function<void()>& sync1, const std::function<void()>& sync2);

  double global_h_max() const;
  SimulationState gather() const;
  MassAudit audit() const;
};

Simulation::Impl::Impl(const TerrainModel& terrain, const SolverParams& p, const BoundaryCondition& bc,
                       const SimulationState& init, int requested_tiles)
    : geo(terrain.geo()), params(p) {
  params.validate();
  if (!(terrain.manning.geo() == geo)) throw ValidationError("Manning grid does not match the DEM geometry");
  if (!(init.h.geo() == geo)) throw ValidationError("simulation state does not match the terrain geometry");
  if (init.qx.size() != static_cast<std::size_t>(geo.rows) * (geo.cols + 1) ||
      init.qy.size() != static_cast<std::size_t>(geo.rows + 1) * geo.cols) {
    throw ValidationError("simulation state flux arrays have the wrong size");
  }
  if (requested_tiles < 1) throw ValidationError("tile count must be at least 1");
  bc.validate(geo);

  dx = geo.cell_size;
  area = dx * dx;
  inflow_level = bc.inflow_level;
  t = init.t;

  wall.assign(geo.size(), 0);
  for (std::size_t i = 0; i < geo.size(); ++i) {
    if (terrain.elevation.is_nodata(i)) {
      wall[i] = 1;
      continue;
    }
    if (terrain.manning.is_nodata(i) || !(terrain.manning[i] > 0.0)) {
      throw ValidationError("Manning coefficient must be positive on every valid cell (cell " + std::to_string(i) +
                            ")");
    }
    const double h = init.h[i];
    if (init.h.is_nodata(i) || !std::isfinite(h) || h < 0.0) {
      throw ValidationError("initial depth must be finite and non-negative (cell " + std::to_string(i) + ")");
    }
  }
  for (double q : init.qx) {
    if (!std::isfinite(q)) throw ValidationError("initial flux must be finite");
  }
  for (double q : init.qy) {
    if (!std::isfinite(q)) throw ValidationError("initial flux must be finite");
  }

  std::vector<std::uint8_t> is_inlet(geo.size(), 0), is_outlet(geo.size(), 0);
  for (const auto& c : bc.inlet_cells) {
    if (wall[geo.index(c.row, c.col)]) throw ValidationError("inlet cell has no elevation");
    is_inlet[geo.index(c.row, c.col)] = 1;
  }
  for (const auto& c : bc.outlet_cells) {
    if (wall[geo.index(c.row, c.col)]) throw ValidationError("outlet cell has no elevation");
    is_outlet[geo.index(c.row, c.col)] = 1;
  }

  std::tie(tr, tc) = tile_shape(requested_tiles, geo.rows, geo.cols);
  row_bounds = block_bounds(geo.rows, tr);
  col_bounds = block_bounds(geo.cols, tc);
  row_tile.resize(static_cast<std::size_t>(geo.rows));
  col_tile.resize(static_cast<std::size_t>(geo.cols));
  for (int i = 0; i < tr; ++i) {
    for (int r = row_bounds[i]; r < row_bounds[i + 1]; ++r) row_tile[static_cast<std::size_t>(r)] = i;
  }
  for (int j = 0; j < tc; ++j) {
    for (int c = col_bounds[j]; c < col_bounds[j + 1]; ++c) col_tile[static_cast<std::size_t>(c)] = j;
  }

  tiles.resize(static_cast<std::size_t>(tr * tc));
  for (int i = 0; i < tr; ++i) {
    for (int j = 0; j < tc; ++j) {
      Tile& tile = tiles[static_cast<std::size_t>(tile_id(i, j))];
      tile.r0 = row_bounds[i];
      tile.r1 = row_bounds[i + 1];
      tile.c0 = col_bounds[j];
      tile.c1 = col_bounds[j + 1];
      tile.nr = tile.r1 - tile.r0;
      tile.nc = tile.c1 - tile.c0;
      tile.east_most = j == tc - 1;
      tile.south_most = i == tr - 1;
      setup_tile(tile, terrain, init, is_inlet, is_outlet);
    }
  }
  for (auto& tile : tiles) build_pulls(tile);
  // Owned faces are sanitized; bring every halo in line with its owner.
  for (auto& tile : tiles) pull_faces(tile, 0);

  // Inlet cells start at the clamped level; the reset is part of the initial state.
  for (auto& tile : tiles) {
    for (auto& in : tile.inlets) tile.h[in.cell] = in.target;
  }
  for (auto& tile : tiles) pull_depth(tile);
  initial_storage = 0.0;
  {
    const SimulationState s = gather();
    initial_storage = s.volume();
  }
}

void Simulation::Impl::setup_tile(Tile& tile, const TerrainModel& terrain, const SimulationState& init,
                                  const std::vector<std::uint8_t>& is_inlet,
                                  const std::vector<std::uint8_t>& is_outlet) {
  const int pr = tile.nr + 2, pc = tile.nc + 2;
  const std::size_t ncell = static_cast<std::size_t>(pr) * pc;
  tile.h.assign(ncell, 0.0);
  tile.z.assign(ncell, 0.0);
  tile.n.assign(ncell, 0.0);
  tile.wall.assign(ncell, 1);
  tile.deficit.assign(ncell, 0.0);
  tile.snapshot.assign(ncell, 0.0);
  for (int lr = -1; lr <= tile.nr; ++lr) {
    for (int lc = -1; lc <= tile.nc; ++lc) {
      const int gr = tile.r0 + lr, gc = tile.c0 + lc;
      if (!geo.contains(gr, gc)) continue;
      const std::size_t g = geo.index(gr, gc);
      const auto l = tile.ci(lr, lc);
      tile.wall[l] = wall[g];
      if (wall[g]) continue;
      tile.z[l] = terrain.elevation[g];
      tile.n[l] = terrain.manning[g];
      tile.h[l] = init.h[g];
    }
  }

  const std::size_t nx = static_cast<std::size_t>(tile.nr + 2) * (tile.nc + 3);
  const std::size_t ny = static_cast<std::size_t>(tile.nr + 3) * (tile.nc + 2);
  for (auto& q : tile.qx) q.assign(nx, 0.0);
  for (auto& q : tile.qy) q.assign(ny, 0.0);
  tile.kx.assign(nx, closed);
  tile.ky.assign(ny, closed);

  // Fluxes (the halo is filled by the first pull) and face kinds of owned faces.
  auto outlet_at = [&](int gr, int gc) { return geo.contains(gr, gc) && is_outlet[geo.index(gr, gc)]; };
  for (int lr = -1; lr <= tile.nr; ++lr) {
    for (int lc = -1; lc <= tile.nc + 1; ++lc) {
      const int gr = tile.r0 + lr, gc = tile.c0 + lc;
      if (gr < 0 || gr >= geo.rows || gc < 0 || gc > geo.cols) continue;
      const auto l = tile.xi(lr, lc);
      tile.qx[0][l] = init.qx[static_cast<std::size_t>(gr) * (geo.cols + 1) + gc];
    }
  }
  for (int lr = -1; lr <= tile.nr + 1; ++lr) {
    for (int lc = -1; lc <= tile.nc; ++lc) {
      const int gr = tile.r0 + lr, gc = tile.c0 + lc;
      if (gr < 0 || gr > geo.rows || gc < 0 || gc >= geo.cols) continue;
      const auto l = tile.yi(lr, lc);
      tile.qy[0][l] = init.qy[static_cast<std::size_t>(gr) * geo.cols + gc];
    }
  }

  for (int lr = 0; lr < tile.nr; ++lr) {
    for (int lc = 0; lc < tile.owned_x_cols(); ++lc) {
      const int gr = tile.r0 + lr, gc = tile.c0 + lc;
      const auto l = tile.xi(lr, lc);
      const bool wa = tile.wall[tile.ci(lr, lc - 1)] != 0;
      const bool wb = tile.wall[tile.ci(lr, lc)] != 0;
      if (!wa && !wb) {
        tile.kx[l] = interior;
      } else if (gc == 0 && !wb && outlet_at(gr, 0)) {
        tile.kx[l] = outfall;
        tile.outfalls.push_back({true, l, tile.ci(lr, lc), tile.ci(lr, lc + 1), -1.0, tile.yi(lr, lc - 1),
                                 tile.yi(lr + 1, lc - 1), tile.yi(lr, lc), tile.yi(lr + 1, lc)});
        tile.outfall_key.push_back(static_cast<std::size_t>(gr) * (geo.cols + 1) + gc);
      } else if (gc == geo.cols && !wa && outlet_at(gr, geo.cols - 1)) {
        tile.kx[l] = outfall;
        tile.outfalls.push_back({true, l, tile.ci(lr, lc - 1), tile.ci(lr, lc - 2), 1.0, tile.yi(lr, lc - 1),
                                 tile.yi(lr + 1, lc - 1), tile.yi(lr, lc), tile.yi(lr + 1, lc)});
        tile.outfall_key.push_back(static_cast<std::size_t>(gr) * (geo.cols + 1) + gc);
      }
      if (tile.kx[l] == closed) tile.qx[0][l] = 0.0;
    }
  }
  const std::size_t y_key_base = static_cast<std::size_t>(geo.rows) * (geo.cols + 1);
  for (int lr = 0; lr < tile.owned_y_rows(); ++lr) {
    for (int lc = 0; lc < tile.nc; ++lc) {
      const int gr = tile.r0 + lr, gc = tile.c0 + lc;
      const auto l = tile.yi(lr, lc);
      const bool wa = tile.wall[tile.ci(lr - 1, lc)] != 0;
      const bool wb = tile.wall[tile.ci(lr, lc)] != 0;
      if (!wa && !wb) {
        tile.ky[l] = interior;
      } else if (gr == 0 && !wb && outlet_at(0, gc)) {
        tile.ky[l] = outfall;
        tile.outfalls.push_back({false, l, tile.ci(lr, lc), tile.ci(lr + 1, lc), -1.0, tile.xi(lr - 1, lc),
                                 tile.xi(lr - 1, lc + 1), tile.xi(lr, lc), tile.xi(lr, lc + 1)});
        tile.outfall_key.push_back(y_key_base + static_cast<std::size_t>(gr) * geo.cols + gc);
      } else if (gr == geo.rows && !wa && outlet_at(geo.rows - 1, gc)) {
        tile.ky[l] = outfall;
        tile.outfalls.push_back({false, l, tile.ci(lr - 1, lc), tile.ci(lr - 2, lc), 1.0, tile.xi(lr - 1, lc),
                                 tile.xi(lr - 1, lc + 1), tile.xi(lr, lc), tile.xi(lr, lc + 1)});
        tile.outfall_key.push_back(y_key_base + static_cast<std::size_t>(gr) * geo.cols + gc);
      }
      if (tile.ky[l] == closed) tile.qy[0][l] = 0.0;
    }
  }
  tile.outfall_volume.assign(tile.outfalls.size(), 0.0);

  for (int lr = 0; lr < tile.nr; ++lr) {
    for (int lc = 0; lc < tile.nc; ++lc) {
      const std::size_t g = geo.index(tile.r0 + lr, tile.c0 + lc);
      if (!is_inlet[g]) continue;
      const auto l = tile.ci(lr, lc);
      tile.inlets.push_back({l, g, std::max(0.0, inflow_level - tile.z[l])});
    }
  }
}

void Simulation::Impl::build_pulls(Tile& tile) {
  const int self = static_cast<int>(&tile - tiles.data());
  auto owner = [&](int gr, int gc) { return tile_id(row_tile[gr], col_tile[gc]); };

  for (int lr = -1; lr <= tile.nr; ++lr) {
    for (int lc = -1; lc <= tile.nc; ++lc) {
      if (lr >= 0 && lr < tile.nr && lc >= 0 && lc < tile.nc) continue;
      const int gr = tile.r0 + lr, gc = tile.c0 + lc;
      if (!geo.contains(gr, gc)) continue;
      const int o = owner(gr, gc);
      const Tile& src = tiles[static_cast<std::size_t>(o)];
      tile.pull_h.push_back({o, src.ci(gr - src.r0, gc - src.c0), tile.ci(lr, lc)});
    }
  }
  for (int lr = -1; lr <= tile.nr; ++lr) {
    for (int lc = -1; lc <= tile.nc + 1; ++lc) {
      if (lr >= 0 && lr < tile.nr && lc >= 0 && lc < tile.owned_x_cols()) continue;
      const int gr = tile.r0 + lr, gc = tile.c0 + lc;
      if (gr < 0 || gr >= geo.rows || gc < 0 || gc > geo.cols) continue;
      const int o = owner(gr, std::min(gc, geo.cols - 1));
      if (o == self) continue;
      const Tile& src = tiles[static_cast<std::size_t>(o)];
      tile.pull_qx.push_back({o, src.xi(gr - src.r0, gc - src.c0), tile.xi(lr, lc)});
    }
  }
  for (int lr = -1; lr <= tile.nr + 1; ++lr) {
    for (int lc = -1; lc <= tile.nc; ++lc) {
      if (lr >= 0 && lr < tile.owned_y_rows() && lc >= 0 && lc < tile.nc) continue;
      const int gr = tile.r0 + lr, gc = tile.c0 + lc;
      if (gr < 0 || gr > geo.rows || gc < 0 || gc >= geo.cols) continue;
      const int o = owner(std::min(gr, geo.rows - 1), gc);
      if (o == self) continue;
      const Tile& src = tiles[static_cast<std::size_t>(o)];
      tile.pull_qy.push_back({o, src.yi(gr - src.r0, gc - src.c0), tile.yi(lr, lc)});
    }
  }
}

void Simulation::Impl::flux_phase(Tile& tile, int cur, int nxt) {
  const double g = params.g;
  const double h_dry = params.h_dry;
  const double dt = ctl.dt;
  const double inv_dx = 1.0 / dx;
  const auto& qx0 = tile.qx[cur];
  const auto& qy0 = tile.qy[cur];
  auto& qx1 = tile.qx[nxt];
  auto& qy1 = tile.qy[nxt];
  const double* h = tile.h.data();
  const double* z = tile.z.data();
  const double* n = tile.n.data();
  std::size_t bad = std::numeric_limits<std::size_t>::max();

  // Semi-implicit inertial update of one face between cells a and b.
  // TODO: optional theta-weighting of q with its two same-axis neighbours to
  // damp the checkerboard mode seen in narrow, deep, low-friction valleys.
  auto face = [&](double q, double orth, std::uint32_t a, std::uint32_t b) {
    const double eta_a = h[a] + z[a];
    const double eta_b = h[b] + z[b];
    const double hf = std::max(eta_a, eta_b) - std::max(z[a], z[b]);
    if (hf <= h_dry) return 0.0;
    const double nf = 0.5 * (n[a] + n[b]);
    const double qnorm = std::sqrt(q * q + orth * orth);
    const double num = q - g * hf * dt * (eta_b - eta_a) * inv_dx;
    const double den = 1.0 + g * dt * nf * nf * qnorm / pow7_3(hf);
    return num / den;
  };

  for (int lr = 0; lr < tile.nr; ++lr) {
    for (int lc = 0; lc < tile.owned_x_cols(); ++lc) {
      const auto l = tile.xi(lr, lc);
      if (tile.kx[l] != interior) {
        if (tile.kx[l] == closed) qx1[l] = 0.0;
        continue;
      }
      const double orth =
          0.25 * ((qy0[tile.yi(lr, lc - 1)] + qy0[tile.yi(lr + 1, lc - 1)]) + (qy0[tile.yi(lr, lc)] + qy0[tile.yi(lr + 1, lc)]));
      const double q = face(qx0[l], orth, tile.ci(lr, lc - 1), tile.ci(lr, lc));
      qx1[l] = q;
      if (!std::isfinite(q)) bad = std::min(bad, geo.index(tile.r0 + lr, tile.c0 + lc));
    }
  }
  for (int lr = 0; lr < tile.owned_y_rows(); ++lr) {
    for (int lc = 0; lc < tile.nc; ++lc) {
      const auto l = tile.yi(lr, lc);
      if (tile.ky[l] != interior) {
        if (tile.ky[l] == closed) qy1[l] = 0.0;
        continue;
      }
      const double orth =
          0.25 * ((qx0[tile.xi(lr - 1, lc)] + qx0[tile.xi(lr - 1, lc + 1)]) + (qx0[tile.xi(lr, lc)] + qx0[tile.xi(lr, lc + 1)]));
      const double q = face(qy0[l], orth, tile.ci(lr - 1, lc), tile.ci(lr, lc));
      qy1[l] = q;
      if (!std::isfinite(q)) bad = std::min(bad, geo.index(tile.r0 + lr, tile.c0 + lc));
    }
  }

  // Free outfall: the water-surface slope between the outlet cell and the
  // cell behind it drives the boundary face; flow may only leave the grid.
  for (std::size_t k = 0; k < tile.outfalls.size(); ++k) {
    const Outfall& f = tile.outfalls[k];
    const auto& own0 = f.along_x ? qx0 : qy0;
    const auto& oth0 = f.along_x ? qy0 : qx0;
    auto& own1 = f.along_x ? qx1 : qy1;
    const double hf = h[f.cell];
    double q_out = 0.0;
    if (hf > h_dry) {
      const double slope = tile.wall[f.inner] ? 0.0 : ((h[f.inner] + z[f.inner]) - (h[f.cell] + z[f.cell])) * inv_dx;
      const double orth = 0.25 * ((oth0[f.o0] + oth0[f.o1]) + (oth0[f.o2] + oth0[f.o3]));
      const double q = f.sign * own0[f.face];
      const double qnorm = std::sqrt(q * q + orth * orth);
      const double nf = n[f.cell];
      q_out = (q + g * hf * dt * slope) / (1.0 + g * dt * nf * nf * qnorm / pow7_3(hf));
      q_out = std::max(q_out, 0.0);
    }
    own1[f.face] = f.sign * q_out;
    tile.outfall_volume[k] += q_out * dt * dx;
    if (!std::isfinite(q_out)) {
      const int lr = static_cast<int>(f.cell / static_cast<std::uint32_t>(tile.nc + 2)) - 1;
      const int lc = static_cast<int>(f.cell % static_cast<std::uint32_t>(tile.nc + 2)) - 1;
      bad = std::min(bad, geo.index(tile.r0 + lr, tile.c0 + lc));
    }
  }
  tile.bad_cell = bad;
}

void Simulation::Impl::pull_faces(Tile& tile, int nxt) {
  auto& qx = tile.qx[nxt];
  auto& qy = tile.qy[nxt];
  for (const Copy& c : tile.pull_qx) qx[c.dst] = tiles[static_cast<std::size_t>(c.src_tile)].qx[nxt][c.src];
  for (const Copy& c : tile.pull_qy) qy[c.dst] = tiles[static_cast<std::size_t>(c.src_tile)].qy[nxt][c.src];
}

void Simulation::Impl::depth_phase(Tile& tile, int nxt) {
  const double dt = ctl.dt;
  const double inv_dx = 1.0 / dx;
  const auto& qx = tile.qx[nxt];
  const auto& qy = tile.qy[nxt];
  double h_max = 0.0;
  std::size_t bad = tile.bad_cell;

  for (int lr = 0; lr < tile.nr; ++lr) {
    for (int lc = 0; lc < tile.nc; ++lc) {
      const auto l = tile.ci(lr, lc);
      if (tile.wall[l]) continue;
      const double net = (qx[tile.xi(lr, lc + 1)] - qx[tile.xi(lr, lc)]) + (qy[tile.yi(lr + 1, lc)] - qy[tile.yi(lr, lc)]);
      double hn = tile.h[l] - dt * net * inv_dx;
      if (hn < 0.0) {
        tile.deficit[l] += -hn * area;
        hn = 0.0;
      }
      tile.h[l] = hn;
    }
  }
  for (auto& in : tile.inlets) {
    const double d = in.target - tile.h[in.cell];
    if (d > 0.0) {
      in.added += d * area;
    } else {
      in.removed += -d * area;
    }
    tile.h[in.cell] = in.target;
  }

  double change = 0.0;
  for (int lr = 0; lr < tile.nr; ++lr) {
    for (int lc = 0; lc < tile.nc; ++lc) {
      const auto l = tile.ci(lr, lc);
      if (tile.wall[l]) continue;
      const double hv = tile.h[l];
      if (!std::isfinite(hv)) bad = std::min(bad, geo.index(tile.r0 + lr, tile.c0 + lc));
      h_max = std::max(h_max, hv);
      if (ctl.check_now) {
        change = std::max(change, std::abs(hv - tile.snapshot[l]));
        tile.snapshot[l] = hv;
      }
    }
  }
  tile.h_max = h_max;
  tile.change = change;
  tile.bad_cell = bad;
}

void Simulation::Impl::pull_depth(Tile& tile) {
  for (const Copy& c : tile.pull_h) tile.h[c.dst] = tiles[static_cast<std::size_t>(c.src_tile)].h[c.src];
}

// Runs single-threaded between the depth phase and the depth pull.
void Simulation::Impl::finish_step() noexcept {
  ++total_steps;
  ++ctl.run_steps;
  t += ctl.dt;

  std::size_t bad = std::numeric_limits<std::size_t>::max();
  double h_max = 0.0;
  double change = 0.0;
  for (const auto& tile : tiles) {
    bad = std::min(bad, tile.bad_cell);
    h_max = std::max(h_max, tile.h_max);
    change = std::max(change, tile.change);
  }
  if (bad != std::numeric_limits<std::size_t>::max()) {
    ctl.failed = true;
    ctl.bad_cell = bad;
    ctl.bad_time = t;
    ctl.stop = true;
    return;
  }
  if (ctl.check_now) {
    ctl.residual = change;
    if (change < ctl.epsilon) {
      ctl.converged = true;
      ctl.stop = true;
    }
  }
  if (ctl.run_steps >= ctl.target_steps) ctl.stop = true;
  if (ctl.adaptive) ctl.dt = dt_from_depth(h_max, dx, params);
  ctl.check_now = ctl.steady && (ctl.run_steps + 1) % ctl.window == 0;
}

void Simulation::Impl::worker(Tile& tile, const std::function<void()>& sync1, const std::function<void()>& sync2) {
  for (;;) {
    const int cur = static_cast<int>(total_steps & 1);
    const int nxt = cur ^ 1;
    flux_phase(tile, cur, nxt);
    sync1();
    pull_faces(tile, nxt);
    depth_phase(tile, nxt);
    sync2();
    pull_depth(tile);
    if (ctl.stop) break;
  }
}

RunOutcome Simulation::Impl::run(long max_steps, bool adaptive, double fixed_dt, const SteadyCriteria* steady) {
  ctl = Control{};
  ctl.adaptive = adaptive;
  ctl.dt = adaptive ? dt_from_depth(global_h_max(), dx, params) : fixed_dt;
  ctl.target_steps = max_steps;
  if (steady) {
    ctl.steady = true;
    ctl.window = steady->window;
    ctl.epsilon = steady->epsilon;
    ctl.check_now = steady->window == 1;
    for (auto& tile : tiles) {
      for (int lr = 0; lr < tile.nr; ++lr) {
        for (int lc = 0; lc < tile.nc; ++lc) tile.snapshot[tile.ci(lr, lc)] = tile.h[tile.ci(lr, lc)];
      }
    }
  }
  if (max_steps <= 0) return {};

  if (tiles.size() == 1) {
    auto noop = [] {};
    std::function<void()> s1 = noop;
    std::function<void()> s2 = [this] { finish_step(); };
    worker(tiles.front(), s1, s2);
  } else {
    auto done = [this]() noexcept { finish_step(); };
    std::barrier flux_barrier(static_cast<std::ptrdiff_t>(tiles.size()));
    std::barrier depth_barrier(static_cast<std::ptrdiff_t>(tiles.size()), done);
    std::function<void()> s1 = [&] { flux_barrier.arrive_and_wait(); };
    std::function<void()> s2 = [&] { depth_barrier.arrive_and_wait(); };
    std::vector<std::jthread> workers;
    workers.reserve(tiles.size() - 1);
    for (std::size_t k = 1; k < tiles.size(); ++k) {
      workers.emplace_back([this, k, &s1, &s2] { worker(tiles[k], s1, s2); });
    }
    worker(tiles.front(), s1, s2);
  }

  if (ctl.failed) {
    const int r = static_cast<int>(ctl.bad_cell / static_cast<std::size_t>(geo.cols));
    const int c = static_cast<int>(ctl.bad_cell % static_cast<std::size_t>(geo.cols));
    throw NumericalError("non-finite value at cell (" + std::to_string(r) + ", " + std::to_string(c) +
                         ") at t = " + format_double(ctl.bad_time) + " s");
  }
  return {ctl.run_steps, ctl.converged, ctl.residual};
}

double Simulation::Impl::global_h_max() const {
  double h_max = 0.0;
  for (const auto& tile : tiles) {
    for (int lr = 0; lr < tile.nr; ++lr) {
      for (int lc = 0; lc < tile.nc; ++lc) {
        const auto l = tile.ci(lr, lc);
        if (!tile.wall[l]) h_max = std::max(h_max, tile.h[l]);
      }
    }
  }
  return h_max;
}

SimulationState Simulation::Impl::gather() const {
  SimulationState s{Grid(geo, 0.0, SimulationState::depth_nodata), {}, {}, t};
  s.qx.assign(static_cast<std::size_t>(geo.rows) * (geo.cols + 1), 0.0);
  s.qy.assign(static_cast<std::size_t>(geo.rows + 1) * geo.cols, 0.0);
  const int cur = static_cast<int>(total_steps & 1);
  for (const auto& tile : tiles) {
    for (int lr = 0; lr < tile.nr; ++lr) {
      for (int lc = 0; lc < tile.nc; ++lc) {
        const auto l = tile.ci(lr, lc);
        s.h.at(tile.r0 + lr, tile.c0 + lc) = tile.wall[l] ? SimulationState::depth_nodata : tile.h[l];
      }
      for (int lc = 0; lc < tile.owned_x_cols(); ++lc) {
        s.qx_at(tile.r0 + lr, tile.c0 + lc) = tile.qx[cur][tile.xi(lr, lc)];
      }
    }
    for (int lr = 0; lr < tile.owned_y_rows(); ++lr) {
      for (int lc = 0; lc < tile.nc; ++lc) s.qy_at(tile.r0 + lr, tile.c0 + lc) = tile.qy[cur][tile.yi(lr, lc)];
    }
  }
  return s;
}

MassAudit Simulation::Impl::audit() const {
  // Per-cell and per-face accumulators are re-ordered globally before
  // summing so the totals do not depend on the decomposition.
  std::vector<std::pair<std::size_t, std::pair<double, double>>> inlet;
  std::vector<std::pair<std::size_t, double>> outfall;
  std::vector<double> deficit(geo.size(), 0.0);
  for (const auto& tile : tiles) {
    for (const auto& in : tile.inlets) inlet.push_back({in.global, {in.added, in.removed}});
    for (std::size_t k = 0; k < tile.outfalls.size(); ++k) outfall.push_back({tile.outfall_key[k], tile.outfall_volume[k]});
    for (int lr = 0; lr < tile.nr; ++lr) {
      for (int lc = 0; lc < tile.nc; ++lc) deficit[geo.index(tile.r0 + lr, tile.c0 + lc)] = tile.deficit[tile.ci(lr, lc)];
    }
  }
  std::sort(inlet.begin(), inlet.end());
  std::sort(outfall.begin(), outfall.end());

  MassAudit a;
  for (const auto& [key, v] : inlet) {
    a.inflow += v.first;
    a.outflow += v.second;
  }
  for (const auto& [key, v] : outfall) a.outflow += v;
  for (double d : deficit) a.clamped_deficit += d;
  a.initial_storage = initial_storage;
  a.final_storage = gather().volume();
  return a;
}

Simulation::Simulation(const TerrainModel& terrain, const SolverParams& params, const BoundaryCondition& bc,
                       const SimulationState& initial, int tiles)
    : impl_(std::make_unique<Impl>(terrain, params, bc, initial, tiles)) {}

Simulation::~Simulation() = default;

void Simulation::advance(double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("time step must be positive and finite");
  impl_->run(1, false, dt, nullptr);
}

void Simulation::advance_steps(long n) { impl_->run(n, true, 0.0, nullptr); }

RunOutcome Simulation::run_until_steady(const SteadyCriteria& steady) {
  steady.validate();
  return impl_->run(steady.max_steps, true, 0.0, &steady);
}

double Simulation::stable_dt() const { return dt_from_depth(impl_->global_h_max(), impl_->dx, impl_->params); }
SimulationState Simulation::state() const { return impl_->gather(); }
MassAudit Simulation::audit() const { return impl_->audit(); }
long Simulation::steps() const { return impl_->total_steps; }
double Simulation::time() const { return impl_->t; }
int Simulation::tile_rows() const { return impl_->tr; }
int Simulation::tile_cols() const { return impl_->tc; }

// ---------------------------------------------------------------------------

SimulationState step(const SimulationState& state, const TerrainModel& terrain, const SolverParams& params,
                     const BoundaryCondition& bc, double dt) {
  if (!(state.h.geo() == terrain.geo())) throw ValidationError("simulation state does not match the terrain geometry");
  params.validate();
  const double limit = stable_dt(state, terrain.geo(), params);
  if (!(dt > 0.0) || dt > limit) {
    throw ValidationError("time step " + format_double(dt) + " s exceeds the stable limit " + format_double(limit) +
                          " s");
  }
  Simulation sim(terrain, params, bc, state, 1);
  sim.advance(dt);
  return sim.state();
}

SteadyResult run_to_steady(const TerrainModel& terrain, const SolverParams& params, const BoundaryCondition& bc,
                           const SteadyCriteria& steady, int tiles) {
  steady.validate();
  if (tiles < 1) throw ValidationError("tile count must be at least 1");
  const auto& geo = terrain.geo();
  if (!geo.contains(terrain.gauge_cell.row, terrain.gauge_cell.col)) {
    throw ValidationError("gauge cell lies outside the grid");
  }
  if (bc.inlet_cells.empty()) throw ValidationError("boundary condition has no inlet cells");

  Simulation sim(terrain, params, bc, SimulationState::dry(terrain), tiles);
  const RunOutcome out = sim.run_until_steady(steady);
  if (!out.converged) {
    throw NumericalError("no steady state within " + std::to_string(steady.max_steps) +
                         " steps (residual " + format_double(out.residual) + " m)");
  }
  SimulationState s = sim.state();
  const std::size_t gi = geo.index(terrain.gauge_cell.row, terrain.gauge_cell.col);
  SteadyResult r{s.h, 0.0, sim.audit(), out.steps, out.residual, s.t};
  r.gauge_level = s.h.is_nodata(gi) ? terrain.elevation[gi] : s.h[gi] + terrain.elevation[gi];
  return r;
}

}  // namespace flood
