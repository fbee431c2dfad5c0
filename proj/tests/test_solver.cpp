#include <doctest.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <random>

#include "flood/error.hpp"
#include "flood/library.hpp"
#include "flood/solver.hpp"
#include "flood/synthetic.hpp"

using namespace flood;

namespace {

bool same_bits(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

TerrainModel flat_terrain(const GeoTransform& geo, double z, double n) {
  MaskGrid river(geo, true);
  return TerrainModel{Grid(geo, z), river, uniform_manning(geo, n), {0, 0}};
}

// Lake at rest over rough bathymetry. With z in [5, 15] and a surface at 10
// the depth 10 - z is exact, and so is h + z, so the surface is flat to the
// last bit; cells above 10 are dry islands.
struct Lake {
  TerrainModel terrain;
  SimulationState state;
};

Lake random_lake(std::mt19937_64& gen, int rows, int cols) {
  const GeoTransform geo{0, 0, 10, rows, cols};
  std::uniform_real_distribution<double> u(5.0, 15.0);
  Grid z(geo);
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = u(gen);
  TerrainModel terrain{z, MaskGrid(geo, true), uniform_manning(geo, 0.035), {0, 0}};
  Lake lake{terrain, SimulationState::dry(terrain)};
  for (std::size_t i = 0; i < z.size(); ++i) lake.state.h[i] = std::max(0.0, 10.0 - z[i]);
  return lake;
}

}  // namespace

TEST_SUITE("solver") {
  TEST_CASE("stable timestep") {
    const GeoTransform geo{0, 0, 10, 2, 2};
    const TerrainModel t = flat_terrain(geo, 0.0, 0.03);
    SolverParams p;
    p.cfl_alpha = 0.7;
    SimulationState s = SimulationState::dry(t);
    CHECK(stable_dt(s, geo, p) == p.max_dt);

    s.h.at(1, 1) = 2.5;
    const double expected = 7.0 / std::sqrt(24.525);  // 0.7 * 10 / sqrt(9.81 * 2.5)
    CHECK(stable_dt(s, geo, p) == doctest::Approx(expected).epsilon(1e-14));
    CHECK(stable_dt(s, geo, p) == doctest::Approx(1.4135).epsilon(1e-4));

    s.h.at(1, 1) = 5.0;
    CHECK(stable_dt(s, geo, p) == doctest::Approx(expected / std::sqrt(2.0)).epsilon(1e-14));

    s.h.at(1, 1) = 0.5 * p.h_dry;
    CHECK(stable_dt(s, geo, p) == p.max_dt);
  }

  TEST_CASE("parameter and boundary validation") {
    SolverParams p;
    p.cfl_alpha = 1.5;
    CHECK_THROWS_AS(p.validate(), ValidationError);
    p = {};
    p.h_dry = 0.0;
    CHECK_THROWS_AS(p.validate(), ValidationError);

    const GeoTransform geo{0, 0, 10, 4, 4};
    BoundaryCondition bc;
    bc.inflow_level = 1.0;
    bc.inlet_cells = {{0, 1}};
    bc.outlet_cells = {{2, 2}};
    CHECK_THROWS_AS(bc.validate(geo), ValidationError);  // outlet not on the perimeter
    bc.outlet_cells = {{0, 1}};
    CHECK_THROWS_AS(bc.validate(geo), ValidationError);  // overlaps the inlet
    bc.outlet_cells = {{3, 1}};
    CHECK_NOTHROW(bc.validate(geo));
    bc.inlet_cells = {{4, 0}};
    CHECK_THROWS_AS(bc.validate(geo), ValidationError);
  }

  TEST_CASE("lake at rest is an exact fixed point") {
    std::mt19937_64 gen(5);
    for (int k = 0; k < 4; ++k) {
      const Lake lake = random_lake(gen, 9 + k, 11);
      for (int tiles : {1, 3}) {
        Simulation sim(lake.terrain, {}, {}, lake.state, tiles);
        sim.advance_steps(200);
        const SimulationState s = sim.state();
        for (std::size_t i = 0; i < s.h.size(); ++i) REQUIRE(same_bits(s.h[i], lake.state.h[i]));
        for (double q : s.qx) REQUIRE(q == 0.0);
        for (double q : s.qy) REQUIRE(q == 0.0);
      }
    }
  }

  TEST_CASE("water flows from the wet cell toward the dry one") {
    const GeoTransform geo{0, 0, 10, 1, 2};
    const TerrainModel t = flat_terrain(geo, 0.0, 0.03);
    SimulationState s = SimulationState::dry(t);
    s.h.at(0, 0) = 1.0;
    const SimulationState next = step(s, t, {}, {}, 0.1);
    CHECK(next.qx_at(0, 1) > 0.0);
    CHECK(next.h.at(0, 1) > 0.0);
    CHECK(next.h.at(0, 0) < 1.0);
    CHECK(next.qx_at(0, 0) == 0.0);
    CHECK(next.qx_at(0, 2) == 0.0);
    CHECK(next.t == doctest::Approx(0.1));
  }

  TEST_CASE("friction slows the flow") {
    const GeoTransform geo{0, 0, 10, 3, 4};
    auto run = [&](double n) {
      const TerrainModel t = flat_terrain(geo, 0.0, n);
      SimulationState s = SimulationState::dry(t);
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 4; ++c) s.h.at(r, c) = 2.0 - 0.1 * c;
        for (int c = 1; c < 4; ++c) s.qx_at(r, c) = 0.5;
      }
      return step(s, t, {}, {}, 0.5);
    };
    // The roughness must stay positive, so a vanishing n stands in for a frictionless bed.
    const SimulationState smooth = run(1e-12), rough = run(0.05);
    for (int r = 0; r < 3; ++r) {
      for (int c = 1; c < 4; ++c) CHECK(std::abs(smooth.qx_at(r, c)) > std::abs(rough.qx_at(r, c)));
    }
  }

  TEST_CASE("step refuses a timestep above the stable one") {
    const GeoTransform geo{0, 0, 10, 2, 2};
    const TerrainModel t = flat_terrain(geo, 0.0, 0.03);
    SimulationState s = SimulationState::dry(t);
    s.h.at(0, 0) = 2.0;
    const double dt = stable_dt(s, geo, {});
    CHECK_NOTHROW(step(s, t, {}, {}, dt));
    CHECK_THROWS_AS(step(s, t, {}, {}, dt * 1.01), ValidationError);
  }

  TEST_CASE("depth stays non-negative and mass balances") {
    std::mt19937_64 gen(17);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    for (int k = 0; k < 5; ++k) {
      const GeoTransform geo{0, 0, 10, 12, 10};
      Grid z(geo);
      for (int r = 0; r < geo.rows; ++r) {
        for (int c = 0; c < geo.cols; ++c) z.at(r, c) = 10.0 - 0.05 * r + u(gen);
      }
      z.at(5, 5) = z.nodata();  // a wall in the middle
      TerrainModel t{z, MaskGrid(geo, true), uniform_manning(geo, 0.04), {0, 0}};
      BoundaryCondition bc;
      bc.inflow_level = 14.0;
      for (int c = 2; c < 6; ++c) bc.inlet_cells.push_back({0, c});
      for (int c = 0; c < geo.cols; ++c) bc.outlet_cells.push_back({geo.rows - 1, c});

      Simulation sim(t, {}, bc, SimulationState::dry(t), 1 + k % 3);
      for (int n = 0; n < 60; ++n) {
        sim.advance_steps(10);
        const SimulationState s = sim.state();
        for (std::size_t i = 0; i < s.h.size(); ++i) {
          if (i == geo.index(5, 5)) {
            REQUIRE(s.h.is_nodata(i));
          } else {
            REQUIRE(s.h[i] >= 0.0);
          }
        }
      }
      const MassAudit a = sim.audit();
      CHECK(a.inflow > 0.0);
      CHECK(a.relative_error() <= 1e-6);
      CHECK(std::abs(a.final_storage - sim.state().volume()) <= 1e-9 * a.final_storage);

      // Faces of the wall cell and closed perimeter faces carry nothing. The
      // bottom corners are outlets, so their side faces are open.
      const SimulationState s = sim.state();
      CHECK(s.qx_at(5, 5) == 0.0);
      CHECK(s.qx_at(5, 6) == 0.0);
      CHECK(s.qy_at(5, 5) == 0.0);
      CHECK(s.qy_at(6, 5) == 0.0);
      for (int r = 0; r + 1 < geo.rows; ++r) {
        CHECK(s.qx_at(r, 0) == 0.0);
        CHECK(s.qx_at(r, geo.cols) == 0.0);
      }
      for (int c = 0; c < geo.cols; ++c) CHECK(s.qy_at(0, c) == 0.0);
    }
  }

  TEST_CASE("normal flow on a uniform plane") {
    const Scenario s0 = inclined_plane(40, 3, 10.0, 0.001, 0.03);
    for (double depth : {0.5, 1.0}) {
      Scenario s = s0;
      s.boundary.inflow_level = 10.0 + depth;
      Simulation sim(s.terrain, {}, s.boundary, SimulationState::dry(s.terrain), 1);
      REQUIRE(sim.run_until_steady({1e-9, 100, 200000}).converged);
      const SimulationState st = sim.state();
      const double h = st.h.at(20, 1);
      const double manning = std::pow(h, 5.0 / 3.0) * std::sqrt(0.001) / 0.03;
      CHECK(h == doctest::Approx(depth).epsilon(0.02));
      CHECK(st.qy_at(20, 1) == doctest::Approx(manning).epsilon(0.02));
    }
  }

  TEST_CASE("inflow below the inlet bed stays dry") {
    Scenario s = synthetic_valley({});
    s.boundary.inflow_level = s.inlet_bed - 1.0;
    const SteadyResult r = run_to_steady(s.terrain, {}, s.boundary, {});
    CHECK(r.steps <= 100);
    for (std::size_t i = 0; i < r.depth.size(); ++i) CHECK(r.depth[i] == 0.0);
    const CellIndex g = s.terrain.gauge_cell;
    CHECK(r.gauge_level == s.terrain.elevation.at(g.row, g.col));
  }

  TEST_CASE("steady valley: tiling is bitwise invisible and higher inflow wets more") {
    ValleySpec spec;
    spec.rows = 30;
    spec.cols = 24;
    Scenario s = synthetic_valley(spec);
    s.boundary.inflow_level = s.inlet_bed + 2.8;
    const SteadyResult one = run_to_steady(s.terrain, {}, s.boundary, {});
    for (int tiles : {2, 3, 4, 7}) {
      const SteadyResult many = run_to_steady(s.terrain, {}, s.boundary, {}, tiles);
      CHECK(many.steps == one.steps);
      CHECK(many.depth.identical(one.depth));
      CHECK(same_bits(many.mass_audit.residual(), one.mass_audit.residual()));
    }
    CHECK(one.mass_audit.relative_error() <= 1e-6);

    Scenario low = s;
    low.boundary.inflow_level = s.inlet_bed + 1.0;
    const SteadyResult lo = run_to_steady(low.terrain, {}, low.boundary, {});
    CHECK(wet_cell_count(lo.depth, 0.05) <= wet_cell_count(one.depth, 0.05));
    CHECK(lo.gauge_level < one.gauge_level);
  }

  TEST_CASE("non-convergence and blow-up are numerical errors") {
    Scenario s = inclined_plane(10, 3, 10.0, 0.001, 0.03);
    s.boundary.inflow_level = 12.0;
    CHECK_THROWS_AS(run_to_steady(s.terrain, {}, s.boundary, {1e-4, 10, 20}), NumericalError);

    Simulation sim(s.terrain, {}, s.boundary, SimulationState::dry(s.terrain), 1);
    CHECK_THROWS_AS(
        [&] {
          for (int k = 0; k < 2000; ++k) sim.advance(500.0);
        }(),
        NumericalError);
  }
}
