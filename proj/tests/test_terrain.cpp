#include <doctest.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

#include "flood/error.hpp"
#include "flood/terrain.hpp"
#include "support.hpp"

using namespace flood;

namespace {

Grid random_dem(const GeoTransform& geo, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(0.0, 50.0);
  Grid g(geo);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = u(gen);
  return g;
}

// Exhaustive nearest-center search with an explicit lexicographic tie rule.
CellIndex nearest_oracle(const GeoTransform& geo, double x, double y, const MaskGrid& mask) {
  CellIndex best{-1, -1};
  double best_d = std::numeric_limits<double>::infinity();
  for (int r = 0; r < geo.rows; ++r) {
    for (int c = 0; c < geo.cols; ++c) {
      if (!mask.at(r, c)) continue;
      const double dx = geo.cell_center_x(c) - x, dy = geo.cell_center_y(r) - y;
      const double d = dx * dx + dy * dy;
      if (d < best_d || (d == best_d && CellIndex{r, c} < best)) {
        best_d = d;
        best = {r, c};
      }
    }
  }
  return best;
}

}  // namespace

TEST_SUITE("terrain") {
  TEST_CASE("flat riverbed when inlet equals outlet") {
    std::mt19937_64 gen(1);
    const GeoTransform geo{0, 0, 10, 9, 7};
    const Grid dem = random_dem(geo, gen);
    const MaskGrid mask = test::random_mask(geo, gen, 0.3);
    const Grid out = flatten_riverbed(dem, mask, 5.0, 5.0, FlowAxis::row);
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (mask[i]) CHECK(out[i] == 5.0);
    }
  }

  TEST_CASE("linear interpolation between the first and last masked row") {
    const GeoTransform geo{0, 0, 10, 11, 3};
    MaskGrid mask(geo);
    for (int r = 0; r <= 10; ++r) mask.set(r, 1, true);
    const Grid out = flatten_riverbed(Grid(geo, 100.0), mask, 10.0, 0.0, FlowAxis::row);
    CHECK(out.at(5, 1) == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(out.at(0, 1) == 10.0);
    CHECK(out.at(10, 1) == 0.0);
    CHECK(out.at(5, 0) == 100.0);
  }

  TEST_CASE("column axis interpolates across columns") {
    const GeoTransform geo{0, 0, 10, 2, 5};
    MaskGrid mask(geo);
    for (int c = 1; c <= 4; ++c) mask.set(0, c, true);
    const Grid out = flatten_riverbed(Grid(geo, 0.0), mask, 6.0, 0.0, FlowAxis::col);
    CHECK(out.at(0, 1) == 6.0);
    CHECK(out.at(0, 2) == doctest::Approx(4.0));
    CHECK(out.at(0, 3) == doctest::Approx(2.0));
    CHECK(out.at(0, 4) == 0.0);
  }

  TEST_CASE("flatten rejects an empty mask and a rising bed") {
    const GeoTransform geo{0, 0, 1, 3, 3};
    const Grid dem(geo, 1.0);
    CHECK_THROWS_AS(flatten_riverbed(dem, MaskGrid(geo), 2.0, 1.0, FlowAxis::row), ValidationError);
    CHECK_THROWS_AS(flatten_riverbed(dem, MaskGrid(geo, true), 1.0, 2.0, FlowAxis::row), ValidationError);
  }

  TEST_CASE("flatten is idempotent, leaves unmasked cells alone and never rises downstream") {
    std::mt19937_64 gen(7);
    std::uniform_int_distribution<int> dim(1, 15);
    std::uniform_real_distribution<double> elev(0.0, 30.0);
    for (int k = 0; k < 300; ++k) {
      const GeoTransform geo{0, 0, 5, dim(gen), dim(gen)};
      const Grid dem = random_dem(geo, gen);
      MaskGrid mask = test::random_mask(geo, gen, 0.4);
      mask.set(0, 0, true);
      double a = elev(gen), b = elev(gen);
      if (a < b) std::swap(a, b);
      const FlowAxis axis = k % 2 ? FlowAxis::row : FlowAxis::col;

      const Grid once = flatten_riverbed(dem, mask, a, b, axis);
      const Grid twice = flatten_riverbed(once, mask, a, b, axis);
      REQUIRE(twice.identical(once));
      for (std::size_t i = 0; i < dem.size(); ++i) {
        if (!mask[i]) REQUIRE(std::bit_cast<std::uint64_t>(once[i]) == std::bit_cast<std::uint64_t>(dem[i]));
      }
      double prev = std::numeric_limits<double>::infinity();
      const int lines = axis == FlowAxis::row ? geo.rows : geo.cols;
      for (int l = 0; l < lines; ++l) {
        const int other = axis == FlowAxis::row ? geo.cols : geo.rows;
        for (int o = 0; o < other; ++o) {
          const int r = axis == FlowAxis::row ? l : o, c = axis == FlowAxis::row ? o : l;
          if (!mask.at(r, c)) continue;
          REQUIRE(once.at(r, c) <= prev);
          prev = once.at(r, c);
        }
      }
    }
  }

  TEST_CASE("gauge inside a masked cell stays there") {
    const GeoTransform geo{0, 0, 10, 5, 5};
    MaskGrid mask(geo);
    mask.set(2, 3, true);
    mask.set(2, 2, true);
    const CellIndex c = locate_gauge(geo, 35.0, 25.0, mask);
    CHECK(c.row == 2);
    CHECK(c.col == 3);
  }

  TEST_CASE("gauge off the river snaps to the nearest masked cell") {
    std::mt19937_64 gen(99);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 500; ++k) {
      const GeoTransform geo{-100.0, 40.0, 7.5, 12, 9};
      MaskGrid mask = test::random_mask(geo, gen, 0.1);
      mask.set(static_cast<int>(gen() % 12), static_cast<int>(gen() % 9), true);
      const double x = geo.origin_x + u(gen) * geo.cols * geo.cell_size;
      const double y = geo.origin_y + u(gen) * geo.rows * geo.cell_size;
      const CellIndex got = locate_gauge(geo, x, y, mask);
      const CellIndex want = nearest_oracle(geo, x, y, mask);
      REQUIRE(got == want);
    }
  }

  TEST_CASE("equidistant masked cells resolve to the smallest row and column") {
    const GeoTransform geo{0, 0, 10, 5, 5};
    MaskGrid mask(geo);
    mask.set(2, 1, true);
    mask.set(2, 3, true);
    mask.set(1, 2, true);
    mask.set(3, 2, true);
    const CellIndex c = locate_gauge(geo, geo.cell_center_x(2), geo.cell_center_y(2), mask);
    CHECK(c.row == 1);
    CHECK(c.col == 2);

    MaskGrid pair(geo);
    pair.set(2, 1, true);
    pair.set(2, 3, true);
    const CellIndex d = locate_gauge(geo, geo.cell_center_x(2), geo.cell_center_y(2), pair);
    CHECK(d.col == 1);
  }

  TEST_CASE("gauge errors") {
    const GeoTransform geo{0, 0, 10, 3, 3};
    CHECK_THROWS_AS(locate_gauge(geo, -5.0, 5.0, MaskGrid(geo, true)), ValidationError);
    CHECK_THROWS_AS(locate_gauge(geo, 5.0, 5.0, MaskGrid(geo)), ValidationError);
  }

  TEST_CASE("terrain validation and fingerprint") {
    const GeoTransform geo{0, 0, 10, 3, 3};
    MaskGrid river(geo);
    river.set(1, 1, true);
    TerrainModel t{Grid(geo, 1.0), river, uniform_manning(geo, 0.03), {1, 1}};
    CHECK_NOTHROW(t.validate());

    TerrainModel off = t;
    off.gauge_cell = {0, 0};
    CHECK_THROWS_AS(off.validate(), ValidationError);

    TerrainModel rough = t;
    rough.manning.at(2, 2) = 0.0;
    CHECK_THROWS_AS(rough.validate(), ValidationError);
    CHECK_THROWS_AS(uniform_manning(geo, -1.0), ValidationError);

    TerrainModel nudged = t;
    nudged.elevation.at(0, 2) = std::nextafter(1.0, 2.0);
    CHECK(nudged.fingerprint() != t.fingerprint());
    CHECK(TerrainModel(t).fingerprint() == t.fingerprint());
  }
}
