#include "flood/terrain.hpp"

#include <bit>
#include <cmath>
#include <limits>

#include "flood/error.hpp"

namespace flood {

namespace {

class Fnv1a {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      hash_ ^= p[i];
      hash_ *= 0x100000001b3ULL;
    }
  }
  void f64(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    bytes(&bits, sizeof bits);
  }
  void i64(std::int64_t v) { bytes(&v, sizeof v); }
  std::uint64_t value() const { return hash_; }

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

}  // namespace

void TerrainModel::validate() const {
  const auto& g = elevation.geo();
  if (!(riverbed.geo() == g) || !(manning.geo() == g)) {
    throw ValidationError("terrain rasters do not share one geometry");
  }
  for (std::size_t i = 0; i < elevation.size(); ++i) {
    if (elevation.is_nodata(i)) continue;
    if (manning.is_nodata(i) || !(manning[i] > 0.0)) {
      throw ValidationError("Manning coefficient must be positive on every valid cell (cell " +
                            std::to_string(i) + ")");
    }
  }
  if (!g.contains(gauge_cell.row, gauge_cell.col)) throw ValidationError("gauge cell lies outside the grid");
  if (!riverbed.at(gauge_cell.row, gauge_cell.col)) throw ValidationError("gauge cell is not on the riverbed");
  if (elevation.is_nodata(gauge_cell.row, gauge_cell.col)) throw ValidationError("gauge cell has no elevation");
}

std::uint64_t TerrainModel::fingerprint() const {
  Fnv1a h;
  const auto& g = geo();
  h.f64(g.origin_x);
  h.f64(g.origin_y);
  h.f64(g.cell_size);
  h.i64(g.rows);
  h.i64(g.cols);
  h.f64(elevation.nodata());
  for (double v : elevation.values()) h.f64(v);
  for (std::size_t i = 0; i < riverbed.size(); ++i) {
    const unsigned char b = riverbed[i] ? 1 : 0;
    h.bytes(&b, 1);
  }
  for (double v : manning.values()) h.f64(v);
  h.i64(gauge_cell.row);
  h.i64(gauge_cell.col);
  return h.value();
}

Grid uniform_manning(const GeoTransform& geo, double n) {
  if (!(n > 0.0) || !std::isfinite(n)) throw ValidationError("Manning coefficient must be positive");
  return Grid(geo, n);
}

Grid flatten_riverbed(const Grid& dem, const MaskGrid& mask, double inlet_elev, double outlet_elev,
                      FlowAxis flow_axis) {
  if (!(dem.geo() == mask.geo())) throw ValidationError("riverbed mask and DEM differ in geometry");
  if (!std::isfinite(inlet_elev) || !std::isfinite(outlet_elev)) {
    throw ValidationError("riverbed elevations must be finite");
  }
  if (inlet_elev < outlet_elev) {
    throw ValidationError("riverbed inlet elevation " + format_double(inlet_elev) + " is below outlet " +
                          format_double(outlet_elev));
  }
  const auto& geo = dem.geo();
  const bool by_row = flow_axis == FlowAxis::row;
  int first = std::numeric_limits<int>::max();
  int last = -1;
  for (int r = 0; r < geo.rows; ++r) {
    for (int c = 0; c < geo.cols; ++c) {
      if (!mask.at(r, c)) continue;
      const int line = by_row ? r : c;
      first = std::min(first, line);
      last = std::max(last, line);
    }
  }
  if (last < 0) throw ValidationError("riverbed mask is empty");

  Grid out = dem;
  const double drop = outlet_elev - inlet_elev;
  const double span = static_cast<double>(last - first);
  for (int r = 0; r < geo.rows; ++r) {
    for (int c = 0; c < geo.cols; ++c) {
      if (!mask.at(r, c)) continue;
      const int line = by_row ? r : c;
      const double frac = span > 0.0 ? (line - first) / span : 0.0;
      out.at(r, c) = inlet_elev + drop * frac;
    }
  }
  return out;
}

CellIndex locate_gauge(const GeoTransform& geo, double gauge_x, double gauge_y, const MaskGrid& mask) {
  if (!(mask.geo() == geo)) throw ValidationError("riverbed mask does not match the grid geometry");
  const auto cell = world_to_cell(geo, gauge_x, gauge_y);
  if (!cell) {
    throw ValidationError("gauge point (" + format_double(gauge_x) + ", " + format_double(gauge_y) +
                          ") lies outside the grid");
  }
  if (mask.at(cell->row, cell->col)) return *cell;

  std::optional<CellIndex> best;
  double best_d2 = std::numeric_limits<double>::infinity();
  // Row-major scan with a strict comparison keeps the smallest (row, col) on ties.
  for (int r = 0; r < geo.rows; ++r) {
    for (int c = 0; c < geo.cols; ++c) {
      if (!mask.at(r, c)) continue;
      const double dx = geo.cell_center_x(c) - gauge_x;
      const double dy = geo.cell_center_y(r) - gauge_y;
      const double d2 = dx * dx + dy * dy;
      if (d2 < best_d2) {
        best_d2 = d2;
        best = CellIndex{r, c};
      }
    }
  }
  if (!best) throw ValidationError("riverbed mask is empty");
  return *best;
}

}  // namespace flood
