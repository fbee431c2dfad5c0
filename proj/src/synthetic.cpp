#include "flood/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "flood/error.hpp"

namespace flood {

Scenario synthetic_valley(const ValleySpec& spec) {
  if (spec.channel_width < 1 || spec.channel_width > spec.cols) {
    throw ValidationError("channel width must lie between 1 and the column count");
  }
  const GeoTransform geo{0.0, 0.0, spec.cell_size, spec.rows, spec.cols};
  Grid z(geo, 0.0);
  MaskGrid river(geo);
  const int left = (spec.cols - spec.channel_width) / 2;
  const int right = left + spec.channel_width - 1;
  for (int r = 0; r < spec.rows; ++r) {
    const double bed = spec.base_elevation - spec.bed_slope * spec.cell_size * r;
    for (int c = 0; c < spec.cols; ++c) {
      if (c >= left && c <= right) {
        z.at(r, c) = bed;
        river.set(r, c, true);
        continue;
      }
      const int off = c < left ? left - c : c - right;
      z.at(r, c) = bed + spec.channel_depth + spec.bank_slope * spec.cell_size * off;
    }
  }

  Scenario s{TerrainModel{z, river, uniform_manning(geo, spec.manning), {spec.rows / 2, (left + right) / 2}}, {}, 0, 0,
             spec.base_elevation};
  for (int c = left; c <= right; ++c) s.boundary.inlet_cells.push_back({0, c});
  for (int c = 0; c < spec.cols; ++c) s.boundary.outlet_cells.push_back({spec.rows - 1, c});
  s.gauge_x = geo.cell_center_x(s.terrain.gauge_cell.col);
  s.gauge_y = geo.cell_center_y(s.terrain.gauge_cell.row);
  return s;
}

Scenario inclined_plane(int rows, int cols, double cell_size, double slope, double manning, double top_elevation) {
  const GeoTransform geo{0.0, 0.0, cell_size, rows, cols};
  Grid z(geo, 0.0);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) z.at(r, c) = top_elevation - slope * cell_size * r;
  }
  MaskGrid river(geo, true);
  Scenario s{TerrainModel{z, river, uniform_manning(geo, manning), {rows / 2, cols / 2}}, {}, 0, 0, top_elevation};
  for (int c = 0; c < cols; ++c) {
    s.boundary.inlet_cells.push_back({0, c});
    s.boundary.outlet_cells.push_back({rows - 1, c});
  }
  s.gauge_x = geo.cell_center_x(cols / 2);
  s.gauge_y = geo.cell_center_y(rows / 2);
  return s;
}

}  // namespace flood
