#pragma once

#include "flood/solver.hpp"
#include "flood/terrain.hpp"

namespace flood {

/// A straight river valley draining from row 0 (north) to the last row.
/// The channel runs down the middle columns; banks rise linearly on both
/// sides, giving a V-shaped floodplain.
struct ValleySpec {
  int rows = 60;
  int cols = 40;
  double cell_size = 10.0;
  double base_elevation = 20.0;  // channel bed at row 0
  double bed_slope = 0.0005;     // along the flow axis
  double bank_slope = 0.01;      // floodplain rise per meter away from the channel
  int channel_width = 6;         // cells
  double channel_depth = 2.0;    // bed below the bank toe
  double manning = 0.05;
};

struct Scenario {
  TerrainModel terrain;
  BoundaryCondition boundary;  // inflow_level left at 0
  double gauge_x = 0.0;
  double gauge_y = 0.0;
  double inlet_bed = 0.0;  // bed elevation at the inlet cells
};

/// Inlet: channel cells of row 0. Outlet: every cell of the last row.
/// Gauge: channel center at mid-length.
Scenario synthetic_valley(const ValleySpec& spec);

/// Uniform plane sloping down the rows with closed side walls. Inlet: all
/// of row 0; outlet: all of the last row.
Scenario inclined_plane(int rows, int cols, double cell_size, double slope, double manning,
                        double top_elevation = 10.0);

}  // namespace flood
