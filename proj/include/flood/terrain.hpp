#pragma once

#include <cstdint>

#include "flood/raster.hpp"

namespace flood {

enum class FlowAxis { row, col };

/// Static inputs of a hydraulic simulation over one raster.
///
/// Elevation nodata cells are solid walls. manning holds the Manning
/// roughness n (s m^-1/3) per cell; build it from a scalar with
/// uniform_manning().
struct TerrainModel {
  Grid elevation;
  MaskGrid riverbed;
  Grid manning;
  CellIndex gauge_cell;

  const GeoTransform& geo() const { return elevation.geo(); }

  /// Shared geometry, n > 0 on every valid cell, gauge on the riverbed.
  void validate() const;

  /// FNV-1a over geometry, elevation, riverbed, roughness and gauge cell.
  std::uint64_t fingerprint() const;
};

Grid uniform_manning(const GeoTransform& geo, double n);

/// Replaces masked cells with a constant-slope riverbed.
///
/// The elevation runs linearly from inlet_elev on the first masked line
/// (lowest row or column index along flow_axis) to outlet_elev on the last
/// one. Unmasked cells are copied unchanged.
Grid flatten_riverbed(const Grid& dem, const MaskGrid& mask, double inlet_elev, double outlet_elev,
                      FlowAxis flow_axis);

/// Snaps a gauge position onto the riverbed: the containing cell when it is
/// masked, otherwise the masked cell with the nearest center (ties go to
/// the lexicographically smallest (row, col)).
CellIndex locate_gauge(const GeoTransform& geo, double gauge_x, double gauge_y, const MaskGrid& mask);

}  // namespace flood
