#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace flood {

/// Placement of a north-up raster with square cells.
///
/// (origin_x, origin_y) is the lower-left outer corner of the raster, the
/// same point an ESRI ASCII grid names with xllcorner/yllcorner. Row 0 is
/// the northernmost row, so world y decreases as the row index grows.
struct GeoTransform {
  double origin_x = 0.0;
  double origin_y = 0.0;
  double cell_size = 1.0;
  int rows = 1;
  int cols = 1;

  std::size_t size() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(col);
  }
  bool contains(int row, int col) const { return row >= 0 && row < rows && col >= 0 && col < cols; }

  double cell_center_x(int col) const { return origin_x + (col + 0.5) * cell_size; }
  double cell_center_y(int row) const { return origin_y + (rows - row - 0.5) * cell_size; }

  /// Throws ValidationError unless cell_size > 0 and both dimensions are positive.
  void validate() const;

  bool operator==(const GeoTransform&) const = default;
};

struct CellIndex {
  int row = 0;
  int col = 0;
  auto operator<=>(const CellIndex&) const = default;
};

/// Cell whose footprint [edge, edge + cell_size) contains (x, y) along each
/// axis, or nullopt when the point lies outside the raster.
std::optional<CellIndex> world_to_cell(const GeoTransform& geo, double x, double y);

/// Row-major raster of doubles. Cells equal to nodata() are invalid.
class Grid {
 public:
  static constexpr double default_nodata = -9999.0;

  explicit Grid(GeoTransform geo, double fill = 0.0, double nodata = default_nodata);
  Grid(GeoTransform geo, std::vector<double> values, double nodata = default_nodata);

  const GeoTransform& geo() const { return geo_; }
  double nodata() const { return nodata_; }
  int rows() const { return geo_.rows; }
  int cols() const { return geo_.cols; }
  std::size_t size() const { return values_.size(); }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double at(int row, int col) const { return values_[geo_.index(row, col)]; }
  double& at(int row, int col) { return values_[geo_.index(row, col)]; }

  bool is_nodata(std::size_t i) const { return values_[i] == nodata_; }
  bool is_nodata(int row, int col) const { return is_nodata(geo_.index(row, col)); }

  /// Bitwise comparison of geometry, nodata sentinel and every value.
  bool identical(const Grid& other) const;

 private:
  GeoTransform geo_;
  std::vector<double> values_;
  double nodata_;
};

/// Row-major boolean raster (riverbed masks, wet/dry rasters, risk regions).
class MaskGrid {
 public:
  explicit MaskGrid(GeoTransform geo, bool fill = false);
  MaskGrid(GeoTransform geo, std::vector<std::uint8_t> values);

  const GeoTransform& geo() const { return geo_; }
  int rows() const { return geo_.rows; }
  int cols() const { return geo_.cols; }
  std::size_t size() const { return values_.size(); }

  bool operator[](std::size_t i) const { return values_[i] != 0; }
  bool at(int row, int col) const { return values_[geo_.index(row, col)] != 0; }
  void set(std::size_t i, bool v) { values_[i] = v ? 1 : 0; }
  void set(int row, int col, bool v) { set(geo_.index(row, col), v); }

  std::size_t count() const;
  bool empty() const { return count() == 0; }
  /// True when every set cell of *this is also set in other.
  bool subset_of(const MaskGrid& other) const;

  bool operator==(const MaskGrid& other) const = default;

 private:
  GeoTransform geo_;
  std::vector<std::uint8_t> values_;
};

/// Reads an ESRI ASCII grid. Errors carry the offending line number.
Grid read_ascii_grid(const std::filesystem::path& path);

/// Writes an ESRI ASCII grid using shortest round-trip float formatting.
void write_ascii_grid(const Grid& grid, const std::filesystem::path& path);

/// A mask cell is set when the stored value is nonzero and not nodata.
MaskGrid read_ascii_mask(const std::filesystem::path& path);
/// Masks are written as 0/1 integer grids.
void write_ascii_mask(const MaskGrid& mask, const std::filesystem::path& path);

Grid mask_to_grid(const MaskGrid& mask);

/// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double v);

}  // namespace flood
