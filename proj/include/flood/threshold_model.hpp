#pragma once

#include <filesystem>
#include <limits>
#include <vector>

#include "flood/raster.hpp"

namespace flood {

/// One historical observation: the gauge level at acquisition time and the
/// wet/dry raster derived from it. valid marks pixels that were actually
/// observed.
struct Snapshot {
  double gauge_level = 0.0;
  MaskGrid wet;
  MaskGrid valid;
};

struct ObservationStack {
  GeoTransform geo;
  std::vector<Snapshot> snapshots;

  void validate() const;
};

/// Per-pixel water-level thresholds.
///
/// A pixel enters the recall-oriented mask when level >= t_recall and the
/// precision-oriented mask when level > t_precision. +inf means never wet,
/// -inf means always wet. Pixels without any valid observation have both
/// thresholds at +inf and a cleared coverage bit.
struct ThresholdField {
  GeoTransform geo;
  std::vector<double> t_recall;
  std::vector<double> t_precision;
  MaskGrid coverage;

  static constexpr double never = std::numeric_limits<double>::infinity();
  static constexpr double always = -std::numeric_limits<double>::infinity();
};

struct ModelMasks {
  MaskGrid some;
  MaskGrid highest;
};

/// t_recall = lowest level observed wet, t_precision = highest level
/// observed dry, then t_precision is raised to at least t_recall.
ThresholdField fit_thresholds(const ObservationStack& obs);

ModelMasks predict(const ThresholdField& field, double level);

/// Sentinels used on disk for infinite thresholds.
inline constexpr double never_sentinel = 1e300;
inline constexpr double always_sentinel = -1e300;

/// Writes t_recall.asc, t_precision.asc, coverage.asc and manifest.json.
void save_threshold_field(const ThresholdField& field, const std::filesystem::path& dir);
ThresholdField load_threshold_field(const std::filesystem::path& dir);

}  // namespace flood
