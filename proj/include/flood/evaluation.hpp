#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "flood/raster.hpp"
#include "flood/risk.hpp"

namespace flood {

struct RegionCounts {
  std::size_t hits = 0;       // region pixels that are wet in the truth
  std::size_t predicted = 0;  // region pixels
};

/// Scores of one forecast against one ground-truth raster. A metric whose
/// denominator is zero is empty, never zero.
struct EvalReport {
  std::optional<double> srr;  // some-risk recall
  std::optional<double> hrp;  // highest-risk precision
  std::optional<double> rar;  // some area / highest area

  RegionCounts some, higher, highest;
  std::size_t wet_total = 0;
  std::size_t n_valid = 0;

  // Number of reports averaged into each metric (1 for a single event).
  std::size_t srr_count = 0, hrp_count = 0, rar_count = 0;
};

EvalReport evaluate(const RiskMap& risk, const MaskGrid& truth_wet, const MaskGrid& valid);
EvalReport evaluate(const RiskMap& risk, const MaskGrid& truth_wet);

enum class Weighting { per_event, per_pixel };

/// per_event: unweighted mean of each metric over the reports that define
/// it. per_pixel: metrics recomputed from the summed counts. Counts are
/// summed in both modes.
EvalReport aggregate(const std::vector<EvalReport>& reports, Weighting weighting = Weighting::per_event);

/// "key: value" lines; undefined metrics print as "undefined".
std::string to_text(const EvalReport& r);
std::string csv_header();
std::string to_csv_row(const std::string& label, const EvalReport& r);

}  // namespace flood
