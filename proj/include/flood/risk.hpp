#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "flood/library.hpp"
#include "flood/raster.hpp"
#include "flood/threshold_model.hpp"

namespace flood {

struct ForecastInput {
  double level = 0.0;  // forecast gauge water level (m)
  double sigma = 0.25;
  int n_samples = 100;
  std::uint64_t seed = 0;

  void validate() const;
};

struct RiskThresholds {
  double p_some = 0.05;
  double p_higher = 0.5;
  double p_highest = 0.95;

  void validate() const;
};

/// Three nested regions, highest within higher within some, plus the
/// per-cell inundation probability they were cut from.
struct RiskMap {
  MaskGrid some;
  MaskGrid higher;
  MaskGrid highest;
  Grid probability;

  bool nested() const { return highest.subset_of(higher) && higher.subset_of(some); }
};

/// n_samples draws from Normal(level, sigma^2). The stream depends only on
/// the seed: mt19937_64 bits through a fixed Box-Muller transform.
std::vector<double> sample_levels(const ForecastInput& fc);

/// Fraction of sampled levels whose nearest library entry has depth at or
/// above wet_depth in each cell. Counts are integers until the final divide.
Grid probability_map(const SteadyLibrary& library, const std::vector<double>& levels, double wet_depth);

RiskMap discretize(const Grid& probability, const RiskThresholds& thresholds);

/// Some: union of both models. Highest: intersection. Higher: the simulated
/// higher region widened by the fused highest and clipped to the fused some.
RiskMap fuse(const RiskMap& sim, const ModelMasks& model);

/// some.asc, higher.asc, highest.asc, probability.asc
void save_risk_map(const RiskMap& risk, const std::filesystem::path& dir);
RiskMap load_risk_map(const std::filesystem::path& dir);

}  // namespace flood
