#include "flood/risk.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "flood/error.hpp"

namespace flood {

void ForecastInput::validate() const {
  if (!std::isfinite(level)) throw ValidationError("forecast level must be finite");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ValidationError("sigma must be non-negative");
  if (n_samples < 1) throw ValidationError("n_samples must be at least 1");
}

void RiskThresholds::validate() const {
  if (!(p_some > 0.0 && p_some <= p_higher && p_higher <= p_highest && p_highest <= 1.0)) {
    throw ValidationError("risk thresholds must satisfy 0 < p_some <= p_higher <= p_highest <= 1");
  }
}

std::vector<double> sample_levels(const ForecastInput& fc) {
  fc.validate();
  std::vector<double> out(static_cast<std::size_t>(fc.n_samples), fc.level);
  if (fc.sigma == 0.0) return out;

  // std::normal_distribution is implementation-defined; this transform is not.
  std::mt19937_64 gen(fc.seed);
  auto uniform = [&gen] { return static_cast<double>(gen() >> 11) * 0x1.0p-53; };  // [0, 1)
  for (std::size_t i = 0; i < out.size(); i += 2) {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    out[i] = fc.level + fc.sigma * (r * std::cos(a));
    if (i + 1 < out.size()) out[i + 1] = fc.level + fc.sigma * (r * std::sin(a));
  }
  return out;
}

Grid probability_map(const SteadyLibrary& library, const std::vector<double>& levels, double wet_depth) {
  if (library.entries.empty()) throw ValidationError("probability map needs a nonempty library");
  if (levels.empty()) throw ValidationError("probability map needs at least one sampled level");
  if (!(wet_depth > 0.0)) throw ValidationError("wet depth must be positive");

  std::vector<long> picks(library.entries.size(), 0);
  for (double level : levels) {
    const LibraryEntry& e = query(library, level);
    ++picks[static_cast<std::size_t>(&e - library.entries.data())];
  }

  const Grid& first = library.entries.front().depth;
  std::vector<long> wet(first.size(), 0);
  for (std::size_t k = 0; k < picks.size(); ++k) {
    if (picks[k] == 0) continue;
    const Grid& d = library.entries[k].depth;
    if (!(d.geo() == first.geo())) throw ValidationError("library depth grids differ in geometry");
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (!d.is_nodata(i) && d[i] >= wet_depth) wet[i] += picks[k];
    }
  }

  Grid prob(first.geo(), 0.0, first.nodata());
  const double n = static_cast<double>(levels.size());
  for (std::size_t i = 0; i < prob.size(); ++i) {
    prob[i] = first.is_nodata(i) ? first.nodata() : static_cast<double>(wet[i]) / n;
  }
  return prob;
}

RiskMap discretize(const Grid& probability, const RiskThresholds& th) {
  th.validate();
  const auto& geo = probability.geo();
  RiskMap r{MaskGrid(geo), MaskGrid(geo), MaskGrid(geo), probability};
  for (std::size_t i = 0; i < probability.size(); ++i) {
    if (probability.is_nodata(i)) continue;
    const double p = probability[i];
    r.some.set(i, p >= th.p_some);
    r.higher.set(i, p >= th.p_higher);
    r.highest.set(i, p >= th.p_highest);
  }
  return r;
}

RiskMap fuse(const RiskMap& sim, const ModelMasks& model) {
  const auto& geo = sim.some.geo();
  if (!(model.some.geo() == geo) || !(model.highest.geo() == geo) || !(sim.higher.geo() == geo) ||
      !(sim.highest.geo() == geo)) {
    throw ValidationError("risk map and threshold-model masks differ in geometry");
  }
  RiskMap out{MaskGrid(geo), MaskGrid(geo), MaskGrid(geo), sim.probability};
  for (std::size_t i = 0; i < geo.size(); ++i) {
    const bool some = sim.some[i] || model.some[i];
    const bool highest = sim.highest[i] && model.highest[i];
    out.some.set(i, some);
    out.highest.set(i, highest);
    out.higher.set(i, (sim.higher[i] || highest) && some);
  }
  return out;
}

void save_risk_map(const RiskMap& risk, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  write_ascii_mask(risk.some, dir / "some.asc");
  write_ascii_mask(risk.higher, dir / "higher.asc");
  write_ascii_mask(risk.highest, dir / "highest.asc");
  write_ascii_grid(risk.probability, dir / "probability.asc");
}

RiskMap load_risk_map(const std::filesystem::path& dir) {
  RiskMap r{read_ascii_mask(dir / "some.asc"), read_ascii_mask(dir / "higher.asc"),
            read_ascii_mask(dir / "highest.asc"), read_ascii_grid(dir / "probability.asc")};
  const auto& geo = r.some.geo();
  if (!(r.higher.geo() == geo) || !(r.highest.geo() == geo) || !(r.probability.geo() == geo)) {
    throw IoError("risk rasters in " + dir.string() + " differ in geometry");
  }
  return r;
}

}  // namespace flood
