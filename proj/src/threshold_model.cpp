#include "flood/threshold_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>

#include "flood/error.hpp"

namespace flood {

using nlohmann::json;

void ObservationStack::validate() const {
  geo.validate();
  if (snapshots.empty()) throw ValidationError("observation stack has no snapshots");
  for (std::size_t k = 0; k < snapshots.size(); ++k) {
    const auto& s = snapshots[k];
    if (!(s.wet.geo() == geo) || !(s.valid.geo() == geo)) {
      throw ValidationError("snapshot " + std::to_string(k) + " does not match the stack geometry");
    }
    if (!std::isfinite(s.gauge_level)) {
      throw ValidationError("snapshot " + std::to_string(k) + " has a non-finite gauge level");
    }
  }
}

ThresholdField fit_thresholds(const ObservationStack& obs) {
  obs.validate();
  const std::size_t n = obs.geo.size();
  ThresholdField f{obs.geo, std::vector<double>(n, ThresholdField::never),
                   std::vector<double>(n, ThresholdField::always), MaskGrid(obs.geo)};

  for (const auto& s : obs.snapshots) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!s.valid[i]) continue;
      f.coverage.set(i, true);
      if (s.wet[i]) {
        f.t_recall[i] = std::min(f.t_recall[i], s.gauge_level);
      } else {
        f.t_precision[i] = std::max(f.t_precision[i], s.gauge_level);
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!f.coverage[i]) {
      f.t_recall[i] = ThresholdField::never;
      f.t_precision[i] = ThresholdField::never;
      continue;
    }
    f.t_precision[i] = std::max(f.t_precision[i], f.t_recall[i]);
  }
  return f;
}

ModelMasks predict(const ThresholdField& field, double level) {
  if (!std::isfinite(level)) throw ValidationError("forecast level must be finite");
  ModelMasks m{MaskGrid(field.geo), MaskGrid(field.geo)};
  for (std::size_t i = 0; i < field.t_recall.size(); ++i) {
    m.some.set(i, level >= field.t_recall[i]);
    m.highest.set(i, level > field.t_precision[i]);
  }
  return m;
}

namespace {

Grid encode(const GeoTransform& geo, const std::vector<double>& t) {
  Grid g(geo, 0.0);
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] == ThresholdField::never) {
      g[i] = never_sentinel;
    } else if (t[i] == ThresholdField::always) {
      g[i] = always_sentinel;
    } else {
      g[i] = t[i];
    }
  }
  return g;
}

std::vector<double> decode(const Grid& g) {
  std::vector<double> t(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g.is_nodata(i) || g[i] >= never_sentinel) {
      t[i] = ThresholdField::never;
    } else if (g[i] <= always_sentinel) {
      t[i] = ThresholdField::always;
    } else {
      t[i] = g[i];
    }
  }
  return t;
}

}  // namespace

void save_threshold_field(const ThresholdField& field, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create threshold directory " + dir.string() + ": " + ec.message());
  write_ascii_grid(encode(field.geo, field.t_recall), dir / "t_recall.asc");
  write_ascii_grid(encode(field.geo, field.t_precision), dir / "t_precision.asc");
  write_ascii_mask(field.coverage, dir / "coverage.asc");

  json manifest = {{"format", "flood-threshold-field"},
                   {"version", 1},
                   {"t_recall", "t_recall.asc"},
                   {"t_precision", "t_precision.asc"},
                   {"coverage", "coverage.asc"},
                   {"never_wet_sentinel", never_sentinel},
                   {"always_wet_sentinel", always_sentinel},
                   {"recall_rule", "wet when level >= t_recall"},
                   {"precision_rule", "wet when level > t_precision"}};
  std::ofstream out(dir / "manifest.json", std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

ThresholdField load_threshold_field(const std::filesystem::path& dir) {
  const Grid recall = read_ascii_grid(dir / "t_recall.asc");
  const Grid precision = read_ascii_grid(dir / "t_precision.asc");
  MaskGrid coverage = read_ascii_mask(dir / "coverage.asc");
  if (!(recall.geo() == precision.geo()) || !(recall.geo() == coverage.geo())) {
    throw IoError("threshold rasters in " + dir.string() + " differ in geometry");
  }
  return ThresholdField{recall.geo(), decode(recall), decode(precision), std::move(coverage)};
}

}  // namespace flood
