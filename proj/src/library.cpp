#include "flood/library.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>

#include "flood/error.hpp"

namespace flood {

using nlohmann::json;

std::string fingerprint_hex(std::uint64_t fp) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fp));
  return buf;
}

std::size_t wet_cell_count(const Grid& depth, double wet_depth) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < depth.size(); ++i) {
    if (!depth.is_nodata(i) && depth[i] >= wet_depth) ++n;
  }
  return n;
}

SteadyLibrary build_library(const TerrainModel& terrain, const SolverParams& params, const BoundaryCondition& cells,
                            const std::vector<double>& inflow_levels, const SteadyCriteria& steady,
                            const LibraryBuildOptions& options, std::vector<std::string>* warnings) {
  if (inflow_levels.empty()) throw ValidationError("no inflow levels given for the library build");
  terrain.validate();

  std::vector<LibraryEntry> runs;
  runs.reserve(inflow_levels.size());
  for (double level : inflow_levels) {
    BoundaryCondition bc = cells;
    bc.inflow_level = level;
    SteadyResult r = [&] {
      try {
        return run_to_steady(terrain, params, bc, steady, options.tiles);
      } catch (const Error& e) {
        throw Error(e.kind(), "inflow level " + format_double(level) + " m: " + e.what());
      }
    }();
    const double mass_error = r.mass_audit.relative_error();
    if (!(mass_error <= options.mass_tolerance)) {
      throw NumericalError("inflow level " + format_double(level) + " m: relative mass error " +
                           format_double(mass_error) + " exceeds " + format_double(options.mass_tolerance));
    }
    runs.push_back({level, r.gauge_level, std::move(r.depth), r.steps, mass_error});
  }

  std::stable_sort(runs.begin(), runs.end(), [](const LibraryEntry& a, const LibraryEntry& b) {
    if (a.gauge_level != b.gauge_level) return a.gauge_level < b.gauge_level;
    return a.inflow_level < b.inflow_level;
  });

  SteadyLibrary lib;
  lib.terrain_fingerprint = terrain.fingerprint();
  for (auto& e : runs) {
    if (!lib.entries.empty() && e.gauge_level - lib.entries.back().gauge_level < gauge_collapse_tolerance) {
      if (e.inflow_level < lib.entries.back().inflow_level) lib.entries.back() = std::move(e);
      continue;
    }
    lib.entries.push_back(std::move(e));
  }
  for (std::size_t i = 1; i < lib.entries.size(); ++i) {
    const auto prev = wet_cell_count(lib.entries[i - 1].depth, options.wet_depth);
    const auto next = wet_cell_count(lib.entries[i].depth, options.wet_depth);
    if (next < prev && warnings) {
      warnings->push_back("wet area shrinks from " + std::to_string(prev) + " to " + std::to_string(next) +
                          " cells between gauge levels " + format_double(lib.entries[i - 1].gauge_level) + " and " +
                          format_double(lib.entries[i].gauge_level) + " m");
    }
  }
  return lib;
}

const LibraryEntry& query(const SteadyLibrary& library, double level) {
  const auto& e = library.entries;
  if (e.empty()) throw ValidationError("query on an empty library");
  auto it = std::lower_bound(e.begin(), e.end(), level,
                             [](const LibraryEntry& entry, double v) { return entry.gauge_level < v; });
  if (it == e.begin()) return e.front();
  if (it == e.end()) return e.back();
  const auto& hi = *it;
  const auto& lo = *(it - 1);
  return (level - lo.gauge_level) <= (hi.gauge_level - level) ? lo : hi;
}

void save_library(const SteadyLibrary& library, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create library directory " + dir.string() + ": " + ec.message());

  json manifest;
  manifest["format"] = "flood-steady-library";
  manifest["version"] = 1;
  manifest["terrain_fingerprint"] = fingerprint_hex(library.terrain_fingerprint);
  manifest["entries"] = json::array();
  for (std::size_t i = 0; i < library.entries.size(); ++i) {
    const auto& e = library.entries[i];
    char name[32];
    std::snprintf(name, sizeof name, "depth_%04zu.asc", i);
    write_ascii_grid(e.depth, dir / name);
    manifest["entries"].push_back({{"inflow_level", e.inflow_level},
                                   {"gauge_level", e.gauge_level},
                                   {"steps", e.steps},
                                   {"mass_error", e.mass_error},
                                   {"depth_file", name}});
  }
  std::ofstream out(dir / "manifest.json", std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + (dir / "manifest.json").string());
}

SteadyLibrary load_library(const std::filesystem::path& dir, std::uint64_t expected_fingerprint) {
  const auto path = dir / "manifest.json";
  std::ifstream in(path);
  if (!in) throw IoError("cannot open library manifest " + path.string());
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }

  SteadyLibrary lib;
  try {
    lib.terrain_fingerprint = std::stoull(manifest.at("terrain_fingerprint").get<std::string>(), nullptr, 16);
    for (const auto& item : manifest.at("entries")) {
      LibraryEntry e{item.at("inflow_level").get<double>(), item.at("gauge_level").get<double>(),
                     read_ascii_grid(dir / item.at("depth_file").get<std::string>()), item.at("steps").get<long>(),
                     item.at("mass_error").get<double>()};
      lib.entries.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  } catch (const std::invalid_argument&) {
    throw IoError(path.string() + ": malformed terrain fingerprint");
  }
  if (lib.entries.empty()) throw IoError(path.string() + ": library has no entries");
  for (std::size_t i = 1; i < lib.entries.size(); ++i) {
    if (!(lib.entries[i].gauge_level > lib.entries[i - 1].gauge_level)) {
      throw IoError(path.string() + ": entries are not strictly increasing in gauge level");
    }
  }
  if (expected_fingerprint != 0 && expected_fingerprint != lib.terrain_fingerprint) {
    throw ValidationError("library in " + dir.string() + " was built for terrain " +
                          fingerprint_hex(lib.terrain_fingerprint) + ", current terrain is " +
                          fingerprint_hex(expected_fingerprint));
  }
  return lib;
}

}  // namespace flood
