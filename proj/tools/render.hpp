#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "flood/raster.hpp"
#include "flood/risk.hpp"

namespace flood::cli {

using Rgb = std::array<std::uint8_t, 3>;

inline constexpr Rgb some_color{255, 221, 0};      // yellow
inline constexpr Rgb higher_color{255, 140, 0};    // orange
inline constexpr Rgb highest_color{220, 20, 20};   // red
inline constexpr Rgb truth_color{0, 90, 255};      // blue outline
inline constexpr Rgb nodata_color{0, 0, 0};

struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel
};

/// Lambertian hillshade in [0, 1] (sun from the northwest, 45 degrees up).
/// Nodata cells shade to 0.
std::vector<double> hillshade(const Grid& elevation, double z_factor = 5.0);

/// Hillshaded terrain with the risk tiers tinted on top. Truth cells on the
/// boundary of the wet region are drawn as an outline. Each cell becomes a
/// scale x scale block of pixels.
Image render_risk(const Grid& elevation, const RiskMap& risk, const MaskGrid* truth, int scale);

/// Binary PPM (P6).
void write_ppm(const Image& image, const std::filesystem::path& path);

}  // namespace flood::cli
