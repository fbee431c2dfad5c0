#include "render.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <string>

#include "flood/error.hpp"

namespace flood::cli {

std::vector<double> hillshade(const Grid& elevation, double z_factor) {
  const int rows = elevation.rows(), cols = elevation.cols();
  const double cs = elevation.geo().cell_size;
  const double zenith = std::numbers::pi / 4.0;
  const double azimuth = 3.0 * std::numbers::pi / 4.0;  // 315 degrees compass, in math convention
  std::vector<double> out(elevation.size(), 0.0);

  auto z = [&](int r, int c, double fallback) {
    r = std::clamp(r, 0, rows - 1);
    c = std::clamp(c, 0, cols - 1);
    return elevation.is_nodata(r, c) ? fallback : elevation.at(r, c);
  };
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (elevation.is_nodata(r, c)) continue;
      const double z0 = elevation.at(r, c);
      const double dzdx = (z(r, c + 1, z0) - z(r, c - 1, z0)) / (2.0 * cs);
      const double dzdy = (z(r + 1, c, z0) - z(r - 1, c, z0)) / (2.0 * cs);
      const double slope = std::atan(z_factor * std::hypot(dzdx, dzdy));
      const double aspect = std::atan2(dzdy, -dzdx);
      const double shade =
          std::cos(zenith) * std::cos(slope) + std::sin(zenith) * std::sin(slope) * std::cos(azimuth - aspect);
      out[elevation.geo().index(r, c)] = std::clamp(shade, 0.0, 1.0);
    }
  }
  return out;
}

Image render_risk(const Grid& elevation, const RiskMap& risk, const MaskGrid* truth, int scale) {
  const auto& geo = elevation.geo();
  if (!(risk.some.geo() == geo) || (truth && !(truth->geo() == geo))) {
    throw ValidationError("render: rasters differ in geometry from the terrain");
  }
  if (scale < 1) throw ValidationError("render: scale must be at least 1");
  const std::vector<double> shade = hillshade(elevation);

  auto outline = [&](int r, int c) {
    if (!truth || !truth->at(r, c)) return false;
    for (auto [dr, dc] : {std::pair{-1, 0}, {1, 0}, {0, -1}, {0, 1}}) {
      const int rr = r + dr, cc = c + dc;
      if (!geo.contains(rr, cc) || !truth->at(rr, cc)) return true;
    }
    return false;
  };

  Image img{geo.cols * scale, geo.rows * scale, {}};
  img.rgb.resize(static_cast<std::size_t>(img.width) * img.height * 3);
  for (int r = 0; r < geo.rows; ++r) {
    for (int c = 0; c < geo.cols; ++c) {
      const std::size_t i = geo.index(r, c);
      Rgb px = nodata_color;
      if (!elevation.is_nodata(i)) {
        const auto gray = static_cast<double>(60.0 + 195.0 * shade[i]);
        const Rgb* tint = risk.highest[i] ? &highest_color
                          : risk.higher[i] ? &higher_color
                          : risk.some[i]   ? &some_color
                                           : nullptr;
        for (int k = 0; k < 3; ++k) {
          const double v = tint ? 0.35 * gray + 0.65 * (*tint)[k] : gray;
          px[k] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
        }
        if (outline(r, c)) px = truth_color;
      }
      for (int y = r * scale; y < (r + 1) * scale; ++y) {
        for (int x = c * scale; x < (c + 1) * scale; ++x) {
          std::copy(px.begin(), px.end(), img.rgb.begin() + (static_cast<std::size_t>(y) * img.width + x) * 3);
        }
      }
    }
  }
  return img;
}

void write_ppm(const Image& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.rgb.data()), static_cast<std::streamsize>(image.rgb.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace flood::cli
