#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <random>
#include <string>

#include <unistd.h>

#include "flood/raster.hpp"

namespace test {

/// Fresh scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("flood_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline flood::MaskGrid random_mask(const flood::GeoTransform& geo, std::mt19937_64& gen, double p = 0.5) {
  std::bernoulli_distribution bit(p);
  flood::MaskGrid m(geo);
  for (std::size_t i = 0; i < geo.size(); ++i) m.set(i, bit(gen));
  return m;
}

/// FNV-1a hash of every regular file under root, keyed by relative path.
inline std::map<std::string, std::uint64_t> hash_tree(const std::filesystem::path& root) {
  std::map<std::string, std::uint64_t> out;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (auto it = std::istreambuf_iterator<char>(in); it != std::istreambuf_iterator<char>(); ++it) {
      h = (h ^ static_cast<unsigned char>(*it)) * 0x100000001b3ull;
    }
    out[std::filesystem::relative(entry.path(), root).string()] = h;
  }
  return out;
}

}  // namespace test
