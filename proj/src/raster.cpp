#include "flood/raster.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <cctype>
#include <string_view>

#include "flood/error.hpp"

namespace flood {

void GeoTransform::validate() const {
  if (!(cell_size > 0.0) || !std::isfinite(cell_size)) {
    throw ValidationError("cell size must be positive, got " + format_double(cell_size));
  }
  if (rows < 1 || cols < 1) {
    throw ValidationError("raster dimensions must be positive, got " + std::to_string(rows) + "x" +
                          std::to_string(cols));
  }
  if (!std::isfinite(origin_x) || !std::isfinite(origin_y)) {
    throw ValidationError("raster origin must be finite");
  }
}

std::optional<CellIndex> world_to_cell(const GeoTransform& geo, double x, double y) {
  const double fx = std::floor((x - geo.origin_x) / geo.cell_size);
  const double fy = std::floor((y - geo.origin_y) / geo.cell_size);
  // NaN fails both comparisons.
  if (!(fx >= 0.0 && fx < geo.cols) || !(fy >= 0.0 && fy < geo.rows)) {
    return std::nullopt;
  }
  const int col = static_cast<int>(fx);
  const int from_bottom = static_cast<int>(fy);
  return CellIndex{geo.rows - 1 - from_bottom, col};
}

Grid::Grid(GeoTransform geo, double fill, double nodata)
    : geo_(geo), values_(), nodata_(nodata) {
  geo_.validate();
  values_.assign(geo_.size(), fill);
}

Grid::Grid(GeoTransform geo, std::vector<double> values, double nodata)
    : geo_(geo), values_(std::move(values)), nodata_(nodata) {
  geo_.validate();
  if (values_.size() != geo_.size()) {
    throw ValidationError("grid has " + std::to_string(values_.size()) + " values, expected " +
                          std::to_string(geo_.size()));
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (values_[i] != nodata_ && !std::isfinite(values_[i])) {
      throw ValidationError("grid value at index " + std::to_string(i) + " is not finite");
    }
  }
}

bool Grid::identical(const Grid& other) const {
  if (!(geo_ == other.geo_) || values_.size() != other.values_.size()) return false;
  if (std::bit_cast<std::uint64_t>(nodata_) != std::bit_cast<std::uint64_t>(other.nodata_)) return false;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (std::bit_cast<std::uint64_t>(values_[i]) != std::bit_cast<std::uint64_t>(other.values_[i])) {
      return false;
    }
  }
  return true;
}

MaskGrid::MaskGrid(GeoTransform geo, bool fill) : geo_(geo) {
  geo_.validate();
  values_.assign(geo_.size(), fill ? 1 : 0);
}

MaskGrid::MaskGrid(GeoTransform geo, std::vector<std::uint8_t> values)
    : geo_(geo), values_(std::move(values)) {
  geo_.validate();
  if (values_.size() != geo_.size()) {
    throw ValidationError("mask has " + std::to_string(values_.size()) + " values, expected " +
                          std::to_string(geo_.size()));
  }
  for (auto& v : values_) v = v ? 1 : 0;
}

std::size_t MaskGrid::count() const {
  return static_cast<std::size_t>(std::count(values_.begin(), values_.end(), std::uint8_t{1}));
}

bool MaskGrid::subset_of(const MaskGrid& other) const {
  if (!(geo_ == other.geo_)) return false;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (values_[i] && !other.values_[i]) return false;
  }
  return true;
}

std::string format_double(double v) {
  std::array<char, 32> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  (void)ec;
  return std::string(buf.data(), end);
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) tokens.push_back(line.substr(i, j - i));
    i = j;
  }
  return tokens;
}

bool parse_number(std::string_view token, double& out) {
  // from_chars rejects a leading '+', which some writers emit.
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
  return ec == std::errc() && ptr == token.data() + token.size();
}

class LineReader {
 public:
  LineReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  // Next line that is not blank; false at end of stream.
  bool next(std::string& line) {
    while (std::getline(in_, line)) {
      ++number_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") != std::string::npos) return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw IoError(source_ + ":" + std::to_string(number_) + ": " + msg);
  }

  int number() const { return number_; }

 private:
  std::istream& in_;
  std::string source_;
  int number_ = 0;
};

}  // namespace

Grid read_ascii_grid(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open raster " + path.string());
  LineReader reader(in, path.string());

  static constexpr std::array<std::string_view, 6> keys = {"ncols",     "nrows",    "xllcorner",
                                                           "yllcorner", "cellsize", "nodata_value"};
  std::array<double, 6> header{};
  header[5] = Grid::default_nodata;
  std::string line;
  std::string pending;  // first body line when NODATA_value is absent
  for (std::size_t k = 0; k < keys.size(); ++k) {
    if (!reader.next(line)) reader.fail("unexpected end of file in header");
    auto tokens = split_ws(line);
    if (k == 5 && !tokens.empty() && lower(tokens[0]) != keys[5]) {
      pending = line;
      break;
    }
    if (tokens.size() != 2 || lower(tokens[0]) != keys[k]) {
      reader.fail("malformed header, expected '" + std::string(keys[k]) + " <value>'");
    }
    if (!parse_number(tokens[1], header[k]) || !std::isfinite(header[k])) {
      reader.fail("non-numeric header value '" + std::string(tokens[1]) + "'");
    }
  }

  const double ncols = header[0];
  const double nrows = header[1];
  if (ncols < 1 || nrows < 1 || ncols != std::floor(ncols) || nrows != std::floor(nrows) || ncols > 1e8 ||
      nrows > 1e8) {
    throw IoError(path.string() + ": malformed header, ncols/nrows must be positive integers");
  }
  GeoTransform geo{header[2], header[3], header[4], static_cast<int>(nrows), static_cast<int>(ncols)};
  if (!(geo.cell_size > 0.0)) throw IoError(path.string() + ": malformed header, cellsize must be positive");
  const double nodata = header[5];

  std::vector<double> values;
  values.reserve(geo.size());
  int row = 0;
  auto consume = [&](const std::string& body_line) {
    if (row >= geo.rows) reader.fail("dimension mismatch: more than " + std::to_string(geo.rows) + " rows");
    auto tokens = split_ws(body_line);
    if (tokens.size() != static_cast<std::size_t>(geo.cols)) {
      reader.fail("dimension mismatch: row has " + std::to_string(tokens.size()) + " values, header says " +
                  std::to_string(geo.cols));
    }
    for (auto tok : tokens) {
      double v = 0.0;
      if (!parse_number(tok, v)) reader.fail("non-numeric token '" + std::string(tok) + "'");
      if (v != nodata && !std::isfinite(v)) reader.fail("non-finite value '" + std::string(tok) + "'");
      values.push_back(v);
    }
    ++row;
  };
  if (!pending.empty()) consume(pending);
  while (reader.next(line)) consume(line);
  if (row != geo.rows) {
    reader.fail("dimension mismatch: body has " + std::to_string(row) + " rows, header says " +
                std::to_string(geo.rows));
  }
  return Grid(geo, std::move(values), nodata);
}

void write_ascii_grid(const Grid& grid, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write raster " + path.string());
  const auto& geo = grid.geo();
  std::string text;
  text.reserve(grid.size() * 8 + 128);
  text += "ncols " + std::to_string(geo.cols) + "\n";
  text += "nrows " + std::to_string(geo.rows) + "\n";
  text += "xllcorner " + format_double(geo.origin_x) + "\n";
  text += "yllcorner " + format_double(geo.origin_y) + "\n";
  text += "cellsize " + format_double(geo.cell_size) + "\n";
  text += "NODATA_value " + format_double(grid.nodata()) + "\n";
  std::array<char, 32> buf{};
  for (int r = 0; r < geo.rows; ++r) {
    for (int c = 0; c < geo.cols; ++c) {
      if (c > 0) text += ' ';
      auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), grid.at(r, c));
      (void)ec;
      text.append(buf.data(), end);
    }
    text += '\n';
  }
  out << text;
  out.flush();
  if (!out) throw IoError("failed writing raster " + path.string());
}

MaskGrid read_ascii_mask(const std::filesystem::path& path) {
  Grid g = read_ascii_grid(path);
  MaskGrid mask(g.geo());
  for (std::size_t i = 0; i < g.size(); ++i) {
    mask.set(i, !g.is_nodata(i) && g[i] != 0.0);
  }
  return mask;
}

Grid mask_to_grid(const MaskGrid& mask) {
  Grid g(mask.geo(), 0.0);
  for (std::size_t i = 0; i < mask.size(); ++i) g[i] = mask[i] ? 1.0 : 0.0;
  return g;
}

void write_ascii_mask(const MaskGrid& mask, const std::filesystem::path& path) {
  write_ascii_grid(mask_to_grid(mask), path);
}

}  // namespace flood
