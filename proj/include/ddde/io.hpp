#pragma once

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "ddde/data.hpp"
#include "ddde/errors.hpp"

namespace ddde {

/// Shortest text form that reads back to the same double (17 significant digits).
inline std::string format_real(double v) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(n));
}

/// Writes `contents` to `path` through a sibling temporary file and a rename,
/// so readers never observe a partially written file.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move " + tmp.string() + " to " + path.string());
  }
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("failed reading " + path.string());
  return ss.str();
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline double parse_real(std::string_view cell, std::size_t line) {
  cell = trim(cell);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v))
    throw ParseError("non-numeric cell '" + std::string(cell) + "'", line);
  return v;
}

inline int parse_label(std::string_view cell, std::size_t line) {
  cell = trim(cell);
  int v = 0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size())
    throw ParseError("label cell '" + std::string(cell) + "' is not an integer", line);
  return v;
}

} // namespace detail

/// Parses headerless comma-separated rows of reals. With `labeled` the last
/// column is read as an integer label. Blank lines are skipped.
inline Dataset parse_csv(std::string_view text, bool labeled = false) {
  std::vector<double> values;
  std::vector<int> labels;
  std::size_t width = 0;
  std::size_t rows = 0;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (detail::trim(line).empty()) continue;

    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      cells.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (rows == 0) {
      width = cells.size();
      if (labeled && width < 2) throw ParseError("labeled rows need at least one value and a label", line_no);
    } else if (cells.size() != width) {
      throw ParseError("ragged row: expected " + std::to_string(width) + " cells, found " +
                           std::to_string(cells.size()),
                       line_no);
    }
    const std::size_t n_values = labeled ? width - 1 : width;
    for (std::size_t j = 0; j < n_values; ++j) values.push_back(detail::parse_real(cells[j], line_no));
    if (labeled) labels.push_back(detail::parse_label(cells.back(), line_no));
    ++rows;
  }
  if (rows == 0) throw ParseError("no data rows", line_no == 0 ? 1 : line_no);

  const std::size_t dim = labeled ? width - 1 : width;
  Dataset out;
  out.points = Eigen::Map<const Matrix>(values.data(), static_cast<Eigen::Index>(rows),
                                        static_cast<Eigen::Index>(dim));
  if (labeled) out.labels = std::move(labels);
  return out;
}

inline Dataset load_csv(const std::filesystem::path& path, bool labeled = false) {
  Dataset d = parse_csv(read_file(path), labeled);
  d.provenance = path.string();
  return d;
}

inline std::string format_csv(const Dataset& data) {
  std::string out;
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t j = 0; j < data.dim(); ++j) {
      if (j > 0) out += ',';
      out += format_real(data.points(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    }
    if (data.labels) {
      out += ',';
      out += std::to_string((*data.labels)[i]);
    }
    out += '\n';
  }
  return out;
}

/// Labels, when present, are written as a trailing integer column.
inline void save_csv(const Dataset& data, const std::filesystem::path& path) {
  write_file_atomic(path, format_csv(data));
}

namespace detail {

inline std::uint32_t read_be32(std::string_view bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (std::size_t i = 0; i < 4; ++i) v = (v << 8) | static_cast<unsigned char>(bytes[offset + i]);
  return v;
}

} // namespace detail

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

/// Decodes IDX image/label buffers (unsigned byte payload). Pixels are scaled
/// by 1/255; `digit_filter` keeps only rows with that label.
inline Dataset parse_idx(std::string_view images, std::string_view labels, std::optional<int> digit_filter = {}) {
  if (images.size() < 16) throw FormatError("idx images: header truncated");
  if (detail::read_be32(images, 0) != kIdxImageMagic) throw FormatError("idx images: bad magic number");
  const std::size_t count = detail::read_be32(images, 4);
  const std::size_t rows = detail::read_be32(images, 8);
  const std::size_t cols = detail::read_be32(images, 12);
  const std::size_t pixels = rows * cols;
  if (pixels == 0) throw FormatError("idx images: zero-sized image");
  if (images.size() != 16 + count * pixels) throw FormatError("idx images: payload length does not match header");

  if (labels.size() < 8) throw FormatError("idx labels: header truncated");
  if (detail::read_be32(labels, 0) != kIdxLabelMagic) throw FormatError("idx labels: bad magic number");
  if (detail::read_be32(labels, 4) != count) throw FormatError("idx labels: count differs from image count");
  if (labels.size() != 8 + count) throw FormatError("idx labels: payload length does not match header");

  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < count; ++i) {
    const int label = static_cast<unsigned char>(labels[8 + i]);
    if (!digit_filter || label == *digit_filter) keep.push_back(i);
  }
  Dataset out;
  out.points.resize(static_cast<Eigen::Index>(keep.size()), static_cast<Eigen::Index>(pixels));
  out.labels.emplace();
  for (std::size_t r = 0; r < keep.size(); ++r) {
    const std::size_t base = 16 + keep[r] * pixels;
    for (std::size_t p = 0; p < pixels; ++p)
      out.points(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(p)) =
          static_cast<double>(static_cast<unsigned char>(images[base + p])) / 255.0;
    out.labels->push_back(static_cast<unsigned char>(labels[8 + keep[r]]));
  }
  out.provenance = "idx";
  return out;
}

inline Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                        std::optional<int> digit_filter = {}) {
  Dataset d = parse_idx(read_file(images_path), read_file(labels_path), digit_filter);
  d.provenance = images_path.string();
  return d;
}

} // namespace ddde
