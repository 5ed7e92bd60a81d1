#include <gtest/gtest.h>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ddde/io.hpp"

namespace ddde {
namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "ddde_io_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

TEST(Csv, ParsesRows) {
  const auto d = parse_csv("0.5,0.5\n0.1,0.9\n");
  ASSERT_EQ(d.size(), 2u);
  ASSERT_EQ(d.dim(), 2u);
  EXPECT_EQ(d.points(1, 0), 0.1);
  EXPECT_EQ(d.points(1, 1), 0.9);
  EXPECT_FALSE(d.labels.has_value());
}

TEST(Csv, LabelsBlankLinesAndWhitespace) {
  const auto d = parse_csv("0.5, 0.25 ,1\r\n\n-1e-3,2,0\n", true);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d.dim(), 2u);
  EXPECT_EQ(d.points(0, 1), 0.25);
  EXPECT_EQ(d.points(1, 0), -1e-3);
  EXPECT_EQ(*d.labels, (std::vector<int>{1, 0}));
}

TEST(Csv, RaggedRowNamesLine) {
  try {
    parse_csv("0.5,0.5\n0.1\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Csv, NonNumericNamesLine) {
  try {
    parse_csv("1,2\n3,4\n5,abc\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  EXPECT_THROW(parse_csv("1,2.5\n", true), ParseError);
  EXPECT_THROW(parse_csv(""), ParseError);
  EXPECT_THROW(parse_csv("1,,2\n"), ParseError);
}

TEST(Csv, RoundTripIsExact) {
  Rng rng(4);
  Dataset d;
  d.points.resize(20, 3);
  for (Eigen::Index i = 0; i < d.points.size(); ++i) d.points.data()[i] = rng.normal() * 1e3 + 1.0 / 3.0;
  d.labels = std::vector<int>(20);
  for (int i = 0; i < 20; ++i) (*d.labels)[static_cast<std::size_t>(i)] = i % 2;

  const auto path = scratch("roundtrip.csv");
  save_csv(d, path);
  const auto back = load_csv(path, true);
  EXPECT_TRUE(back.points == d.points);
  EXPECT_EQ(back.labels, d.labels);
  EXPECT_EQ(back.provenance, path.string());
}

TEST(Csv, MissingFileIsIoError) { EXPECT_THROW(load_csv(scratch("does-not-exist.csv")), IoError); }

void put_be32(std::string& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<char>((v >> s) & 0xFF));
}

std::string idx_images(const std::vector<std::vector<unsigned char>>& images, std::uint32_t rows, std::uint32_t cols) {
  std::string out;
  put_be32(out, 0x00000803);
  put_be32(out, static_cast<std::uint32_t>(images.size()));
  put_be32(out, rows);
  put_be32(out, cols);
  for (const auto& img : images)
    for (unsigned char p : img) out.push_back(static_cast<char>(p));
  return out;
}

std::string idx_labels(const std::vector<unsigned char>& labels) {
  std::string out;
  put_be32(out, 0x00000801);
  put_be32(out, static_cast<std::uint32_t>(labels.size()));
  for (unsigned char l : labels) out.push_back(static_cast<char>(l));
  return out;
}

TEST(Idx, ScalesPixelsAndKeepsLabels) {
  std::vector<std::vector<unsigned char>> imgs(3, std::vector<unsigned char>(784, 0));
  imgs[1][5] = 255;
  imgs[2][0] = 51;
  const auto d = parse_idx(idx_images(imgs, 28, 28), idx_labels({7, 1, 1}));
  ASSERT_EQ(d.size(), 3u);
  ASSERT_EQ(d.dim(), 784u);
  EXPECT_TRUE((d.points.row(0).array() == 0.0).all());
  EXPECT_EQ(d.points(1, 5), 1.0);
  EXPECT_DOUBLE_EQ(d.points(2, 0), 0.2);
  EXPECT_EQ(*d.labels, (std::vector<int>{7, 1, 1}));
}

TEST(Idx, DigitFilter) {
  std::vector<std::vector<unsigned char>> imgs(4, std::vector<unsigned char>(4, 0));
  for (std::size_t i = 0; i < 4; ++i) imgs[i][0] = static_cast<unsigned char>(i);
  const auto d = parse_idx(idx_images(imgs, 2, 2), idx_labels({1, 8, 1, 3}), 1);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_DOUBLE_EQ(d.points(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(d.points(1, 0), 2.0 / 255.0);
  EXPECT_EQ(*d.labels, (std::vector<int>{1, 1}));
}

TEST(Idx, FormatErrors) {
  std::vector<std::vector<unsigned char>> imgs(2, std::vector<unsigned char>(4, 0));
  const auto images = idx_images(imgs, 2, 2);
  const auto labels = idx_labels({1, 2});
  EXPECT_THROW(parse_idx(images.substr(0, 10), labels), FormatError);
  EXPECT_THROW(parse_idx(images.substr(0, images.size() - 1), labels), FormatError);
  EXPECT_THROW(parse_idx(labels, labels), FormatError);
  EXPECT_THROW(parse_idx(images, idx_labels({1})), FormatError);
  EXPECT_THROW(parse_idx(images, labels + "x"), FormatError);
  std::string bad = images;
  bad[3] = 0x01;
  EXPECT_THROW(parse_idx(bad, labels), FormatError);
}

TEST(AtomicWrite, ReplacesContents) {
  const auto path = scratch("atomic.txt");
  write_file_atomic(path, "first");
  write_file_atomic(path, "second");
  EXPECT_EQ(read_file(path), "second");
  EXPECT_THROW(write_file_atomic(scratch("no-such-dir") / "x" / "y.txt", "z"), IoError);
}

TEST(FormatReal, RoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23}) EXPECT_EQ(std::stod(format_real(v)), v);
}

} // namespace
} // namespace ddde
