#pragma once

// Binary checkpoint of a trained DddeModel. All fields little-endian:
//
//   "DDDE"                          4-byte magic
//   u32  format version (1)
//   u32  input dimension d
//   u32  dense layer count L
//   u32  x L output width of each layer (last is 1)
//   f64  epsilon, f64 beta, f64 ema
//   u32  objective variant (0 log-ema, 1 paper-literal)
//   f64  x 2d domain bounds, (low_i, high_i) per dimension
//   per layer: f64 weights (out x in, row-major), then f64 biases (out)

#include <bit>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ddde/dv_estimator.hpp"
#include "ddde/errors.hpp"
#include "ddde/io.hpp"

namespace ddde {

inline constexpr std::string_view kCheckpointMagic = "DDDE";
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

class ByteWriter {
public:
  void raw(std::string_view s) { buf_.append(s); }

  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
  }

  void f64(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((bits >> (8 * i)) & 0xFFu));
  }

  std::string take() { return std::move(buf_); }

private:
  std::string buf_;
};

class ByteReader {
public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  std::string_view raw(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(bytes_[pos_ + static_cast<std::size_t>(i)]);
    pos_ += 4;
    return v;
  }

  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(bytes_[pos_ + static_cast<std::size_t>(i)]);
    pos_ += 8;
    return std::bit_cast<double>(v);
  }

  bool at_end() const noexcept { return pos_ == bytes_.size(); }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError("checkpoint: unexpected end of data");
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

} // namespace detail

inline std::string encode_checkpoint(const DddeModel& model) {
  detail::ByteWriter w;
  w.raw(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(model.dim()));
  const auto& layers = model.net.layers();
  w.u32(static_cast<std::uint32_t>(layers.size()));
  for (const auto& l : layers) w.u32(static_cast<std::uint32_t>(l.output_width()));
  w.f64(model.epsilon);
  w.f64(model.beta);
  w.f64(model.ema);
  w.u32(static_cast<std::uint32_t>(model.variant));
  for (std::size_t i = 0; i < model.dim(); ++i) {
    w.f64(model.domain.low()[i]);
    w.f64(model.domain.high()[i]);
  }
  for (const auto& l : layers) {
    for (Eigen::Index i = 0; i < l.weights().size(); ++i) w.f64(l.weights().data()[i]);
    for (Eigen::Index i = 0; i < l.bias().size(); ++i) w.f64(l.bias()[i]);
  }
  return w.take();
}

inline DddeModel decode_checkpoint(std::string_view bytes) {
  detail::ByteReader r(bytes);
  if (r.raw(4) != kCheckpointMagic) throw FormatError("checkpoint: bad magic");
  if (const auto version = r.u32(); version != kCheckpointVersion)
    throw FormatError("checkpoint: unsupported format version " + std::to_string(version));
  const std::uint32_t dim = r.u32();
  const std::uint32_t layer_count = r.u32();
  if (dim == 0 || layer_count == 0) throw FormatError("checkpoint: empty network");
  if (dim > (1u << 24)) throw FormatError("checkpoint: implausible input dimension");
  if (layer_count > 1024) throw FormatError("checkpoint: implausible layer count");
  std::vector<std::uint32_t> widths(layer_count);
  for (auto& w : widths) {
    w = r.u32();
    if (w == 0 || w > (1u << 24)) throw FormatError("checkpoint: implausible layer width " + std::to_string(w));
  }
  // Size the payload from the header before allocating anything.
  std::uint64_t expected = 3 * 8 + 4 + 2 * 8 * std::uint64_t{dim};
  std::uint64_t fan_in = dim;
  for (auto w : widths) {
    expected += 8 * (fan_in + 1) * w;
    fan_in = w;
  }
  if (expected != r.remaining()) throw FormatError("checkpoint: payload length does not match header");

  DddeModel model;
  model.epsilon = r.f64();
  model.beta = r.f64();
  model.ema = r.f64();
  const std::uint32_t variant = r.u32();
  if (variant > 1) throw FormatError("checkpoint: unknown objective variant tag " + std::to_string(variant));
  model.variant = static_cast<ObjectiveVariant>(variant);
  if (!(model.ema > 0.0)) throw FormatError("checkpoint: ema must be positive");

  std::vector<double> low(dim), high(dim);
  for (std::uint32_t i = 0; i < dim; ++i) {
    low[i] = r.f64();
    high[i] = r.f64();
  }
  try {
    model.domain = Domain(std::move(low), std::move(high));
  } catch (const ParameterError& e) {
    throw FormatError(std::string("checkpoint: invalid domain: ") + e.what());
  }

  std::vector<DenseLayer> layers;
  std::size_t in = dim;
  for (auto out : widths) {
    Matrix weights(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
    for (Eigen::Index i = 0; i < weights.size(); ++i) weights.data()[i] = r.f64();
    Vector bias(static_cast<Eigen::Index>(out));
    for (Eigen::Index i = 0; i < bias.size(); ++i) bias[i] = r.f64();
    layers.emplace_back(std::move(weights), std::move(bias));
    in = out;
  }
  if (!r.at_end()) throw FormatError("checkpoint: trailing bytes after the last layer");
  try {
    model.net = MlpNetwork(std::move(layers), model.epsilon);
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("checkpoint: invalid network: ") + e.what());
  }
  return model;
}

inline void save_checkpoint(const DddeModel& model, const std::filesystem::path& path) {
  write_file_atomic(path, encode_checkpoint(model));
}

inline DddeModel load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

} // namespace ddde
