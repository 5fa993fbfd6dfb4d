#pragma once

// Activation tensors, keypoint sets and their on-disk formats.
//
// Tensor file ("SCF1"):
//   bytes 0..3   magic "SCF1"
//   bytes 4..15  uint32 LE width, height, channels
//   bytes 16..19 uint32 LE reserved, must be zero
//   then width*height*channels float32 LE, channel fastest, then x, then y.

#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "selconv/binary_io.hpp"
#include "selconv/error.hpp"

namespace selconv {

inline constexpr char kTensorMagic[4] = {'S', 'C', 'F', '1'};
inline constexpr std::size_t kTensorHeaderBytes = 20;

/// W x H grid of K-dimensional activations, location-major.
class FeatureTensor {
 public:
  FeatureTensor() = default;

  FeatureTensor(std::uint32_t width, std::uint32_t height, std::uint32_t channels, std::vector<float> data)
      : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
    validate();
  }

  // Zero-filled tensor.
  FeatureTensor(std::uint32_t width, std::uint32_t height, std::uint32_t channels)
      : FeatureTensor(width, height, channels,
                      std::vector<float>(static_cast<std::size_t>(width) * height * channels, 0.0f)) {}

  std::uint32_t width() const { return width_; }
  std::uint32_t height() const { return height_; }
  std::uint32_t channels() const { return channels_; }
  std::size_t locations() const { return static_cast<std::size_t>(width_) * height_; }
  std::span<const float> data() const { return data_; }

  // 1-based grid coordinates.
  std::size_t offset(std::uint32_t x, std::uint32_t y) const {
    return ((static_cast<std::size_t>(y) - 1) * width_ + (x - 1)) * channels_;
  }
  std::span<const float> feature(std::uint32_t x, std::uint32_t y) const {
    return std::span<const float>(data_).subspan(offset(x, y), channels_);
  }
  float at(std::uint32_t x, std::uint32_t y, std::uint32_t k) const { return data_[offset(x, y) + k]; }
  float& at(std::uint32_t x, std::uint32_t y, std::uint32_t k) { return data_[offset(x, y) + k]; }

  // Checks the invariants; mutation through at() bypasses them.
  void validate() const {
    if (width_ == 0 || height_ == 0 || channels_ == 0) throw ValidationError("tensor dimensions must be >= 1");
    if (data_.size() != static_cast<std::size_t>(width_) * height_ * channels_)
      throw ValidationError("tensor data length does not match W*H*K");
    for (float v : data_)
      if (!std::isfinite(v)) throw ValidationError("tensor contains non-finite values");
  }

  friend bool operator==(const FeatureTensor& a, const FeatureTensor& b) {
    if (a.width_ != b.width_ || a.height_ != b.height_ || a.channels_ != b.channels_) return false;
    if (a.data_.size() != b.data_.size()) return false;
    for (std::size_t i = 0; i < a.data_.size(); ++i)
      if (std::bit_cast<std::uint32_t>(a.data_[i]) != std::bit_cast<std::uint32_t>(b.data_[i])) return false;
    return true;
  }

 private:
  std::uint32_t width_ = 0;
  std::uint32_t height_ = 0;
  std::uint32_t channels_ = 0;
  std::vector<float> data_;
};

inline void write_tensor(const FeatureTensor& t, std::ostream& out) {
  t.validate();
  out.write(kTensorMagic, 4);
  io::put_u32(out, t.width());
  io::put_u32(out, t.height());
  io::put_u32(out, t.channels());
  io::put_u32(out, 0);
  for (float v : t.data()) io::put_f32(out, v);
}

inline void write_tensor(const FeatureTensor& t, const std::filesystem::path& path) {
  t.validate();  // before the file is touched
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  write_tensor(t, out);
  if (!out) throw IoError("write failed: " + path.string());
}

inline FeatureTensor read_tensor(std::istream& in) {
  char magic[4] = {};
  if (!in.read(magic, 4) || std::string_view(magic, 4) != std::string_view(kTensorMagic, 4))
    throw FormatError("bad tensor magic");
  std::uint32_t w = 0, h = 0, k = 0, reserved = 0;
  try {
    w = io::get_u32(in);
    h = io::get_u32(in);
    k = io::get_u32(in);
    reserved = io::get_u32(in);
  } catch (const CorruptionError&) {
    throw FormatError("truncated tensor header");
  }
  if (reserved != 0) throw FormatError("unsupported tensor version (reserved field non-zero)");
  if (w == 0 || h == 0 || k == 0) throw FormatError("tensor header has a zero dimension");
  const std::uint64_t count = static_cast<std::uint64_t>(w) * h * k;
  if (count > (std::uint64_t{1} << 34)) throw FormatError("tensor header declares an implausible size");

  std::vector<float> data(static_cast<std::size_t>(count));
  std::vector<char> raw(static_cast<std::size_t>(count) * 4);
  in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size())
    throw CorruptionError("tensor payload shorter than header declares");
  if (in.peek() != std::char_traits<char>::eof()) throw CorruptionError("trailing bytes after tensor payload");
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(raw[4 * i + b])) << (8 * b);
    data[i] = std::bit_cast<float>(bits);
  }
  return FeatureTensor(w, h, k, std::move(data));
}

inline FeatureTensor read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open tensor: " + path.string());
  return read_tensor(in);
}

struct Keypoint {
  double x = 0.0;
  double y = 0.0;
};

/// Keypoint locations in image pixel coordinates (origin top-left).
struct KeypointSet {
  std::uint32_t image_width = 1;
  std::uint32_t image_height = 1;
  std::vector<Keypoint> points;
};

struct KeypointParse {
  KeypointSet keypoints;
  std::size_t dropped = 0;  // out-of-range points rejected
};

/// Parses "W_I H_I" followed by one "x y" per line; '#' lines are comments.
inline KeypointParse parse_keypoints(std::istream& in) {
  KeypointParse result;
  std::string line;
  bool have_header = false;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    if (!have_header) {
      long long w = 0, h = 0;
      std::string rest;
      if (!(ls >> w >> h) || (ls >> rest) || w < 1 || h < 1 || w > UINT32_MAX || h > UINT32_MAX)
        throw FormatError("malformed keypoint header on line " + std::to_string(lineno));
      result.keypoints.image_width = static_cast<std::uint32_t>(w);
      result.keypoints.image_height = static_cast<std::uint32_t>(h);
      have_header = true;
      continue;
    }
    double x = 0.0, y = 0.0;
    std::string rest;
    if (!(ls >> x >> y) || (ls >> rest) || !std::isfinite(x) || !std::isfinite(y))
      throw FormatError("malformed keypoint on line " + std::to_string(lineno));
    if (x < 0.0 || y < 0.0 || x > result.keypoints.image_width || y > result.keypoints.image_height) {
      ++result.dropped;
      continue;
    }
    result.keypoints.points.push_back({x, y});
  }
  if (!have_header) throw FormatError("keypoint file has no header");
  if (result.dropped > 0) warn(std::to_string(result.dropped) + " out-of-range keypoint(s) dropped");
  return result;
}

inline KeypointParse read_keypoints(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open keypoints: " + path.string());
  return parse_keypoints(in);
}

inline void write_keypoints(const KeypointSet& kp, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << kp.image_width << ' ' << kp.image_height << '\n';
  out.precision(17);
  for (const auto& p : kp.points) out << p.x << ' ' << p.y << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace selconv
