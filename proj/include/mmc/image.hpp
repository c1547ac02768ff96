#ifndef MMC_IMAGE_HPP
#define MMC_IMAGE_HPP

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "mmc/hash.hpp"
#include "mmc/types.hpp"

namespace mmc {

inline constexpr int kImageSize = 224;
inline constexpr int kViewCount = 24;

/// 3x224x224 image, channel-major with row-major pixels inside each channel.
/// Values are expected in [0,1] before any embedder-specific normalization.
struct RenderedImage {
  std::array<Eigen::MatrixXf, 3> channels;  // each kImageSize x kImageSize, (row, col) = (y, x)
  int view_id = 0;

  void validate() const {
    for (const auto& c : channels) {
      if (c.rows() != kImageSize || c.cols() != kImageSize)
        throw InvalidInput("rendered image: channel shape must be 224x224");
      if (!c.allFinite()) throw InvalidInput("rendered image: non-finite pixels");
    }
    if (view_id < 0 || view_id >= kViewCount)
      throw InvalidInput("rendered image: view_id out of [0,24)");
  }

  /// Content hash over the canonical float32 pixel stream, channel-major,
  /// row-major within each channel. Stable across processes.
  std::uint64_t content_hash() const {
    Fnv1a h;
    for (const auto& c : channels)
      for (int y = 0; y < kImageSize; ++y)
        for (int x = 0; x < kImageSize; ++x) h.update_f32(c(y, x));
    return h.digest();
  }

  static RenderedImage uniform(float value, int view_id = 0) {
    RenderedImage img;
    for (auto& c : img.channels) c = Eigen::MatrixXf::Constant(kImageSize, kImageSize, value);
    img.view_id = view_id;
    return img;
  }
};

namespace detail {
inline void put_u32(std::ofstream& out, std::uint32_t v) {
  unsigned char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), 4);
}
inline std::uint32_t get_u32(std::ifstream& in) {
  unsigned char buf[4];
  in.read(reinterpret_cast<char*>(buf), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
  return v;
}
}  // namespace detail

inline constexpr char kDepthMagic[4] = {'D', 'I', 'M', 'G'};

/// Raw depth image: 16-byte header (magic, width, height, reserved), then
/// width*height little-endian float32 values in row-major order.
inline void write_depth_img(const std::string& path, const Eigen::MatrixXf& depth) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write image: " + path);
  out.write(kDepthMagic, 4);
  detail::put_u32(out, static_cast<std::uint32_t>(depth.cols()));
  detail::put_u32(out, static_cast<std::uint32_t>(depth.rows()));
  detail::put_u32(out, 0);
  for (Index y = 0; y < depth.rows(); ++y)
    for (Index x = 0; x < depth.cols(); ++x) {
      const float v = depth(y, x);
      std::uint32_t bits;
      std::memcpy(&bits, &v, 4);
      unsigned char buf[4];
      for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>(bits >> (8 * i));
      out.write(reinterpret_cast<const char*>(buf), 4);
    }
  if (!out) throw IoError("error while writing image: " + path);
}

inline Eigen::MatrixXf read_depth_img(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kDepthMagic, 4) != 0)
    throw IoError(path + ": bad depth image magic");
  const std::uint32_t w = detail::get_u32(in);
  const std::uint32_t h = detail::get_u32(in);
  detail::get_u32(in);  // reserved
  if (!in || w == 0 || h == 0 || w > 16384 || h > 16384)
    throw IoError(path + ": bad depth image header");
  Eigen::MatrixXf depth(h, w);
  for (std::uint32_t y = 0; y < h; ++y)
    for (std::uint32_t x = 0; x < w; ++x) {
      unsigned char buf[4];
      in.read(reinterpret_cast<char*>(buf), 4);
      if (!in) throw IoError(path + ": truncated depth image");
      std::uint32_t bits = 0;
      for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
      float v;
      std::memcpy(&v, &bits, 4);
      depth(y, x) = v;
    }
  return depth;
}

/// Load a single-channel depth render as the 3-channel network input by
/// replicating the depth plane.
inline RenderedImage load_render(const std::string& path, int view_id) {
  const Eigen::MatrixXf depth = read_depth_img(path);
  if (depth.rows() != kImageSize || depth.cols() != kImageSize)
    throw InvalidInput(path + ": render must be 224x224");
  RenderedImage img;
  img.channels = {depth, depth, depth};
  img.view_id = view_id;
  img.validate();
  return img;
}

}  // namespace mmc

#endif  // MMC_IMAGE_HPP
