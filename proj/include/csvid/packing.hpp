#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "csvid/io.hpp"
#include "csvid/sensing.hpp"
#include "csvid/tensor.hpp"

namespace csvid {

// T x H x W x 3 stack of 8-bit RGB frames; the plaintext signal.
struct VideoClip {
  std::size_t frames = 0, height = 0, width = 0;
  std::vector<std::uint8_t> data;  // (t, y, x, c) row-major, c fastest
  std::optional<double> fps;

  static VideoClip create(std::size_t t, std::size_t h, std::size_t w) {
    VideoClip c;
    c.frames = t;
    c.height = h;
    c.width = w;
    c.data.assign(t * h * w * 3, 0);
    return c;
  }

  std::uint8_t& at(std::size_t t, std::size_t y, std::size_t x, std::size_t c) {
    return data[((t * height + y) * width + x) * 3 + c];
  }
  std::uint8_t at(std::size_t t, std::size_t y, std::size_t x, std::size_t c) const {
    return data[((t * height + y) * width + x) * 3 + c];
  }
};

// T x Hb x Wb x 3M packed measurements; the compressed-domain network input.
struct MeasurementTensor {
  Tensor data;                    // rank 4, (t, i, j, channel)
  std::uint16_t block_size = 0;   // B
  std::uint32_t measurements = 0; // M per block per color

  std::size_t frames() const { return data.shape[0]; }
  std::size_t blocks_h() const { return data.shape[1]; }
  std::size_t blocks_w() const { return data.shape[2]; }
  std::size_t channels() const { return data.shape[3]; }
};

// Edge-replicate padding of one H x W x 3 frame up to the next multiples of
// the block size. A no-op for already divisible extents, hence idempotent.
inline VideoClip pad_clip(const VideoClip& clip, std::uint16_t block_size) {
  auto up = [&](std::size_t v) {
    return (v + block_size - 1) / block_size * block_size;
  };
  std::size_t H = up(clip.height), W = up(clip.width);
  if (H == clip.height && W == clip.width) return clip;
  VideoClip out = VideoClip::create(clip.frames, H, W);
  out.fps = clip.fps;
  for (std::size_t t = 0; t < clip.frames; ++t)
    for (std::size_t y = 0; y < H; ++y) {
      std::size_t sy = y < clip.height ? y : clip.height - 1;
      for (std::size_t x = 0; x < W; ++x) {
        std::size_t sx = x < clip.width ? x : clip.width - 1;
        for (std::size_t c = 0; c < 3; ++c) out.at(t, y, x, c) = clip.at(t, sy, sx, c);
      }
    }
  return out;
}

inline VideoClip pad_frame(const VideoClip& frame, std::uint16_t block_size) {
  return pad_clip(frame, block_size);
}

// Encodes every block of every color channel of every frame and stacks the
// measurement vectors along the channel axis, color-major: channel index
// c*M + m for color c and measurement m. One shared matrix serves all three
// colors. Pixels are scaled to [0,1] before encoding.
inline MeasurementTensor pack_clip(const VideoClip& clip, const SensingMatrix& phi) {
  std::uint16_t B = phi.config.block_size;
  require(B > 0, errc::invalid_argument, "pack_clip: matrix is not block-shaped");
  require(clip.height % B == 0 && clip.width % B == 0, errc::invalid_argument,
          "pack_clip: clip extents must be divisible by the block size (pad first)");
  std::size_t T = clip.frames, hb = clip.height / B, wb = clip.width / B;
  std::size_t M = phi.rows();

  MeasurementTensor mt;
  mt.block_size = B;
  mt.measurements = static_cast<std::uint32_t>(M);
  mt.data = Tensor::zeros({T, hb, wb, 3 * M});

  Tensor plane = Tensor::zeros({clip.height, clip.width});
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t y = 0; y < clip.height; ++y)
        for (std::size_t x = 0; x < clip.width; ++x)
          plane(y, x) = clip.at(t, y, x, c) / 255.0;
      Tensor enc = encode_frame(phi, plane);
      for (std::size_t i = 0; i < hb; ++i)
        for (std::size_t j = 0; j < wb; ++j)
          for (std::size_t m = 0; m < M; ++m) mt.data(t, i, j, c * M + m) = enc(i, j, m);
    }
  return mt;
}

// Exact inverse of pack_clip, defined only for the identity matrix at r = 1.
// For any other matrix the measurements cannot be rearranged back into the
// frame without running a reconstruction solver, so this refuses.
inline VideoClip unpack_clip(const MeasurementTensor& mt, const SensingMatrix& phi) {
  require(phi.rows() == phi.cols() && phi.is_identity(), errc::invalid_argument,
          "unpack_clip: only the identity matrix is invertible by rearrangement");
  std::uint16_t B = mt.block_size;
  require(phi.config.block_size == B && mt.channels() == 3u * phi.rows(),
          errc::invalid_argument, "unpack_clip: geometry mismatch");
  std::size_t M = phi.rows();
  VideoClip clip = VideoClip::create(mt.frames(), mt.blocks_h() * B, mt.blocks_w() * B);
  for (std::size_t t = 0; t < mt.frames(); ++t)
    for (std::size_t i = 0; i < mt.blocks_h(); ++i)
      for (std::size_t j = 0; j < mt.blocks_w(); ++j)
        for (std::size_t c = 0; c < 3; ++c)
          for (std::size_t m = 0; m < M; ++m) {
            double v = mt.data(t, i, j, c * M + m) * 255.0;
            long px = std::lround(v);
            if (px < 0) px = 0;
            if (px > 255) px = 255;
            clip.at(t, i * B + m / B, j * B + m % B, c) = static_cast<std::uint8_t>(px);
          }
  return clip;
}

// --- VID1 raw clip file --------------------------------------------------
// magic "VID1" | T u32 | H u32 | W u32 | T*H*W*3 u8 interleaved RGB

inline void save_clip(const VideoClip& clip, const std::filesystem::path& path) {
  ByteWriter w;
  w.magic("VID1");
  w.u32(static_cast<std::uint32_t>(clip.frames));
  w.u32(static_cast<std::uint32_t>(clip.height));
  w.u32(static_cast<std::uint32_t>(clip.width));
  w.bytes(clip.data.data(), clip.data.size());
  w.save(path);
}

inline VideoClip load_clip(const std::filesystem::path& path) {
  ByteReader r = ByteReader::from_file(path);
  r.expect_magic("VID1");
  VideoClip clip;
  clip.frames = r.u32();
  clip.height = r.u32();
  clip.width = r.u32();
  std::size_t n = clip.frames * clip.height * clip.width * 3;
  require(n > 0, errc::bad_format, path.string() + ": empty clip");
  require(r.remaining() == n, errc::bad_format, path.string() + ": size mismatch");
  clip.data.resize(n);
  r.raw(clip.data.data(), n);
  return clip;
}

// --- MST1 measurement tensor file ----------------------------------------
// magic "MST1" | T u32 | Hb u32 | Wb u32 | C u32 | B u16 | M u32 |
// f32 values (t, i, j, c) row-major | CRC32

inline void save_measurements(const MeasurementTensor& mt, const std::filesystem::path& path) {
  ByteWriter w;
  w.magic("MST1");
  w.u32(static_cast<std::uint32_t>(mt.frames()));
  w.u32(static_cast<std::uint32_t>(mt.blocks_h()));
  w.u32(static_cast<std::uint32_t>(mt.blocks_w()));
  w.u32(static_cast<std::uint32_t>(mt.channels()));
  w.u16(mt.block_size);
  w.u32(mt.measurements);
  for (double v : mt.data.data) w.f32(static_cast<float>(v));
  w.append_crc();
  w.save(path);
}

inline MeasurementTensor load_measurements(const std::filesystem::path& path) {
  ByteReader r = ByteReader::from_file(path);
  r.check_crc_trailer();
  r.expect_magic("MST1");
  std::size_t T = r.u32(), hb = r.u32(), wb = r.u32(), C = r.u32();
  MeasurementTensor mt;
  mt.block_size = r.u16();
  mt.measurements = r.u32();
  require(T >= 1 && hb >= 1 && wb >= 1 && C >= 1, errc::bad_format,
          path.string() + ": degenerate tensor");
  require(C == 3u * mt.measurements, errc::bad_format,
          path.string() + ": channel count is not 3M");
  std::size_t n = T * hb * wb * C;
  require(r.remaining() == n * 4 + 4, errc::bad_format, path.string() + ": size mismatch");
  mt.data = Tensor::zeros({T, hb, wb, C});
  for (auto& v : mt.data.data) v = static_cast<double>(r.f32());
  return mt;
}

}  // namespace csvid
