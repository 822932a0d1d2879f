#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "csvid/io.hpp"
#include "csvid/rng.hpp"
#include "csvid/tensor.hpp"

namespace csvid {

// Measurement-matrix families. The seed plus the structural parameters fully
// determine the entries, so a config acts as the symmetric-cipher key.
enum class MatrixFamily : std::uint8_t {
  kGaussian = 0,
  kBernoulli = 1,
  kSMM = 2,
  kLSMM = 3,
  kConvCS = 4,
  kIdentity = 5,  // r = 1 reference matrix; exact inversion, no privacy
};

inline const char* family_name(MatrixFamily f) {
  switch (f) {
    case MatrixFamily::kGaussian: return "gaussian";
    case MatrixFamily::kBernoulli: return "bernoulli";
    case MatrixFamily::kSMM: return "smm";
    case MatrixFamily::kLSMM: return "lsmm";
    case MatrixFamily::kConvCS: return "convcs";
    case MatrixFamily::kIdentity: return "identity";
  }
  return "unknown";
}

inline MatrixFamily family_from_name(const std::string& s) {
  if (s == "gaussian") return MatrixFamily::kGaussian;
  if (s == "bernoulli") return MatrixFamily::kBernoulli;
  if (s == "smm") return MatrixFamily::kSMM;
  if (s == "lsmm") return MatrixFamily::kLSMM;
  if (s == "convcs") return MatrixFamily::kConvCS;
  if (s == "identity") return MatrixFamily::kIdentity;
  fail(errc::invalid_argument, "unknown matrix family: " + s);
}

struct SensingConfig {
  MatrixFamily family = MatrixFamily::kGaussian;
  std::uint16_t block_size = 0;  // B; 0 when cols is not a perfect square
  std::uint32_t rows = 0;        // M
  std::uint32_t cols = 0;        // N = B*B for block matrices
  std::uint64_t seed = 0;
  std::uint16_t sub_block = 0;   // s, SMM only
  std::uint16_t window = 0;      // w, LSMM only
  std::uint16_t kernel = 0;      // k, ConvCS only
  std::uint16_t stride = 0;      // t, ConvCS only

  double ratio() const { return static_cast<double>(cols) / static_cast<double>(rows); }
};

struct SensingMatrix {
  SensingConfig config;
  std::vector<double> entries;  // rows x cols, row-major

  std::uint32_t rows() const { return config.rows; }
  std::uint32_t cols() const { return config.cols; }
  double at(std::size_t i, std::size_t j) const { return entries[i * config.cols + j]; }
  double& at(std::size_t i, std::size_t j) { return entries[i * config.cols + j]; }

  bool is_identity() const {
    if (config.rows != config.cols) return false;
    for (std::uint32_t i = 0; i < config.rows; ++i)
      for (std::uint32_t j = 0; j < config.cols; ++j)
        if (at(i, j) != (i == j ? 1.0 : 0.0)) return false;
    return true;
  }
};

namespace detail {

inline std::uint16_t block_size_for(std::uint32_t n) {
  auto b = static_cast<std::uint32_t>(std::lround(std::sqrt(static_cast<double>(n))));
  return (b * b == n && b <= 0xFFFF) ? static_cast<std::uint16_t>(b) : 0;
}

inline void check_mn(std::uint32_t m, std::uint32_t n) {
  require(m >= 1, errc::invalid_argument, "sensing matrix needs at least one row");
  require(m <= n, errc::invalid_argument, "sensing matrix must not have more rows than columns");
}

}  // namespace detail

// Dense i.i.d. Gaussian matrix, entry variance 1/m (near-isometry scaling).
inline SensingMatrix build_gaussian(std::uint32_t m, std::uint32_t n, std::uint64_t seed) {
  detail::check_mn(m, n);
  SensingMatrix phi;
  phi.config = {MatrixFamily::kGaussian, detail::block_size_for(n), m, n, seed, 0, 0, 0, 0};
  phi.entries.resize(static_cast<std::size_t>(m) * n);
  Rng rng(seed);
  double scale = 1.0 / std::sqrt(static_cast<double>(m));
  for (auto& e : phi.entries) e = rng.gaussian() * scale;
  return phi;
}

// Dense Rademacher matrix, entries +-1/sqrt(m) with equal probability.
inline SensingMatrix build_bernoulli(std::uint32_t m, std::uint32_t n, std::uint64_t seed) {
  detail::check_mn(m, n);
  SensingMatrix phi;
  phi.config = {MatrixFamily::kBernoulli, detail::block_size_for(n), m, n, seed, 0, 0, 0, 0};
  phi.entries.resize(static_cast<std::size_t>(m) * n);
  Rng rng(seed);
  double a = 1.0 / std::sqrt(static_cast<double>(m));
  for (auto& e : phi.entries) e = (rng.next_u64() >> 63) ? a : -a;
  return phi;
}

// Structural measurement matrix: the B*B block is split into (B/s)^2 raster
// sub-blocks of s*s pixels and one shared small Gaussian matrix samples each
// sub-block independently, giving a block-diagonal layout with rows grouped
// by sub-block. Entry variance of the shared matrix follows the Gaussian
// family rule (1/rows) so measurement energy is comparable across families.
inline SensingMatrix build_smm(std::uint32_t m, std::uint16_t block_size, std::uint16_t s,
                               std::uint64_t seed) {
  std::uint32_t n = static_cast<std::uint32_t>(block_size) * block_size;
  detail::check_mn(m, n);
  require(s >= 1 && block_size % s == 0, errc::invalid_argument,
          "smm: sub-block size must divide block size");
  std::uint32_t grid = block_size / s;          // sub-blocks per side
  std::uint32_t cells = grid * grid;            // sub-block count
  require(m % cells == 0, errc::invalid_argument,
          "smm: measurement count must be divisible by the sub-block count");
  std::uint32_t ms = m / cells;                 // rows of the shared matrix
  std::uint32_t ns = static_cast<std::uint32_t>(s) * s;
  require(ms <= ns, errc::invalid_argument, "smm: sub-block oversampled");

  Rng rng(seed);
  std::vector<double> shared(static_cast<std::size_t>(ms) * ns);
  double scale = 1.0 / std::sqrt(static_cast<double>(ms));
  for (auto& e : shared) e = rng.gaussian() * scale;

  SensingMatrix phi;
  phi.config = {MatrixFamily::kSMM, block_size, m, n, seed, s, 0, 0, 0};
  phi.entries.assign(static_cast<std::size_t>(m) * n, 0.0);
  for (std::uint32_t q = 0; q < cells; ++q) {
    std::uint32_t bi = q / grid, bj = q % grid;
    for (std::uint32_t a = 0; a < ms; ++a) {
      std::size_t row = static_cast<std::size_t>(q) * ms + a;
      for (std::uint32_t b = 0; b < ns; ++b) {
        std::uint32_t r = bi * s + b / s;
        std::uint32_t c = bj * s + b % s;
        phi.entries[row * n + r * block_size + c] = shared[static_cast<std::size_t>(a) * ns + b];
      }
    }
  }
  return phi;
}

// Local structural measurement matrix: each row is supported on a contiguous
// sliding window of w coefficients, so the matrix is highly sparse and
// adjacent rows overlap whenever w exceeds the window stride.
inline SensingMatrix build_lsmm(std::uint32_t m, std::uint32_t n, std::uint16_t w,
                                std::uint64_t seed) {
  detail::check_mn(m, n);
  require(w >= 1, errc::invalid_argument, "lsmm: window must be nonzero");
  require(w <= n, errc::invalid_argument, "lsmm: window exceeds signal length");

  SensingMatrix phi;
  phi.config = {MatrixFamily::kLSMM, detail::block_size_for(n), m, n, seed, 0, w, 0, 0};
  phi.entries.assign(static_cast<std::size_t>(m) * n, 0.0);
  Rng rng(seed);
  double a = 1.0 / std::sqrt(static_cast<double>(w));
  double span = static_cast<double>(n - w);
  double denom = static_cast<double>(m > 1 ? m - 1 : 1);
  for (std::uint32_t i = 0; i < m; ++i) {
    auto start = static_cast<std::size_t>(std::llround(static_cast<double>(i) * span / denom));
    for (std::uint32_t j = 0; j < w; ++j)
      phi.entries[static_cast<std::size_t>(i) * n + start + j] = (rng.next_u64() >> 63) ? a : -a;
  }
  return phi;
}

// Convolutional CS matrix: valid-mode strided 2D convolution of the B*B block
// with random Gaussian kernels (variance 1/k^2), written out as an explicit
// M x N matrix. Row layout is kernel-major: row = g*P^2 + pi*P + pj, where P
// is the number of kernel positions per side.
inline SensingMatrix build_conv_cs(std::uint32_t m, std::uint16_t block_size, std::uint16_t k,
                                   std::uint16_t t, std::uint64_t seed) {
  std::uint32_t n = static_cast<std::uint32_t>(block_size) * block_size;
  detail::check_mn(m, n);
  require(k >= 1 && k <= block_size, errc::invalid_argument, "convcs: kernel must fit the block");
  require(t >= 1, errc::invalid_argument, "convcs: stride must be nonzero");
  require((block_size - k) % t == 0, errc::invalid_argument,
          "convcs: (B-k)/t must be integral");
  std::uint32_t positions = (block_size - k) / t + 1;
  std::uint32_t cells = positions * positions;
  require(m % cells == 0, errc::invalid_argument,
          "convcs: measurement count must be divisible by the position count");
  std::uint32_t kernels = m / cells;

  Rng rng(seed);
  std::vector<double> ker(static_cast<std::size_t>(kernels) * k * k);
  double scale = 1.0 / static_cast<double>(k);
  for (auto& e : ker) e = rng.gaussian() * scale;

  SensingMatrix phi;
  phi.config = {MatrixFamily::kConvCS, block_size, m, n, seed, 0, 0, k, t};
  phi.entries.assign(static_cast<std::size_t>(m) * n, 0.0);
  for (std::uint32_t g = 0; g < kernels; ++g)
    for (std::uint32_t pi = 0; pi < positions; ++pi)
      for (std::uint32_t pj = 0; pj < positions; ++pj) {
        std::size_t row = static_cast<std::size_t>(g) * cells + pi * positions + pj;
        for (std::uint32_t u = 0; u < k; ++u)
          for (std::uint32_t v = 0; v < k; ++v) {
            std::size_t col = (static_cast<std::size_t>(pi) * t + u) * block_size + pj * t + v;
            phi.entries[row * n + col] = ker[(static_cast<std::size_t>(g) * k + u) * k + v];
          }
      }
  return phi;
}

// Square identity matrix over a B*B block; the r = 1 "no compression" case.
inline SensingMatrix build_identity(std::uint16_t block_size, std::uint64_t seed = 0) {
  std::uint32_t n = static_cast<std::uint32_t>(block_size) * block_size;
  SensingMatrix phi;
  phi.config = {MatrixFamily::kIdentity, block_size, n, n, seed, 0, 0, 0, 0};
  phi.entries.assign(static_cast<std::size_t>(n) * n, 0.0);
  for (std::uint32_t i = 0; i < n; ++i) phi.entries[static_cast<std::size_t>(i) * n + i] = 1.0;
  return phi;
}

// Rebuilds a matrix from its config; the cipher-key property is that this
// reproduces the stored entries exactly.
inline SensingMatrix build_from_config(const SensingConfig& cfg) {
  switch (cfg.family) {
    case MatrixFamily::kGaussian: return build_gaussian(cfg.rows, cfg.cols, cfg.seed);
    case MatrixFamily::kBernoulli: return build_bernoulli(cfg.rows, cfg.cols, cfg.seed);
    case MatrixFamily::kSMM: return build_smm(cfg.rows, cfg.block_size, cfg.sub_block, cfg.seed);
    case MatrixFamily::kLSMM: return build_lsmm(cfg.rows, cfg.cols, cfg.window, cfg.seed);
    case MatrixFamily::kConvCS:
      return build_conv_cs(cfg.rows, cfg.block_size, cfg.kernel, cfg.stride, cfg.seed);
    case MatrixFamily::kIdentity: return build_identity(cfg.block_size, cfg.seed);
  }
  fail(errc::bad_format, "unknown matrix family tag");
}

// y = Phi * x over one rasterized block.
inline std::vector<double> encode_block(const SensingMatrix& phi, const std::vector<double>& x) {
  require(x.size() == phi.cols(), errc::invalid_argument, "encode_block: dimension mismatch");
  std::vector<double> y(phi.rows(), 0.0);
  const double* e = phi.entries.data();
  for (std::uint32_t i = 0; i < phi.rows(); ++i) {
    const double* row = e + static_cast<std::size_t>(i) * phi.cols();
    double acc = 0.0;
    for (std::uint32_t j = 0; j < phi.cols(); ++j) acc += row[j] * x[j];
    y[i] = acc;
  }
  return y;
}

// Encodes every B*B block of a single-channel frame independently.
// frame is H x W row-major; output is Hb x Wb x M with the measurement
// index fastest. Blocks are rasterized row-major.
inline Tensor encode_frame(const SensingMatrix& phi, const Tensor& frame) {
  require(frame.rank() == 2, errc::invalid_argument, "encode_frame: frame must be rank 2");
  std::uint16_t B = phi.config.block_size;
  require(B > 0, errc::invalid_argument, "encode_frame: matrix is not block-shaped");
  std::size_t H = frame.shape[0], W = frame.shape[1];
  require(H % B == 0 && W % B == 0, errc::invalid_argument,
          "encode_frame: frame extents must be divisible by the block size");
  std::size_t hb = H / B, wb = W / B, M = phi.rows();

  Tensor out = Tensor::zeros({hb, wb, M});
  std::vector<double> block(static_cast<std::size_t>(B) * B);
  for (std::size_t bi = 0; bi < hb; ++bi)
    for (std::size_t bj = 0; bj < wb; ++bj) {
      for (std::size_t r = 0; r < B; ++r)
        for (std::size_t c = 0; c < B; ++c)
          block[r * B + c] = frame(bi * B + r, bj * B + c);
      std::vector<double> y = encode_block(phi, block);
      for (std::size_t mI = 0; mI < M; ++mI) out(bi, bj, mI) = y[mI];
    }
  return out;
}

// --- CSM1 matrix file format -------------------------------------------
// magic "CSM1" | family u8 | B u16 | M u32 | N u32 | seed u64 |
// s u16 | w u16 | k u16 | t u16 | M*N f64 row-major | CRC32

inline void save_matrix(const SensingMatrix& phi, const std::filesystem::path& path) {
  ByteWriter w;
  w.magic("CSM1");
  w.u8(static_cast<std::uint8_t>(phi.config.family));
  w.u16(phi.config.block_size);
  w.u32(phi.config.rows);
  w.u32(phi.config.cols);
  w.u64(phi.config.seed);
  w.u16(phi.config.sub_block);
  w.u16(phi.config.window);
  w.u16(phi.config.kernel);
  w.u16(phi.config.stride);
  for (double e : phi.entries) w.f64(e);
  w.append_crc();
  w.save(path);
}

inline SensingMatrix load_matrix(const std::filesystem::path& path) {
  ByteReader r = ByteReader::from_file(path);
  r.check_crc_trailer();
  r.expect_magic("CSM1");
  SensingMatrix phi;
  std::uint8_t fam = r.u8();
  require(fam <= static_cast<std::uint8_t>(MatrixFamily::kIdentity), errc::bad_format,
          path.string() + ": unknown family tag");
  phi.config.family = static_cast<MatrixFamily>(fam);
  phi.config.block_size = r.u16();
  phi.config.rows = r.u32();
  phi.config.cols = r.u32();
  phi.config.seed = r.u64();
  phi.config.sub_block = r.u16();
  phi.config.window = r.u16();
  phi.config.kernel = r.u16();
  phi.config.stride = r.u16();
  std::size_t n = static_cast<std::size_t>(phi.config.rows) * phi.config.cols;
  require(r.remaining() == n * 8 + 4, errc::bad_format, path.string() + ": size mismatch");
  phi.entries.resize(n);
  for (auto& e : phi.entries) e = r.f64();
  return phi;
}

}  // namespace csvid
