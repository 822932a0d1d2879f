#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <thread>
#include <vector>

#include "csvid/metrics.hpp"
#include "csvid/packing.hpp"
#include "csvid/sensing.hpp"

namespace csvid {

// ISTA settings. The step size defaults to 0.95 / L with L the largest
// squared singular value of Phi*Psi estimated by 20 power iterations.
struct ReconConfig {
  int iterations = 200;
  double lambda = 0.01;
  std::optional<double> step;         // overrides the power-iteration estimate
  std::optional<std::size_t> sparsity; // hard-threshold variant: keep top-K
  bool record_objective = false;
};

// Orthonormal 2D DCT-II over a B x B block, applied separably.
class Dct2 {
 public:
  explicit Dct2(std::size_t b) : b_(b), basis_(b * b) {
    require(b >= 1, errc::invalid_argument, "dct: block size must be >= 1");
    double norm0 = std::sqrt(1.0 / static_cast<double>(b));
    double norm = std::sqrt(2.0 / static_cast<double>(b));
    for (std::size_t u = 0; u < b; ++u)
      for (std::size_t i = 0; i < b; ++i)
        basis_[u * b + i] = (u == 0 ? norm0 : norm) *
                            std::cos(M_PI * (2.0 * static_cast<double>(i) + 1.0) *
                                     static_cast<double>(u) / (2.0 * static_cast<double>(b)));
  }

  std::size_t block_size() const { return b_; }

  // coefficients = D * block * D^T
  std::vector<double> forward(const std::vector<double>& block) const {
    return sandwich(block, false);
  }
  // block = D^T * coefficients * D
  std::vector<double> inverse(const std::vector<double>& coeffs) const {
    return sandwich(coeffs, true);
  }

  // Dense N x N synthesis operator Q with x = Q * theta for vectorized
  // blocks; lets ISTA fold the basis into a single matrix product.
  std::vector<double> synthesis_matrix() const {
    std::size_t n = b_ * b_;
    std::vector<double> q(n * n);
    for (std::size_t i = 0; i < b_; ++i)
      for (std::size_t j = 0; j < b_; ++j)
        for (std::size_t u = 0; u < b_; ++u)
          for (std::size_t v = 0; v < b_; ++v)
            q[(i * b_ + j) * n + (u * b_ + v)] = basis_[u * b_ + i] * basis_[v * b_ + j];
    return q;
  }

 private:
  std::vector<double> sandwich(const std::vector<double>& x, bool transpose) const {
    require(x.size() == b_ * b_, errc::invalid_argument, "dct: block size mismatch");
    auto d = [&](std::size_t r, std::size_t c) {
      return transpose ? basis_[c * b_ + r] : basis_[r * b_ + c];
    };
    std::vector<double> tmp(b_ * b_, 0.0), out(b_ * b_, 0.0);
    for (std::size_t r = 0; r < b_; ++r)
      for (std::size_t k = 0; k < b_; ++k) {
        double dv = d(r, k);
        for (std::size_t c = 0; c < b_; ++c) tmp[r * b_ + c] += dv * x[k * b_ + c];
      }
    for (std::size_t r = 0; r < b_; ++r)
      for (std::size_t c = 0; c < b_; ++c) {
        double acc = 0.0;
        for (std::size_t k = 0; k < b_; ++k) acc += tmp[r * b_ + k] * d(c, k);
        out[r * b_ + c] = acc;
      }
    return out;
  }

  std::size_t b_;
  std::vector<double> basis_;  // row u = u-th cosine basis vector
};

namespace detail {

// Measurement operator A = Phi * Q folded into one dense matrix.
struct IstaOperator {
  std::size_t rows, cols;
  std::vector<double> a;   // rows x cols
  double step;

  IstaOperator(const SensingMatrix& phi, const Dct2& dct, std::optional<double> step_override) {
    rows = phi.rows();
    cols = phi.cols();
    std::vector<double> q = dct.synthesis_matrix();
    a.assign(rows * cols, 0.0);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t k = 0; k < cols; ++k) {
        double p = phi.entries[i * cols + k];
        if (p == 0.0) continue;
        const double* qrow = q.data() + k * cols;
        double* arow = a.data() + i * cols;
        for (std::size_t j = 0; j < cols; ++j) arow[j] += p * qrow[j];
      }
    step = step_override ? *step_override : 0.95 / spectral_bound();
  }

  void apply(const std::vector<double>& theta, std::vector<double>& out) const {
    for (std::size_t i = 0; i < rows; ++i) {
      const double* arow = a.data() + i * cols;
      double acc = 0.0;
      for (std::size_t j = 0; j < cols; ++j) acc += arow[j] * theta[j];
      out[i] = acc;
    }
  }

  void apply_transpose(const std::vector<double>& r, std::vector<double>& out) const {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < rows; ++i) {
      double rv = r[i];
      if (rv == 0.0) continue;
      const double* arow = a.data() + i * cols;
      for (std::size_t j = 0; j < cols; ++j) out[j] += arow[j] * rv;
    }
  }

  // Largest eigenvalue of A^T A via 20 power iterations from a fixed seed.
  double spectral_bound() const {
    Rng rng(0x7077E51ull);
    std::vector<double> v(cols), av(rows), atav(cols);
    for (auto& x : v) x = rng.gaussian();
    double lambda = 1.0;
    for (int it = 0; it < 20; ++it) {
      apply(v, av);
      apply_transpose(av, atav);
      double norm = 0.0;
      for (double x : atav) norm += x * x;
      norm = std::sqrt(norm);
      if (norm == 0.0) return 1.0;
      double vnorm = 0.0;
      for (double x : v) vnorm += x * x;
      lambda = 0.0;
      for (std::size_t j = 0; j < cols; ++j) lambda += v[j] * atav[j];
      lambda /= vnorm;
      for (std::size_t j = 0; j < cols; ++j) v[j] = atav[j] / norm;
    }
    return lambda > 0.0 ? lambda : 1.0;
  }
};

}  // namespace detail

struct IstaResult {
  std::vector<double> block;      // B x B pixels, row-major
  std::vector<double> objective;  // per-iteration trace when requested
};

// Iterative soft-thresholding over DCT coefficients:
//   theta <- soft(theta + step * A^T (y - A theta), step * lambda)
// The composite objective 0.5*||y - A theta||^2 + lambda*||theta||_1 is
// checked to be non-increasing every iteration. Identity matrices are
// inverted directly (y already is the block). When cfg.sparsity is set the
// soft threshold is replaced by a keep-top-K hard projection, which trades
// the descent guarantee for exact sparsity, so the objective check is off.
inline IstaResult ista_reconstruct(const std::vector<double>& y, const SensingMatrix& phi,
                                   const ReconConfig& cfg, const Dct2* dct_opt = nullptr) {
  require(y.size() == phi.rows(), errc::invalid_argument, "ista: measurement length mismatch");
  require(cfg.iterations >= 1, errc::invalid_argument, "ista: iterations must be >= 1");
  require(cfg.lambda >= 0.0, errc::invalid_argument, "ista: lambda must be >= 0");
  std::uint16_t b = phi.config.block_size;
  require(b > 0, errc::invalid_argument, "ista: matrix is not block-shaped");

  IstaResult res;
  if (phi.is_identity()) {
    res.block = y;
    return res;
  }

  Dct2 local_dct(b);
  const Dct2& dct = dct_opt ? *dct_opt : local_dct;
  require(dct.block_size() == b, errc::invalid_argument, "ista: basis/block size mismatch");
  detail::IstaOperator op(phi, dct, cfg.step);
  require(op.step > 0.0, errc::invalid_argument, "ista: step must be positive");

  std::size_t n = op.cols;
  std::vector<double> theta(n, 0.0), residual(op.rows), grad(n), atv(op.rows);
  double tau = op.step * cfg.lambda;
  double prev_obj = std::numeric_limits<double>::infinity();

  for (int it = 0; it < cfg.iterations; ++it) {
    op.apply(theta, atv);
    for (std::size_t i = 0; i < op.rows; ++i) residual[i] = y[i] - atv[i];
    op.apply_transpose(residual, grad);
    for (std::size_t j = 0; j < n; ++j) {
      double z = theta[j] + op.step * grad[j];
      if (!cfg.sparsity) {
        theta[j] = z > tau ? z - tau : (z < -tau ? z + tau : 0.0);
      } else {
        theta[j] = z;
      }
    }
    if (cfg.sparsity) {
      // keep the K largest magnitudes
      std::vector<double> mag(n);
      for (std::size_t j = 0; j < n; ++j) mag[j] = std::fabs(theta[j]);
      std::vector<std::size_t> idx(n);
      for (std::size_t j = 0; j < n; ++j) idx[j] = j;
      std::size_t keep = std::min(*cfg.sparsity, n);
      std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(keep), idx.end(),
                       [&](std::size_t a2, std::size_t b2) { return mag[a2] > mag[b2]; });
      std::vector<double> pruned(n, 0.0);
      for (std::size_t j = 0; j < keep; ++j) pruned[idx[j]] = theta[idx[j]];
      theta = std::move(pruned);
    }

    op.apply(theta, atv);
    double fit = 0.0;
    for (std::size_t i = 0; i < op.rows; ++i) {
      double d = y[i] - atv[i];
      fit += d * d;
    }
    double l1 = 0.0;
    for (double t : theta) l1 += std::fabs(t);
    double obj = 0.5 * fit + cfg.lambda * l1;
    require(std::isfinite(obj), errc::numeric_failure, "ista: non-finite objective");
    if (!cfg.sparsity)
      require(obj <= prev_obj + 1e-9 * std::max(1.0, std::fabs(prev_obj)),
              errc::numeric_failure, "ista: objective increased");
    prev_obj = obj;
    if (cfg.record_objective) res.objective.push_back(obj);
  }

  // back to pixel space
  res.block = dct.inverse(theta);
  return res;
}

struct PrivacyGap {
  double psnr_true = 0.0;   // dB, +infinity marker on exact reconstruction
  double psnr_wrong = 0.0;  // dB
  double gap = 0.0;         // psnr_true - psnr_wrong
};

namespace detail {

// Reconstructs a packed clip blockwise with the given matrix; returns the
// [0,1]-scaled pixel tensor T x H x W x 3.
inline Tensor reconstruct_clip(const MeasurementTensor& mt, const SensingMatrix& phi,
                               const ReconConfig& cfg) {
  std::uint16_t B = mt.block_size;
  std::size_t T = mt.frames(), hb = mt.blocks_h(), wb = mt.blocks_w();
  std::size_t M = mt.measurements;
  require(phi.rows() == M && phi.config.block_size == B, errc::invalid_argument,
          "reconstruct: matrix geometry mismatch");
  Tensor out = Tensor::zeros({T, hb * B, wb * B, 3});
  Dct2 dct(B);

  struct Job {
    std::size_t t, i, j, c;
  };
  std::vector<Job> jobs;
  jobs.reserve(T * hb * wb * 3);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < hb; ++i)
      for (std::size_t j = 0; j < wb; ++j)
        for (std::size_t c = 0; c < 3; ++c) jobs.push_back({t, i, j, c});

  auto run = [&](std::size_t begin, std::size_t end) {
    std::vector<double> y(M);
    for (std::size_t k = begin; k < end; ++k) {
      const Job& jb = jobs[k];
      for (std::size_t m = 0; m < M; ++m) y[m] = mt.data(jb.t, jb.i, jb.j, jb.c * M + m);
      IstaResult r = ista_reconstruct(y, phi, cfg, &dct);
      for (std::size_t rr = 0; rr < B; ++rr)
        for (std::size_t cc = 0; cc < B; ++cc)
          out(jb.t, jb.i * B + rr, jb.j * B + cc, jb.c) = r.block[rr * B + cc];
    }
  };

  unsigned workers = std::thread::hardware_concurrency();
  if (const char* env = std::getenv("CSVID_THREADS")) {
    int v = std::atoi(env);
    if (v >= 1) workers = static_cast<unsigned>(v);
  }
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(jobs.size())));
  if (workers <= 1) {
    run(0, jobs.size());
  } else {
    std::vector<std::thread> threads;
    std::size_t chunk = (jobs.size() + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
      std::size_t begin = w * chunk;
      std::size_t end = std::min(jobs.size(), begin + chunk);
      if (begin >= end) break;
      threads.emplace_back(run, begin, end);
    }
    for (auto& th : threads) th.join();
  }
  return out;
}

inline Tensor clip_unit_tensor(const VideoClip& clip) {
  Tensor t = Tensor::zeros({clip.frames, clip.height, clip.width, 3});
  for (std::size_t i = 0; i < clip.data.size(); ++i)
    t.data[i] = clip.data[i] / 255.0;
  return t;
}

}  // namespace detail

// The two-arm privacy experiment: encode with the true key, reconstruct the
// whole clip once with the true matrix and once with a wrong-key matrix, and
// report both full-clip PSNRs (peak 1, [0,1] pixel domain) plus their gap.
inline PrivacyGap privacy_gap(const VideoClip& clip, const SensingMatrix& true_phi,
                              const SensingMatrix& wrong_phi, const ReconConfig& cfg) {
  require(true_phi.rows() == wrong_phi.rows() && true_phi.cols() == wrong_phi.cols(),
          errc::invalid_argument, "privacy_gap: matrices must share geometry");
  MeasurementTensor mt = pack_clip(clip, true_phi);
  Tensor reference = detail::clip_unit_tensor(clip);
  Tensor with_true = detail::reconstruct_clip(mt, true_phi, cfg);
  Tensor with_wrong = detail::reconstruct_clip(mt, wrong_phi, cfg);

  PrivacyGap g;
  g.psnr_true = psnr(reference, with_true, 1.0);
  g.psnr_wrong = psnr(reference, with_wrong, 1.0);
  // identical pipelines (including both-exact) give a zero gap, not inf-inf
  g.gap = g.psnr_true == g.psnr_wrong ? 0.0 : g.psnr_true - g.psnr_wrong;
  return g;
}

}  // namespace csvid
