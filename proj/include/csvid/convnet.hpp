#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "csvid/rng.hpp"
#include "csvid/tensor.hpp"

namespace csvid {

// ---------------------------------------------------------------------------
// Architecture description
// ---------------------------------------------------------------------------

// Channel table of one inflated Inception submodule. Branches:
//   a : 1x1x1 conv
//   b : 1x1x1 conv (b1) then 3x3x3 same-pad conv (b2)
//   c : 1x1x1 conv (c1) then 3x3x3 same-pad conv (c2)
//   d : 3x3x3 same-pad maxpool then 1x1x1 conv
// Output channels = a + b2 + c2 + d.
struct InceptionSpec {
  std::size_t a, b1, b2, c1, c2, d;
  std::size_t out_channels() const { return a + b2 + c2 + d; }
};

struct NetworkConfig {
  std::array<std::size_t, 4> input{};  // T, H, W, C
  std::size_t stem_channels = 16;
  std::array<InceptionSpec, 4> inception{{{8, 8, 16, 4, 8, 8},
                                          {16, 16, 32, 8, 16, 16},
                                          {16, 16, 32, 8, 16, 16},
                                          {32, 32, 64, 16, 32, 32}}};
  bool pool_after_stem = true;
  bool pool_after_inc2 = true;
  std::size_t classes = 10;

  void validate() const {
    require(classes >= 2, errc::invalid_argument, "network needs at least two classes");
    require(stem_channels >= 1, errc::invalid_argument, "stem channels must be >= 1");
    for (const auto& s : inception)
      require(s.a >= 1 && s.b1 >= 1 && s.b2 >= 1 && s.c1 >= 1 && s.c2 >= 1 && s.d >= 1,
              errc::invalid_argument, "inception channel counts must be >= 1");
    for (std::size_t e : input)
      require(e >= 1, errc::invalid_argument, "input extents must be >= 1");
  }

  std::size_t feature_channels() const { return inception[3].out_channels(); }
};

// Named parameter tensors in a fixed traversal order; gradients, Adam moments
// and checkpoints all share this ordering.
struct ModelParams {
  NetworkConfig config;
  std::uint64_t init_seed = 0;
  std::vector<std::string> names;
  std::vector<Tensor> tensors;

  std::size_t index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return i;
    fail(errc::invalid_argument, "unknown parameter: " + name);
  }
};

inline ModelParams init_params(const NetworkConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ModelParams p;
  p.config = cfg;
  p.init_seed = seed;
  Rng rng(seed);

  // He-style weights; biases start at a small positive constant so no unit
  // sits exactly on the ReLU kink at initialization.
  auto add_conv = [&](const std::string& name, std::size_t kt, std::size_t kh, std::size_t kw,
                      std::size_t cin, std::size_t cout) {
    Tensor w = Tensor::zeros({kt, kh, kw, cin, cout});
    double stddev = std::sqrt(2.0 / static_cast<double>(kt * kh * kw * cin));
    for (auto& v : w.data) v = rng.gaussian() * stddev;
    p.names.push_back(name + ".w");
    p.tensors.push_back(std::move(w));
    Tensor b = Tensor::zeros({cout});
    for (auto& v : b.data) v = 0.01;
    p.names.push_back(name + ".b");
    p.tensors.push_back(std::move(b));
  };

  std::size_t c = cfg.input[3];
  add_conv("stem", 3, 3, 3, c, cfg.stem_channels);
  c = cfg.stem_channels;
  for (int q = 0; q < 4; ++q) {
    const InceptionSpec& s = cfg.inception[q];
    std::string base = "inc" + std::to_string(q + 1);
    add_conv(base + ".a", 1, 1, 1, c, s.a);
    add_conv(base + ".b1", 1, 1, 1, c, s.b1);
    add_conv(base + ".b2", 3, 3, 3, s.b1, s.b2);
    add_conv(base + ".c1", 1, 1, 1, c, s.c1);
    add_conv(base + ".c2", 3, 3, 3, s.c1, s.c2);
    add_conv(base + ".d", 1, 1, 1, c, s.d);
    c = s.out_channels();
  }

  std::size_t f = cfg.feature_channels();
  Tensor hw = Tensor::zeros({f, cfg.classes});
  double stddev = std::sqrt(2.0 / static_cast<double>(f));
  for (auto& v : hw.data) v = rng.gaussian() * stddev;
  p.names.push_back("head.w");
  p.tensors.push_back(std::move(hw));
  p.names.push_back("head.b");
  p.tensors.push_back(Tensor::zeros({cfg.classes}));
  return p;
}

// ---------------------------------------------------------------------------
// Layer primitives (NTHWC activations, kT/kH/kW/Cin/Cout kernels)
// ---------------------------------------------------------------------------

using Dim3 = std::array<std::size_t, 3>;

inline std::size_t conv_extent(std::size_t in, std::size_t k, std::size_t pad, std::size_t stride) {
  require(in + 2 * pad >= k, errc::invalid_argument, "kernel larger than padded input");
  return (in + 2 * pad - k) / stride + 1;
}

// Cross-correlation plus bias.
inline Tensor conv3d_forward(const Tensor& x, const Tensor& w, const Tensor& b,
                             Dim3 stride = {1, 1, 1}, Dim3 pad = {0, 0, 0}) {
  require(x.rank() == 5 && w.rank() == 5 && b.rank() == 1, errc::invalid_argument,
          "conv3d: rank mismatch");
  require(x.shape[4] == w.shape[3] && w.shape[4] == b.shape[0], errc::invalid_argument,
          "conv3d: channel mismatch");
  std::size_t N = x.shape[0], T = x.shape[1], H = x.shape[2], W = x.shape[3], CI = x.shape[4];
  std::size_t KT = w.shape[0], KH = w.shape[1], KW = w.shape[2], CO = w.shape[4];
  std::size_t TO = conv_extent(T, KT, pad[0], stride[0]);
  std::size_t HO = conv_extent(H, KH, pad[1], stride[1]);
  std::size_t WO = conv_extent(W, KW, pad[2], stride[2]);

  Tensor out = Tensor::zeros({N, TO, HO, WO, CO});
  const double* xd = x.data.data();
  const double* wd = w.data.data();
  double* od = out.data.data();
  std::vector<double> acc(CO);

  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t to = 0; to < TO; ++to)
      for (std::size_t ho = 0; ho < HO; ++ho)
        for (std::size_t wo = 0; wo < WO; ++wo) {
          for (std::size_t co = 0; co < CO; ++co) acc[co] = b.data[co];
          for (std::size_t dt = 0; dt < KT; ++dt) {
            std::ptrdiff_t ti = static_cast<std::ptrdiff_t>(to * stride[0] + dt) -
                                static_cast<std::ptrdiff_t>(pad[0]);
            if (ti < 0 || ti >= static_cast<std::ptrdiff_t>(T)) continue;
            for (std::size_t dh = 0; dh < KH; ++dh) {
              std::ptrdiff_t hi = static_cast<std::ptrdiff_t>(ho * stride[1] + dh) -
                                  static_cast<std::ptrdiff_t>(pad[1]);
              if (hi < 0 || hi >= static_cast<std::ptrdiff_t>(H)) continue;
              for (std::size_t dw = 0; dw < KW; ++dw) {
                std::ptrdiff_t wi = static_cast<std::ptrdiff_t>(wo * stride[2] + dw) -
                                    static_cast<std::ptrdiff_t>(pad[2]);
                if (wi < 0 || wi >= static_cast<std::ptrdiff_t>(W)) continue;
                const double* xp = xd + (((n * T + ti) * H + hi) * W + wi) * CI;
                const double* wp = wd + ((dt * KH + dh) * KW + dw) * CI * CO;
                for (std::size_t ci = 0; ci < CI; ++ci) {
                  double xv = xp[ci];
                  const double* wrow = wp + ci * CO;
                  for (std::size_t co = 0; co < CO; ++co) acc[co] += xv * wrow[co];
                }
              }
            }
          }
          double* op = od + (((n * TO + to) * HO + ho) * WO + wo) * CO;
          for (std::size_t co = 0; co < CO; ++co) op[co] = acc[co];
        }
  return out;
}

struct Conv3dGrads {
  Tensor dx, dw, db;
};

inline Conv3dGrads conv3d_backward(const Tensor& x, const Tensor& w, const Tensor& dout,
                                   Dim3 stride = {1, 1, 1}, Dim3 pad = {0, 0, 0}) {
  std::size_t N = x.shape[0], T = x.shape[1], H = x.shape[2], W = x.shape[3], CI = x.shape[4];
  std::size_t KT = w.shape[0], KH = w.shape[1], KW = w.shape[2], CO = w.shape[4];
  std::size_t TO = dout.shape[1], HO = dout.shape[2], WO = dout.shape[3];

  Conv3dGrads g{Tensor::zeros(x.shape), Tensor::zeros(w.shape), Tensor::zeros({CO})};
  const double* xd = x.data.data();
  const double* wd = w.data.data();
  const double* gd = dout.data.data();

  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t to = 0; to < TO; ++to)
      for (std::size_t ho = 0; ho < HO; ++ho)
        for (std::size_t wo = 0; wo < WO; ++wo) {
          const double* gp = gd + (((n * TO + to) * HO + ho) * WO + wo) * CO;
          for (std::size_t co = 0; co < CO; ++co) g.db.data[co] += gp[co];
          for (std::size_t dt = 0; dt < KT; ++dt) {
            std::ptrdiff_t ti = static_cast<std::ptrdiff_t>(to * stride[0] + dt) -
                                static_cast<std::ptrdiff_t>(pad[0]);
            if (ti < 0 || ti >= static_cast<std::ptrdiff_t>(T)) continue;
            for (std::size_t dh = 0; dh < KH; ++dh) {
              std::ptrdiff_t hi = static_cast<std::ptrdiff_t>(ho * stride[1] + dh) -
                                  static_cast<std::ptrdiff_t>(pad[1]);
              if (hi < 0 || hi >= static_cast<std::ptrdiff_t>(H)) continue;
              for (std::size_t dw = 0; dw < KW; ++dw) {
                std::ptrdiff_t wi = static_cast<std::ptrdiff_t>(wo * stride[2] + dw) -
                                    static_cast<std::ptrdiff_t>(pad[2]);
                if (wi < 0 || wi >= static_cast<std::ptrdiff_t>(W)) continue;
                std::size_t xoff = (((n * T + ti) * H + hi) * W + wi) * CI;
                std::size_t woff = ((dt * KH + dh) * KW + dw) * CI * CO;
                const double* xp = xd + xoff;
                double* dxp = g.dx.data.data() + xoff;
                for (std::size_t ci = 0; ci < CI; ++ci) {
                  const double* wrow = wd + woff + ci * CO;
                  double* dwrow = g.dw.data.data() + woff + ci * CO;
                  double xv = xp[ci];
                  double acc = 0.0;
                  for (std::size_t co = 0; co < CO; ++co) {
                    double gv = gp[co];
                    acc += wrow[co] * gv;
                    dwrow[co] += xv * gv;
                  }
                  dxp[ci] += acc;
                }
              }
            }
          }
        }
  return g;
}

inline void relu_inplace(Tensor& x) {
  for (auto& v : x.data) v = v > 0.0 ? v : 0.0;
}

// dx = dout masked by the post-activation output (out > 0 iff pre > 0).
inline void relu_backward_inplace(const Tensor& out, Tensor& dout) {
  for (std::size_t i = 0; i < out.size(); ++i)
    if (out.data[i] <= 0.0) dout.data[i] = 0.0;
}

struct MaxPoolResult {
  Tensor out;
  std::vector<std::size_t> argmax;  // linear index into the input, per output element
};

// Windowed channel-wise maximum. Valid mode when pad is zero; with pad the
// window is clipped at the borders (used as the 3x3x3 same-pad branch).
inline MaxPoolResult maxpool3d_forward(const Tensor& x, Dim3 window, Dim3 stride, Dim3 pad) {
  require(x.rank() == 5, errc::invalid_argument, "maxpool3d: rank mismatch");
  std::size_t N = x.shape[0], T = x.shape[1], H = x.shape[2], W = x.shape[3], C = x.shape[4];
  std::size_t TO = conv_extent(T, window[0], pad[0], stride[0]);
  std::size_t HO = conv_extent(H, window[1], pad[1], stride[1]);
  std::size_t WO = conv_extent(W, window[2], pad[2], stride[2]);

  MaxPoolResult r{Tensor::zeros({N, TO, HO, WO, C}), {}};
  r.argmax.assign(r.out.size(), 0);
  const double* xd = x.data.data();

  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t to = 0; to < TO; ++to)
      for (std::size_t ho = 0; ho < HO; ++ho)
        for (std::size_t wo = 0; wo < WO; ++wo)
          for (std::size_t c = 0; c < C; ++c) {
            double best = -std::numeric_limits<double>::infinity();
            std::size_t best_idx = 0;
            for (std::size_t dt = 0; dt < window[0]; ++dt) {
              std::ptrdiff_t ti = static_cast<std::ptrdiff_t>(to * stride[0] + dt) -
                                  static_cast<std::ptrdiff_t>(pad[0]);
              if (ti < 0 || ti >= static_cast<std::ptrdiff_t>(T)) continue;
              for (std::size_t dh = 0; dh < window[1]; ++dh) {
                std::ptrdiff_t hi = static_cast<std::ptrdiff_t>(ho * stride[1] + dh) -
                                    static_cast<std::ptrdiff_t>(pad[1]);
                if (hi < 0 || hi >= static_cast<std::ptrdiff_t>(H)) continue;
                for (std::size_t dw = 0; dw < window[2]; ++dw) {
                  std::ptrdiff_t wi = static_cast<std::ptrdiff_t>(wo * stride[2] + dw) -
                                      static_cast<std::ptrdiff_t>(pad[2]);
                  if (wi < 0 || wi >= static_cast<std::ptrdiff_t>(W)) continue;
                  std::size_t idx = (((n * T + ti) * H + hi) * W + wi) * C + c;
                  if (xd[idx] > best) {
                    best = xd[idx];
                    best_idx = idx;
                  }
                }
              }
            }
            std::size_t o = (((n * TO + to) * HO + ho) * WO + wo) * C + c;
            r.out.data[o] = best;
            r.argmax[o] = best_idx;
          }
  return r;
}

// Gradient routes only to the argmax positions.
inline Tensor maxpool3d_backward(const MaxPoolResult& fwd, const Tensor& dout,
                                 const std::vector<std::size_t>& x_shape) {
  Tensor dx = Tensor::zeros(x_shape);
  for (std::size_t o = 0; o < dout.size(); ++o) dx.data[fwd.argmax[o]] += dout.data[o];
  return dx;
}

// ---------------------------------------------------------------------------
// Inception submodule
// ---------------------------------------------------------------------------

struct IncParamRefs {
  const Tensor *aw, *ab, *b1w, *b1b, *b2w, *b2b, *c1w, *c1b, *c2w, *c2b, *dw, *db;
};

inline IncParamRefs inc_refs(const ModelParams& p, int q) {
  std::size_t base = 2 + static_cast<std::size_t>(q) * 12;  // after stem.w/stem.b
  const auto& t = p.tensors;
  return {&t[base], &t[base + 1], &t[base + 2], &t[base + 3], &t[base + 4], &t[base + 5],
          &t[base + 6], &t[base + 7], &t[base + 8], &t[base + 9], &t[base + 10], &t[base + 11]};
}

struct IncCache {
  Tensor a_out, b_hid, b_out, c_hid, c_out, d_out;
  MaxPoolResult d_pool;
};

inline void concat_channels(const Tensor& a, const Tensor& b, const Tensor& c, const Tensor& d,
                            Tensor& out) {
  std::size_t spatial = a.size() / a.shape[4];
  std::size_t ca = a.shape[4], cb = b.shape[4], cc = c.shape[4], cd = d.shape[4];
  std::size_t co = ca + cb + cc + cd;
  for (std::size_t s = 0; s < spatial; ++s) {
    double* o = out.data.data() + s * co;
    std::copy_n(a.data.data() + s * ca, ca, o);
    std::copy_n(b.data.data() + s * cb, cb, o + ca);
    std::copy_n(c.data.data() + s * cc, cc, o + ca + cb);
    std::copy_n(d.data.data() + s * cd, cd, o + ca + cb + cc);
  }
}

inline Tensor inception3d_forward(const Tensor& x, const IncParamRefs& pr, IncCache* cache) {
  IncCache local;
  IncCache& c = cache ? *cache : local;

  c.a_out = conv3d_forward(x, *pr.aw, *pr.ab);
  relu_inplace(c.a_out);
  c.b_hid = conv3d_forward(x, *pr.b1w, *pr.b1b);
  relu_inplace(c.b_hid);
  c.b_out = conv3d_forward(c.b_hid, *pr.b2w, *pr.b2b, {1, 1, 1}, {1, 1, 1});
  relu_inplace(c.b_out);
  c.c_hid = conv3d_forward(x, *pr.c1w, *pr.c1b);
  relu_inplace(c.c_hid);
  c.c_out = conv3d_forward(c.c_hid, *pr.c2w, *pr.c2b, {1, 1, 1}, {1, 1, 1});
  relu_inplace(c.c_out);
  c.d_pool = maxpool3d_forward(x, {3, 3, 3}, {1, 1, 1}, {1, 1, 1});
  c.d_out = conv3d_forward(c.d_pool.out, *pr.dw, *pr.db);
  relu_inplace(c.d_out);

  std::size_t co = c.a_out.shape[4] + c.b_out.shape[4] + c.c_out.shape[4] + c.d_out.shape[4];
  Tensor out = Tensor::zeros({x.shape[0], x.shape[1], x.shape[2], x.shape[3], co});
  concat_channels(c.a_out, c.b_out, c.c_out, c.d_out, out);
  return out;
}

struct IncGradRefs {
  Tensor *aw, *ab, *b1w, *b1b, *b2w, *b2b, *c1w, *c1b, *c2w, *c2b, *dw, *db;
};

inline Tensor inception3d_backward(const Tensor& x, const IncParamRefs& pr, const IncCache& c,
                                   const Tensor& dout, const IncGradRefs& gr) {
  std::size_t spatial = x.size() / x.shape[4];
  std::size_t ca = c.a_out.shape[4], cb = c.b_out.shape[4], cc = c.c_out.shape[4],
              cd = c.d_out.shape[4];

  auto slice = [&](std::size_t offset, std::size_t width, const std::vector<std::size_t>& shape) {
    Tensor g = Tensor::zeros(shape);
    std::size_t co = dout.shape[4];
    for (std::size_t s = 0; s < spatial; ++s)
      std::copy_n(dout.data.data() + s * co + offset, width, g.data.data() + s * width);
    return g;
  };

  Tensor da = slice(0, ca, c.a_out.shape);
  Tensor db_ = slice(ca, cb, c.b_out.shape);
  Tensor dc = slice(ca + cb, cc, c.c_out.shape);
  Tensor dd = slice(ca + cb + cc, cd, c.d_out.shape);

  Tensor dx = Tensor::zeros(x.shape);
  auto accumulate = [&](const Tensor& src) {
    for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] += src.data[i];
  };

  // branch a
  relu_backward_inplace(c.a_out, da);
  {
    Conv3dGrads g = conv3d_backward(x, *pr.aw, da);
    *gr.aw = std::move(g.dw);
    *gr.ab = std::move(g.db);
    accumulate(g.dx);
  }
  // branch b
  relu_backward_inplace(c.b_out, db_);
  {
    Conv3dGrads g2 = conv3d_backward(c.b_hid, *pr.b2w, db_, {1, 1, 1}, {1, 1, 1});
    *gr.b2w = std::move(g2.dw);
    *gr.b2b = std::move(g2.db);
    relu_backward_inplace(c.b_hid, g2.dx);
    Conv3dGrads g1 = conv3d_backward(x, *pr.b1w, g2.dx);
    *gr.b1w = std::move(g1.dw);
    *gr.b1b = std::move(g1.db);
    accumulate(g1.dx);
  }
  // branch c
  relu_backward_inplace(c.c_out, dc);
  {
    Conv3dGrads g2 = conv3d_backward(c.c_hid, *pr.c2w, dc, {1, 1, 1}, {1, 1, 1});
    *gr.c2w = std::move(g2.dw);
    *gr.c2b = std::move(g2.db);
    relu_backward_inplace(c.c_hid, g2.dx);
    Conv3dGrads g1 = conv3d_backward(x, *pr.c1w, g2.dx);
    *gr.c1w = std::move(g1.dw);
    *gr.c1b = std::move(g1.db);
    accumulate(g1.dx);
  }
  // branch d
  relu_backward_inplace(c.d_out, dd);
  {
    Conv3dGrads g = conv3d_backward(c.d_pool.out, *pr.dw, dd);
    *gr.dw = std::move(g.dw);
    *gr.db = std::move(g.db);
    Tensor dpool = maxpool3d_backward(c.d_pool, g.dx, x.shape);
    accumulate(dpool);
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Full network
// ---------------------------------------------------------------------------

// Pooling windows shrink to 1 on axes that are too small, so tiny
// measurement grids flow through the same code path as large ones.
inline Dim3 effective_window(const Tensor& x, Dim3 want) {
  Dim3 w = want;
  for (int axis = 0; axis < 3; ++axis)
    if (x.shape[static_cast<std::size_t>(axis) + 1] < 4) w[axis] = 1;
  return w;
}

struct NetTrace {
  Tensor stem_out;
  MaxPoolResult pool1;
  std::array<Tensor, 4> inc_in;  // input of each inception block
  std::array<IncCache, 4> inc;
  std::array<Tensor, 4> inc_out;
  MaxPoolResult pool2;
  Tensor gap;  // N x F
  Tensor logits;
};

inline Tensor global_avg_pool(const Tensor& x) {
  std::size_t N = x.shape[0], C = x.shape[4];
  std::size_t vol = x.shape[1] * x.shape[2] * x.shape[3];
  Tensor out = Tensor::zeros({N, C});
  for (std::size_t n = 0; n < N; ++n) {
    const double* base = x.data.data() + n * vol * C;
    for (std::size_t s = 0; s < vol; ++s)
      for (std::size_t c = 0; c < C; ++c) out(n, c) += base[s * C + c];
    for (std::size_t c = 0; c < C; ++c) out(n, c) /= static_cast<double>(vol);
  }
  return out;
}

inline void network_trace(const ModelParams& p, const Tensor& x, NetTrace& tr) {
  const NetworkConfig& cfg = p.config;
  require(x.rank() == 5, errc::invalid_argument, "network input must be N,T,H,W,C");
  require(x.shape[1] == cfg.input[0] && x.shape[2] == cfg.input[1] &&
              x.shape[3] == cfg.input[2] && x.shape[4] == cfg.input[3],
          errc::invalid_argument, "network input shape does not match config");

  tr.stem_out = conv3d_forward(x, p.tensors[0], p.tensors[1], {1, 1, 1}, {1, 1, 1});
  relu_inplace(tr.stem_out);

  Dim3 w1 = cfg.pool_after_stem ? effective_window(tr.stem_out, {1, 2, 2}) : Dim3{1, 1, 1};
  tr.pool1 = maxpool3d_forward(tr.stem_out, w1, w1, {0, 0, 0});

  tr.inc_in[0] = tr.pool1.out;
  for (int q = 0; q < 4; ++q) {
    tr.inc_out[q] = inception3d_forward(tr.inc_in[q], inc_refs(p, q), &tr.inc[q]);
    if (q == 1) {
      Dim3 w2 = cfg.pool_after_inc2 ? effective_window(tr.inc_out[1], {2, 2, 2}) : Dim3{1, 1, 1};
      tr.pool2 = maxpool3d_forward(tr.inc_out[1], w2, w2, {0, 0, 0});
      tr.inc_in[2] = tr.pool2.out;
    } else if (q < 3) {
      tr.inc_in[q + 1] = tr.inc_out[q];
    }
  }

  tr.gap = global_avg_pool(tr.inc_out[3]);

  const Tensor& hw = p.tensors[p.tensors.size() - 2];
  const Tensor& hb = p.tensors[p.tensors.size() - 1];
  std::size_t N = x.shape[0], F = hw.shape[0], K = hw.shape[1];
  tr.logits = Tensor::zeros({N, K});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t f = 0; f < F; ++f) {
      double gv = tr.gap(n, f);
      for (std::size_t k = 0; k < K; ++k) tr.logits(n, k) += gv * hw(f, k);
    }
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t k = 0; k < K; ++k) tr.logits(n, k) += hb(k);
}

inline Tensor network_forward(const ModelParams& p, const Tensor& x) {
  NetTrace tr;
  network_trace(p, x, tr);
  return std::move(tr.logits);
}

// Mean negative log-softmax with log-sum-exp stabilization; the gradient is
// (softmax - onehot) / N.
struct LossResult {
  double loss;
  Tensor dlogits;
};

inline LossResult softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  std::size_t N = logits.shape[0], K = logits.shape[1];
  require(labels.size() == N, errc::invalid_argument, "labels/batch mismatch");
  LossResult r{0.0, Tensor::zeros(logits.shape)};
  for (std::size_t n = 0; n < N; ++n) {
    require(labels[n] >= 0 && static_cast<std::size_t>(labels[n]) < K, errc::invalid_argument,
            "label out of range");
    double mx = logits(n, 0);
    for (std::size_t k = 1; k < K; ++k) mx = std::max(mx, logits(n, k));
    double sum = 0.0;
    for (std::size_t k = 0; k < K; ++k) sum += std::exp(logits(n, k) - mx);
    double lse = mx + std::log(sum);
    r.loss += lse - logits(n, static_cast<std::size_t>(labels[n]));
    for (std::size_t k = 0; k < K; ++k) {
      double p = std::exp(logits(n, k) - lse);
      r.dlogits(n, k) = (p - (static_cast<std::size_t>(labels[n]) == k ? 1.0 : 0.0)) /
                        static_cast<double>(N);
    }
  }
  r.loss /= static_cast<double>(N);
  return r;
}

struct BackwardResult {
  double loss = 0.0;
  std::vector<Tensor> grads;  // aligned with ModelParams order
};

namespace detail {

// Sum-reduced loss and gradients over one contiguous sub-batch; the mean
// normalization is applied by the caller so chunked execution reduces
// deterministically in chunk order.
inline BackwardResult backward_sum(const ModelParams& p, const Tensor& x,
                                   const std::vector<int>& labels) {
  NetTrace tr;
  network_trace(p, x, tr);

  std::size_t N = x.shape[0];
  LossResult lr = softmax_cross_entropy(tr.logits, labels);
  double loss_sum = lr.loss * static_cast<double>(N);
  Tensor& dlogits = lr.dlogits;
  for (auto& v : dlogits.data) v *= static_cast<double>(N);  // undo the mean

  BackwardResult out;
  out.loss = loss_sum;
  out.grads.reserve(p.tensors.size());
  for (const auto& t : p.tensors) out.grads.push_back(Tensor::zeros(t.shape));

  const Tensor& hw = p.tensors[p.tensors.size() - 2];
  std::size_t F = hw.shape[0], K = hw.shape[1];
  Tensor& dhw = out.grads[p.tensors.size() - 2];
  Tensor& dhb = out.grads[p.tensors.size() - 1];
  Tensor dgap = Tensor::zeros(tr.gap.shape);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t k = 0; k < K; ++k) {
      double gv = dlogits(n, k);
      dhb(k) += gv;
      for (std::size_t f = 0; f < F; ++f) {
        dhw(f, k) += tr.gap(n, f) * gv;
        dgap(n, f) += hw(f, k) * gv;
      }
    }

  // global average pool backward
  const Tensor& feat = tr.inc_out[3];
  std::size_t vol = feat.shape[1] * feat.shape[2] * feat.shape[3];
  Tensor dfeat = Tensor::zeros(feat.shape);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t s = 0; s < vol; ++s)
      for (std::size_t c = 0; c < F; ++c)
        dfeat.data[(n * vol + s) * F + c] = dgap(n, c) / static_cast<double>(vol);

  // inception stack backward
  Tensor dcur = std::move(dfeat);
  for (int q = 3; q >= 0; --q) {
    std::size_t base = 2 + static_cast<std::size_t>(q) * 12;
    IncGradRefs gr{&out.grads[base],     &out.grads[base + 1], &out.grads[base + 2],
                   &out.grads[base + 3], &out.grads[base + 4], &out.grads[base + 5],
                   &out.grads[base + 6], &out.grads[base + 7], &out.grads[base + 8],
                   &out.grads[base + 9], &out.grads[base + 10], &out.grads[base + 11]};
    dcur = inception3d_backward(tr.inc_in[q], inc_refs(p, q), tr.inc[q], dcur, gr);
    if (q == 2) dcur = maxpool3d_backward(tr.pool2, dcur, tr.inc_out[1].shape);
  }

  // first pool and stem backward
  dcur = maxpool3d_backward(tr.pool1, dcur, tr.stem_out.shape);
  relu_backward_inplace(tr.stem_out, dcur);
  Conv3dGrads sg = conv3d_backward(x, p.tensors[0], dcur, {1, 1, 1}, {1, 1, 1});
  out.grads[0] = std::move(sg.dw);
  out.grads[1] = std::move(sg.db);
  return out;
}

inline Tensor slice_batch(const Tensor& x, std::size_t begin, std::size_t count) {
  std::size_t stride = x.size() / x.shape[0];
  std::vector<std::size_t> shape = x.shape;
  shape[0] = count;
  Tensor out = Tensor::zeros(shape);
  std::copy_n(x.data.data() + begin * stride, count * stride, out.data.data());
  return out;
}

inline unsigned worker_count() {
  if (const char* env = std::getenv("CSVID_THREADS")) {
    int v = std::atoi(env);
    if (v >= 1) return static_cast<unsigned>(v);
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : hc;
}

}  // namespace detail

// Exact reverse-mode gradients of the mean cross-entropy over the batch.
// Samples may be processed in parallel chunks; the reduction runs in fixed
// chunk order so results are identical across reruns.
inline BackwardResult network_backward(const ModelParams& p, const Tensor& x,
                                       const std::vector<int>& labels) {
  std::size_t N = x.shape[0];
  unsigned workers = std::min<std::size_t>(detail::worker_count(), N);

  BackwardResult total;
  if (workers <= 1) {
    total = detail::backward_sum(p, x, labels);
  } else {
    std::vector<BackwardResult> parts(workers);
    std::vector<std::thread> threads;
    std::size_t chunk = (N + workers - 1) / workers;
    for (unsigned wi = 0; wi < workers; ++wi) {
      std::size_t begin = wi * chunk;
      std::size_t count = std::min(chunk, N - std::min<std::size_t>(begin, N));
      if (count == 0) break;
      threads.emplace_back([&, wi, begin, count] {
        Tensor sub = detail::slice_batch(x, begin, count);
        std::vector<int> sublabels(labels.begin() + static_cast<std::ptrdiff_t>(begin),
                                   labels.begin() + static_cast<std::ptrdiff_t>(begin + count));
        parts[wi] = detail::backward_sum(p, sub, sublabels);
      });
    }
    for (auto& t : threads) t.join();
    total = std::move(parts[0]);
    for (std::size_t wi = 1; wi < parts.size(); ++wi) {
      if (parts[wi].grads.empty()) continue;
      total.loss += parts[wi].loss;
      for (std::size_t g = 0; g < total.grads.size(); ++g)
        for (std::size_t i = 0; i < total.grads[g].size(); ++i)
          total.grads[g].data[i] += parts[wi].grads[g].data[i];
    }
  }

  double inv = 1.0 / static_cast<double>(N);
  total.loss *= inv;
  for (auto& g : total.grads)
    for (auto& v : g.data) v *= inv;
  return total;
}

}  // namespace csvid
