#ifndef LISNOW_NN_HPP
#define LISNOW_NN_HPP

#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <vector>

#include "lisnow/rng.hpp"
#include "lisnow/tensor.hpp"
#include "lisnow/transforms.hpp"

namespace lisnow::ops {

namespace convdet {

// out_row[x] += k * in_row[(x + s) mod w] for all x, with the wrap handled by
// range splitting so the bulk of the sweep is a contiguous fused multiply-add.
// std::fma keeps the per-element rounding identical in the vector body, the
// loop tails and the wrap segments; column-shift equivariance is exact.
template <class S>
inline void axpy_shifted(S* __restrict__ out_row, const S* __restrict__ in_row, int w, int s,
                         S k) {
  const int x0 = s < 0 ? -s : 0;
  const int x1 = s > 0 ? w - s : w;
  const S* shifted = in_row + s;
  for (int x = x0; x < x1; ++x) out_row[x] = std::fma(k, shifted[x], out_row[x]);
  for (int x = 0; x < x0; ++x) out_row[x] = std::fma(k, in_row[x + s + w], out_row[x]);
  for (int x = x1; x < w; ++x) out_row[x] = std::fma(k, in_row[x + s - w], out_row[x]);
}

// All three taps of a width-3 kernel row in one sweep. The fma chain has the
// same shape at every position (wrap included), so the rounding is position
// independent.
template <class S>
inline void row3_taps(S* __restrict__ out_row, const S* __restrict__ in_row, int w, S k0, S k1,
                      S k2) {
  out_row[0] = std::fma(k0, in_row[w - 1], std::fma(k1, in_row[0], std::fma(k2, in_row[1], out_row[0])));
  for (int x = 1; x < w - 1; ++x)
    out_row[x] =
        std::fma(k0, in_row[x - 1], std::fma(k1, in_row[x], std::fma(k2, in_row[x + 1], out_row[x])));
  out_row[w - 1] = std::fma(
      k0, in_row[w - 2], std::fma(k1, in_row[w - 1], std::fma(k2, in_row[0], out_row[w - 1])));
}

// acc += sum_x a_row[x] * b_row[(x + s) mod w]
template <class S>
inline double dot_shifted(const S* a_row, const S* b_row, int w, int s) {
  const int x0 = s < 0 ? -s : 0;
  const int x1 = s > 0 ? w - s : w;
  double acc = 0.0;
  const S* shifted = b_row + s;
  for (int x = x0; x < x1; ++x) acc += double(a_row[x]) * double(shifted[x]);
  for (int x = 0; x < x0; ++x) acc += double(a_row[x]) * double(b_row[x + s + w]);
  for (int x = x1; x < w; ++x) acc += double(a_row[x]) * double(b_row[x + s - w]);
  return acc;
}

inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

}  // namespace convdet

// Same-size 2D convolution with circular padding along width (azimuth is
// periodic) and replicate padding along height. x: {n, ci, h, w},
// kernel: {co, ci, kh, kw} with odd kh/kw, bias: {co}.
template <class S>
Tensor<S> conv2d_circular(const Tensor<S>& x, const Tensor<S>& kernel, const Tensor<S>& bias) {
  if (x.shape().size() != 4 || kernel.shape().size() != 4 || bias.shape().size() != 1)
    throw std::invalid_argument("conv2d_circular: bad ranks");
  const int nb = x.dim(0), ci = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int co = kernel.dim(0), kci = kernel.dim(1), kh = kernel.dim(2), kw = kernel.dim(3);
  if (kci != ci || bias.dim(0) != co) throw std::invalid_argument("conv2d_circular: channel mismatch");
  if (kh % 2 == 0 || kw % 2 == 0) throw std::invalid_argument("conv2d_circular: even kernel");
  if (h < kh || w < kw) throw std::invalid_argument("conv2d_circular: input smaller than kernel");
  const int cy = kh / 2, cx = kw / 2;

  auto n = make_node<S>({nb, co, h, w}, {x.node(), kernel.node(), bias.node()});
  const std::size_t plane = size_t(h) * w;
  {
    const S* xv = x.values().data();
    const S* kv = kernel.values().data();
    const S* bv = bias.values().data();
    S* ov = n->val.data();
#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static)
#endif
    for (int b = 0; b < nb; ++b)
      for (int oc = 0; oc < co; ++oc) {
        S* out_plane = ov + (size_t(b) * co + oc) * plane;
        for (int y = 0; y < h; ++y) {
          S* out_row = out_plane + size_t(y) * w;
          for (int xpos = 0; xpos < w; ++xpos) out_row[xpos] = bv[oc];
          for (int ic = 0; ic < ci; ++ic) {
            const S* in_plane = xv + (size_t(b) * ci + ic) * plane;
            for (int ky = 0; ky < kh; ++ky) {
              const int yy = convdet::clampi(y + ky - cy, 0, h - 1);
              const S* in_row = in_plane + size_t(yy) * w;
              const S* krow = kv + ((size_t(oc) * ci + ic) * kh + ky) * kw;
              if (kw == 3)
                convdet::row3_taps(out_row, in_row, w, krow[0], krow[1], krow[2]);
              else
                for (int kx = 0; kx < kw; ++kx)
                  convdet::axpy_shifted(out_row, in_row, w, kx - cx, krow[kx]);
            }
          }
        }
      }
  }

  auto* out = n.get();
  n->backprop = [out, nb, ci, co, h, w, kh, kw, cy, cx, plane]() {
    auto& px = *out->parents[0];
    auto& pk = *out->parents[1];
    auto& pb = *out->parents[2];
    px.ensure_grad();
    pk.ensure_grad();
    pb.ensure_grad();
    const S* g = out->grad.data();
    // bias and kernel gradients
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int oc = 0; oc < co; ++oc) {
      double bacc = 0.0;
      for (int b = 0; b < nb; ++b) {
        const S* gplane = g + (size_t(b) * co + oc) * plane;
        for (std::size_t i = 0; i < plane; ++i) bacc += double(gplane[i]);
      }
      pb.grad[oc] += static_cast<S>(bacc);
      for (int ic = 0; ic < ci; ++ic)
        for (int ky = 0; ky < kh; ++ky)
          for (int kx = 0; kx < kw; ++kx) {
            double acc = 0.0;
            for (int b = 0; b < nb; ++b) {
              const S* gplane = g + (size_t(b) * co + oc) * plane;
              const S* in_plane = px.val.data() + (size_t(b) * ci + ic) * plane;
              for (int y = 0; y < h; ++y) {
                const int yy = convdet::clampi(y + ky - cy, 0, h - 1);
                acc += convdet::dot_shifted(gplane + size_t(y) * w, in_plane + size_t(yy) * w, w,
                                            kx - cx);
              }
            }
            pk.grad[((size_t(oc) * ci + ic) * kh + ky) * kw + kx] += static_cast<S>(acc);
          }
    }
    // input gradient
#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static)
#endif
    for (int b = 0; b < nb; ++b)
      for (int ic = 0; ic < ci; ++ic) {
        S* gin_plane = px.grad.data() + (size_t(b) * ci + ic) * plane;
        for (int oc = 0; oc < co; ++oc) {
          const S* gplane = g + (size_t(b) * co + oc) * plane;
          const S* krow0 = pk.val.data() + (size_t(oc) * ci + ic) * kh * kw;
          for (int y = 0; y < h; ++y) {
            const S* gout_row = gplane + size_t(y) * w;
            for (int ky = 0; ky < kh; ++ky) {
              const int yy = convdet::clampi(y + ky - cy, 0, h - 1);
              S* gin_row = gin_plane + size_t(yy) * w;
              const S* krow = krow0 + size_t(ky) * kw;
              // gin[yy][x + kx - cx] += k * gout[y][x]  ==  shifted axpy with
              // the roles of the rows swapped and the shift negated
              for (int kx = 0; kx < kw; ++kx) {
                const int s = kx - cx;
                const S k = krow[kx];
                const int x0 = s < 0 ? -s : 0;
                const int x1 = s > 0 ? w - s : w;
                S* shifted = gin_row + s;
                for (int xp = x0; xp < x1; ++xp)
                  shifted[xp] = std::fma(k, gout_row[xp], shifted[xp]);
                for (int xp = 0; xp < x0; ++xp)
                  gin_row[xp + s + w] = std::fma(k, gout_row[xp], gin_row[xp + s + w]);
                for (int xp = x1; xp < w; ++xp)
                  gin_row[xp + s - w] = std::fma(k, gout_row[xp], gin_row[xp + s - w]);
              }
            }
          }
        }
      }
  };
  return Tensor<S>(n);
}

template <class S>
Tensor<S> relu(const Tensor<S>& x) {
  auto n = make_node<S>(x.shape(), {x.node()});
  for (std::size_t i = 0; i < n->val.size(); ++i)
    n->val[i] = x.values()[i] > S(0) ? x.values()[i] : S(0);
  auto* out = n.get();
  n->backprop = [out]() {
    auto& p = *out->parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < out->grad.size(); ++i)
      if (p.val[i] > S(0)) p.grad[i] += out->grad[i];
  };
  return Tensor<S>(n);
}

// Inverted dropout: zero with probability p, scale survivors by 1/(1-p).
// Identity at inference or p == 0. Draws one uniform per element from rng in
// element order, so a fixed seed gives a fixed mask.
template <class S>
Tensor<S> dropout(const Tensor<S>& x, double p, RngState& rng, bool training) {
  if (p < 0.0 || p >= 1.0) throw std::invalid_argument("dropout: p must be in [0, 1)");
  if (!training || p == 0.0) return x;
  auto n = make_node<S>(x.shape(), {x.node()});
  auto mask = std::make_shared<std::vector<std::uint8_t>>(x.numel());
  const S inv_keep = static_cast<S>(1.0 / (1.0 - p));
  for (std::size_t i = 0; i < n->val.size(); ++i) {
    const bool keep = rng.uniform() >= p;
    (*mask)[i] = keep;
    n->val[i] = keep ? x.values()[i] * inv_keep : S(0);
  }
  auto* out = n.get();
  n->backprop = [out, mask, inv_keep]() {
    auto& p0 = *out->parents[0];
    p0.ensure_grad();
    for (std::size_t i = 0; i < out->grad.size(); ++i)
      if ((*mask)[i]) p0.grad[i] += inv_keep * out->grad[i];
  };
  return Tensor<S>(n);
}

// Single-level Haar analysis as a layer: {n, c, h, w} -> {n, 4c, h/2, w/2},
// output channels grouped band-major [ll | lh | hl | hh]. Orthonormal, so the
// backward pass is the synthesis applied to the gradient.
template <class S>
Tensor<S> dwt_layer(const Tensor<S>& x) {
  if (x.shape().size() != 4) throw std::invalid_argument("dwt_layer: expected NCHW");
  const int nb = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h % 2 || w % 2) throw std::invalid_argument("dwt_layer: odd spatial dims");
  const int h2 = h / 2, w2 = w / 2;
  auto n = make_node<S>({nb, 4 * c, h2, w2}, {x.node()});
  const std::size_t in_plane = size_t(h) * w, out_plane = size_t(h2) * w2;
  for (int b = 0; b < nb; ++b)
    for (int ch = 0; ch < c; ++ch) {
      const S* src = x.values().data() + (size_t(b) * c + ch) * in_plane;
      S* base = n->val.data() + size_t(b) * 4 * c * out_plane;
      detail::haar_analysis_plane(src, h, w, base + size_t(0 * c + ch) * out_plane,
                                  base + size_t(1 * c + ch) * out_plane,
                                  base + size_t(2 * c + ch) * out_plane,
                                  base + size_t(3 * c + ch) * out_plane);
    }
  auto* out = n.get();
  n->backprop = [out, nb, c, h2, w2, in_plane, out_plane]() {
    auto& p = *out->parents[0];
    p.ensure_grad();
    std::vector<S> tmp(in_plane);
    for (int b = 0; b < nb; ++b)
      for (int ch = 0; ch < c; ++ch) {
        const S* base = out->grad.data() + size_t(b) * 4 * c * out_plane;
        detail::haar_synthesis_plane(base + size_t(0 * c + ch) * out_plane,
                                     base + size_t(1 * c + ch) * out_plane,
                                     base + size_t(2 * c + ch) * out_plane,
                                     base + size_t(3 * c + ch) * out_plane, h2, w2, tmp.data());
        S* dst = p.grad.data() + (size_t(b) * c + ch) * in_plane;
        for (std::size_t i = 0; i < in_plane; ++i) dst[i] += tmp[i];
      }
  };
  return Tensor<S>(n);
}

// Inverse of dwt_layer: {n, 4c, h2, w2} -> {n, c, 2*h2, 2*w2}.
template <class S>
Tensor<S> idwt_layer(const Tensor<S>& x) {
  if (x.shape().size() != 4) throw std::invalid_argument("idwt_layer: expected NCHW");
  const int nb = x.dim(0), c4 = x.dim(1), h2 = x.dim(2), w2 = x.dim(3);
  if (c4 % 4) throw std::invalid_argument("idwt_layer: channels not divisible by 4");
  const int c = c4 / 4, h = 2 * h2, w = 2 * w2;
  auto n = make_node<S>({nb, c, h, w}, {x.node()});
  const std::size_t in_plane = size_t(h2) * w2, out_plane = size_t(h) * w;
  for (int b = 0; b < nb; ++b)
    for (int ch = 0; ch < c; ++ch) {
      const S* base = x.values().data() + size_t(b) * c4 * in_plane;
      detail::haar_synthesis_plane(base + size_t(0 * c + ch) * in_plane,
                                   base + size_t(1 * c + ch) * in_plane,
                                   base + size_t(2 * c + ch) * in_plane,
                                   base + size_t(3 * c + ch) * in_plane, h2, w2,
                                   n->val.data() + (size_t(b) * c + ch) * out_plane);
    }
  auto* out = n.get();
  n->backprop = [out, nb, c, c4, h, w, in_plane, out_plane]() {
    auto& p = *out->parents[0];
    p.ensure_grad();
    std::vector<S> ll(in_plane), lh(in_plane), hl(in_plane), hh(in_plane);
    for (int b = 0; b < nb; ++b)
      for (int ch = 0; ch < c; ++ch) {
        detail::haar_analysis_plane(out->grad.data() + (size_t(b) * c + ch) * out_plane, h, w,
                                    ll.data(), lh.data(), hl.data(), hh.data());
        S* base = p.grad.data() + size_t(b) * c4 * in_plane;
        const std::vector<S>* bands[4] = {&ll, &lh, &hl, &hh};
        for (int band = 0; band < 4; ++band) {
          S* dst = base + size_t(band * c + ch) * in_plane;
          for (std::size_t i = 0; i < in_plane; ++i) dst[i] += (*bands[band])[i];
        }
      }
  };
  return Tensor<S>(n);
}

// log(|F(x)| + 1) per channel plane, full redundant spectrum. The complex
// spectrum is kept for the backward pass:
//   dL/dx = Re(DFT(conj(G))),  G = g .* X / (|X| (1 + |X|)),  G = 0 at X = 0.
template <class S>
Tensor<S> fft2_logmag(const Tensor<S>& x) {
  if (x.shape().size() != 4) throw std::invalid_argument("fft2_logmag: expected NCHW");
  const int nb = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (!detail::is_pow2(h) || !detail::is_pow2(w))
    throw std::invalid_argument("fft2_logmag: dims must be powers of two");
  auto n = make_node<S>(x.shape(), {x.node()});
  const std::size_t plane = size_t(h) * w;
  auto spec_re = std::make_shared<std::vector<S>>(x.numel());
  auto spec_im = std::make_shared<std::vector<S>>(x.numel());
  for (int b = 0; b < nb; ++b)
    for (int ch = 0; ch < c; ++ch) {
      const std::size_t off = (size_t(b) * c + ch) * plane;
      S* re = spec_re->data() + off;
      S* im = spec_im->data() + off;
      const S* src = x.values().data() + off;
      std::copy(src, src + plane, re);
      std::fill(im, im + plane, S(0));
      detail::fft2_inplace(re, im, h, w, false);
      S* dst = n->val.data() + off;
      for (std::size_t i = 0; i < plane; ++i) {
        const double mag = std::hypot(double(re[i]), double(im[i]));
        dst[i] = static_cast<S>(std::log1p(mag));
      }
    }
  auto* out = n.get();
  n->backprop = [out, spec_re, spec_im, nb, c, h, w, plane]() {
    auto& p = *out->parents[0];
    p.ensure_grad();
    std::vector<S> gre(plane), gim(plane);
    for (int b = 0; b < nb; ++b)
      for (int ch = 0; ch < c; ++ch) {
        const std::size_t off = (size_t(b) * c + ch) * plane;
        const S* re = spec_re->data() + off;
        const S* im = spec_im->data() + off;
        const S* g = out->grad.data() + off;
        for (std::size_t i = 0; i < plane; ++i) {
          const double mag = std::hypot(double(re[i]), double(im[i]));
          if (mag > 0.0) {
            const double scale = double(g[i]) / (mag * (1.0 + mag));
            // conj(G): negate the imaginary part
            gre[i] = static_cast<S>(scale * double(re[i]));
            gim[i] = static_cast<S>(-scale * double(im[i]));
          } else {
            gre[i] = S(0);
            gim[i] = S(0);
          }
        }
        detail::fft2_inplace(gre.data(), gim.data(), h, w, false);
        S* dst = p.grad.data() + off;
        for (std::size_t i = 0; i < plane; ++i) dst[i] += gre[i];
      }
  };
  return Tensor<S>(n);
}

}  // namespace lisnow::ops

#endif  // LISNOW_NN_HPP
