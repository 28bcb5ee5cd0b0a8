#ifndef LISNOW_NET_HPP
#define LISNOW_NET_HPP

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "lisnow/nn.hpp"
#include "lisnow/optim.hpp"
#include "lisnow/range_image.hpp"
#include "lisnow/rng.hpp"
#include "lisnow/tensor.hpp"

namespace lisnow {

struct NetworkConfig {
  int levels = 4;
  int base_channels = 8;
  int blocks_per_level = 2;
  double dropout_p = 0.1;
  // kernels are fixed 3x3

  void validate() const {
    if (levels < 2 || base_channels < 2 || blocks_per_level < 1 || dropout_p < 0.0 ||
        dropout_p >= 1.0)
      throw std::invalid_argument("bad network config");
  }
  int channels_at(int level) const { return base_channels << level; }
};

struct LossWeights {
  double alpha = 0.9779;
  double beta = 0.5;

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0) || beta < 0.0 || beta > 1.0)
      throw std::invalid_argument("bad loss weights");
  }
};

struct Thresholds {
  double n_d = 1.0;
  double n_i = 1.0;
  double delta_bar = 1e-4;

  void validate() const {
    if (!(n_d > 0.0) || !(n_i > 0.0) || !(delta_bar > 0.0))
      throw std::invalid_argument("thresholds must be strictly positive");
  }
};

// Residual image as consumed by the decision boundary: channel 0 carries the
// distance restoration (cube-root-meter units), channel 1 the intensity
// restoration. Positive values mean the denoised estimate sits above the
// measurement, i.e. the pixel is closer/darker than its surroundings.
struct ResidualImage {
  Image delta;  // c = 2
};

struct SnowMask {
  std::vector<std::uint8_t> point_snow;
  std::vector<float> score_d;  // residual of the point's pixel, 0 if unprojected
  std::vector<float> score_i;
};

// Encoder/decoder with Haar down/up sampling and additive skips. Residual
// block: conv3x3 -> ReLU -> dropout -> conv3x3 with identity skip, no final
// activation (the residual output is signed).
template <class S>
class LisnowNet {
 public:
  LisnowNet(NetworkConfig cfg, ParamStore<S> store) : cfg_(cfg), store_(std::move(store)) {
    cfg_.validate();
  }

  // Fresh parameters, Kaiming-uniform fan-in init for conv kernels, zero
  // biases, zero final conv so training starts from the identity denoiser.
  static LisnowNet init(const NetworkConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    ParamStore<S> store;
    RngState rng(seed, RngState::hash_label("init"));
    auto add_conv = [&](const std::string& name, int co, int ci, bool zero) {
      auto& w = store.add(name + ".w", {co, ci, 3, 3});
      store.add(name + ".b", {co});
      if (!zero) {
        // uniform fan-in scaling; the conservative gain keeps the deep
        // residual stack from amplifying activations before training starts
        const double bound = 1.0 / std::sqrt(ci * 9.0);
        auto r = rng.fork(name);
        for (auto& v : w.values()) v = static_cast<S>(r.uniform(-bound, bound));
      }
    };
    const int L = cfg.levels;
    add_conv("conv_in", cfg.channels_at(0), 2, false);
    for (int l = 0; l < L - 1; ++l) {
      for (int b = 0; b < cfg.blocks_per_level; ++b) {
        add_conv("enc" + std::to_string(l) + ".b" + std::to_string(b) + ".c1",
                 cfg.channels_at(l), cfg.channels_at(l), false);
        add_conv("enc" + std::to_string(l) + ".b" + std::to_string(b) + ".c2",
                 cfg.channels_at(l), cfg.channels_at(l), false);
      }
      add_conv("down" + std::to_string(l), cfg.channels_at(l + 1), 4 * cfg.channels_at(l), false);
    }
    for (int b = 0; b < cfg.blocks_per_level; ++b) {
      add_conv("mid.b" + std::to_string(b) + ".c1", cfg.channels_at(L - 1), cfg.channels_at(L - 1),
               false);
      add_conv("mid.b" + std::to_string(b) + ".c2", cfg.channels_at(L - 1), cfg.channels_at(L - 1),
               false);
    }
    for (int l = L - 2; l >= 0; --l) {
      add_conv("up" + std::to_string(l), 4 * cfg.channels_at(l), cfg.channels_at(l + 1), false);
      for (int b = 0; b < cfg.blocks_per_level; ++b) {
        add_conv("dec" + std::to_string(l) + ".b" + std::to_string(b) + ".c1",
                 cfg.channels_at(l), cfg.channels_at(l), false);
        add_conv("dec" + std::to_string(l) + ".b" + std::to_string(b) + ".c2",
                 cfg.channels_at(l), cfg.channels_at(l), false);
      }
    }
    add_conv("conv_out", 2, cfg.channels_at(0), true);
    return LisnowNet(cfg, std::move(store));
  }

  ParamStore<S>& params() { return store_; }
  const ParamStore<S>& params() const { return store_; }
  const NetworkConfig& config() const { return cfg_; }

  // x: {n, 2, h, w} preprocessed range images; returns the residual batch of
  // the same shape. rng is only consumed when training (dropout masks).
  Tensor<S> forward(const Tensor<S>& x, bool training = false, RngState* rng = nullptr) {
    if (x.shape().size() != 4 || x.dim(1) != 2)
      throw std::invalid_argument("forward: expected {n, 2, h, w}");
    const int L = cfg_.levels;
    const int div = 1 << (L - 1);
    if (x.dim(2) % div || x.dim(3) % div)
      throw std::invalid_argument("forward: spatial dims must be divisible by 2^(levels-1)");
    if (training && !rng) throw std::invalid_argument("forward: training needs an rng");

    auto t = conv("conv_in", x);
    std::vector<Tensor<S>> skips;
    for (int l = 0; l < L - 1; ++l) {
      for (int b = 0; b < cfg_.blocks_per_level; ++b)
        t = block("enc" + std::to_string(l) + ".b" + std::to_string(b), t, training, rng);
      skips.push_back(t);
      t = conv("down" + std::to_string(l), ops::dwt_layer(t));
    }
    for (int b = 0; b < cfg_.blocks_per_level; ++b)
      t = block("mid.b" + std::to_string(b), t, training, rng);
    for (int l = L - 2; l >= 0; --l) {
      t = ops::idwt_layer(conv("up" + std::to_string(l), t));
      t = ops::add(t, skips[l]);
      for (int b = 0; b < cfg_.blocks_per_level; ++b)
        t = block("dec" + std::to_string(l) + ".b" + std::to_string(b), t, training, rng);
    }
    return conv("conv_out", t);
  }

  // Tape-free single-frame forward on reused buffers; bitwise identical to
  // forward() on the same weights (same kernels, same accumulation order).
  // This is the path the per-frame prediction pipeline uses.
  Image infer(const Image& img) const {
    if (img.c != 2) throw std::invalid_argument("infer: expected a 2-channel image");
    const int L = cfg_.levels;
    const int div = 1 << (L - 1);
    if (img.h % div || img.w % div)
      throw std::invalid_argument("infer: spatial dims must be divisible by 2^(levels-1)");

    std::vector<std::vector<S>> skips(L - 1);
    std::vector<S> cur, t1, t2, packed;
    const std::size_t top = size_t(cfg_.channels_at(0)) * img.h * img.w;
    cur.reserve(top);
    t1.reserve(top);
    t2.reserve(top);
    packed.reserve(top);

    std::vector<S> input(img.data.size());
    for (std::size_t i = 0; i < input.size(); ++i) input[i] = static_cast<S>(img.data[i]);

    int h = img.h, w = img.w;
    conv_buf("conv_in", input.data(), 2, h, w, cur);
    for (int l = 0; l < L - 1; ++l) {
      const int c = cfg_.channels_at(l);
      for (int b = 0; b < cfg_.blocks_per_level; ++b)
        block_buf("enc" + std::to_string(l) + ".b" + std::to_string(b), cur, c, h, w, t1, t2);
      skips[l] = cur;
      // dwt into packed (4c, h/2, w/2), then the transition conv
      packed.resize(size_t(4) * c * (h / 2) * (w / 2));
      dwt_planes(cur.data(), c, h, w, packed.data());
      h /= 2;
      w /= 2;
      conv_buf("down" + std::to_string(l), packed.data(), 4 * c, h, w, cur);
    }
    for (int b = 0; b < cfg_.blocks_per_level; ++b)
      block_buf("mid.b" + std::to_string(b), cur, cfg_.channels_at(L - 1), h, w, t1, t2);
    for (int l = L - 2; l >= 0; --l) {
      const int c = cfg_.channels_at(l);
      conv_buf("up" + std::to_string(l), cur.data(), cfg_.channels_at(l + 1), h, w, packed);
      cur.resize(size_t(c) * (2 * h) * (2 * w));
      idwt_planes(packed.data(), c, h, w, cur.data());
      h *= 2;
      w *= 2;
      for (std::size_t i = 0; i < cur.size(); ++i) cur[i] += skips[l][i];
      for (int b = 0; b < cfg_.blocks_per_level; ++b)
        block_buf("dec" + std::to_string(l) + ".b" + std::to_string(b), cur, c, h, w, t1, t2);
    }
    conv_buf("conv_out", cur.data(), cfg_.channels_at(0), h, w, t1);
    Image out(h, w, 2);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = double(t1[i]);
    return out;
  }

 private:
  Tensor<S> conv(const std::string& name, const Tensor<S>& x) {
    return ops::conv2d_circular(x, store_.get(name + ".w"), store_.get(name + ".b"));
  }

  void conv_buf(const std::string& name, const S* in, int ci, int h, int w,
                std::vector<S>& out) const {
    const auto& kt = store_.get(name + ".w");
    const auto& bt = store_.get(name + ".b");
    const int co = kt.shape()[0];
    const S* kv = kt.values().data();
    const S* bv = bt.values().data();
    out.resize(size_t(co) * h * w);
    const std::size_t plane = size_t(h) * w;
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int oc = 0; oc < co; ++oc) {
      S* out_plane = out.data() + size_t(oc) * plane;
      for (int y = 0; y < h; ++y) {
        S* out_row = out_plane + size_t(y) * w;
        for (int x = 0; x < w; ++x) out_row[x] = bv[oc];
        for (int ic = 0; ic < ci; ++ic) {
          const S* in_plane = in + size_t(ic) * plane;
          for (int ky = 0; ky < 3; ++ky) {
            const int yy = std::clamp(y + ky - 1, 0, h - 1);
            const S* krow = kv + ((size_t(oc) * ci + ic) * 3 + ky) * 3;
            ops::convdet::row3_taps(out_row, in_plane + size_t(yy) * w, w, krow[0], krow[1],
                                    krow[2]);
          }
        }
      }
    }
  }

  // y = x + conv2(relu(conv1(x))), dropout inactive at inference
  void block_buf(const std::string& name, std::vector<S>& x, int c, int h, int w,
                 std::vector<S>& t1, std::vector<S>& t2) const {
    conv_buf(name + ".c1", x.data(), c, h, w, t1);
    for (auto& v : t1)
      if (v < S(0)) v = S(0);
    conv_buf(name + ".c2", t1.data(), c, h, w, t2);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += t2[i];
  }

  void dwt_planes(const S* in, int c, int h, int w, S* out) const {
    const std::size_t in_plane = size_t(h) * w, out_plane = in_plane / 4;
    for (int ch = 0; ch < c; ++ch)
      detail::haar_analysis_plane(in + size_t(ch) * in_plane, h, w,
                                  out + size_t(0 * c + ch) * out_plane,
                                  out + size_t(1 * c + ch) * out_plane,
                                  out + size_t(2 * c + ch) * out_plane,
                                  out + size_t(3 * c + ch) * out_plane);
  }

  void idwt_planes(const S* in, int c, int h2, int w2, S* out) const {
    const std::size_t in_plane = size_t(h2) * w2, out_plane = in_plane * 4;
    for (int ch = 0; ch < c; ++ch)
      detail::haar_synthesis_plane(in + size_t(0 * c + ch) * in_plane,
                                   in + size_t(1 * c + ch) * in_plane,
                                   in + size_t(2 * c + ch) * in_plane,
                                   in + size_t(3 * c + ch) * in_plane, h2, w2,
                                   out + size_t(ch) * out_plane);
  }

  Tensor<S> block(const std::string& name, const Tensor<S>& x, bool training, RngState* rng) {
    auto y = ops::relu(conv(name + ".c1", x));
    if (training) y = ops::dropout(y, cfg_.dropout_p, *rng, true);
    return ops::add(x, conv(name + ".c2", y));
  }

  NetworkConfig cfg_;
  ParamStore<S> store_;
};

template <class S>
struct LossParts {
  Tensor<S> total;
  double total_value = 0.0;
  double l_fft = 0.0;    // per-frame mean of ||log(|F(Ihat)|+1)||_1
  double l_dwt = 0.0;    // per-frame mean over the Haar detail bands of Ihat
  double l_delta = 0.0;  // per-frame mean of ||Delta||_1
};

// total = alpha * (beta * L_F + (1 - beta) * L_W) + (1 - alpha) * L_Delta,
// with Ihat = img - delta. L_W sums the LH/HL/HH detail bands; the LL band
// carries the non-sparse low-pass content and is excluded from the penalty.
template <class S>
LossParts<S> compute_loss(const Tensor<S>& img, const Tensor<S>& delta, const LossWeights& w) {
  w.validate();
  if (img.shape() != delta.shape()) throw std::invalid_argument("compute_loss: shape mismatch");
  const int n = img.dim(0);
  const int c = img.dim(1);
  auto ihat = ops::sub(img, delta);
  auto lf = ops::l1_sum(ops::fft2_logmag(ihat));
  auto lw = ops::l1_sum_channels(ops::dwt_layer(ihat), c, 4 * c);
  auto ld = ops::l1_sum(delta);
  const double inv_n = 1.0 / n;
  LossParts<S> parts;
  parts.total = ops::weighted_sum<S>({lf, lw, ld}, {w.alpha * w.beta * inv_n,
                                                    w.alpha * (1.0 - w.beta) * inv_n,
                                                    (1.0 - w.alpha) * inv_n});
  parts.total_value = static_cast<double>(parts.total.item());
  parts.l_fft = static_cast<double>(lf.item()) * inv_n;
  parts.l_dwt = static_cast<double>(lw.item()) * inv_n;
  parts.l_delta = static_cast<double>(ld.item()) * inv_n;
  return parts;
}

// Converts the raw network output into the residual the decision boundary
// consumes: per channel and per row, median(row) - value. Recentering by the
// row median removes the offset the unsupervised objective leaves in the raw
// output; negation orients snow (restored upward by the denoiser) positive.
inline ResidualImage restoration_residual(const Image& raw_delta) {
  ResidualImage out;
  out.delta = Image(raw_delta.h, raw_delta.w, raw_delta.c);
  std::vector<double> row(raw_delta.w);
  for (int ch = 0; ch < raw_delta.c; ++ch)
    for (int y = 0; y < raw_delta.h; ++y) {
      const double* src = raw_delta.plane(ch) + size_t(y) * raw_delta.w;
      std::copy(src, src + raw_delta.w, row.begin());
      const int mid = raw_delta.w / 2;
      std::nth_element(row.begin(), row.begin() + mid, row.end());
      double med = row[mid];
      if (raw_delta.w % 2 == 0) {
        const double lower = *std::max_element(row.begin(), row.begin() + mid);
        med = 0.5 * (med + lower);
      }
      double* dst = out.delta.plane(ch) + size_t(y) * raw_delta.w;
      for (int x = 0; x < raw_delta.w; ++x) dst[x] = med - src[x];
    }
  return out;
}

// Decision boundary: a pixel is snow iff both residual channels are strictly
// positive and (dd^n_d) * (di^n_i) > delta_bar. The positivity guards keep
// the exponentiation on positive values only.
inline std::vector<std::uint8_t> classify(const ResidualImage& res, const Thresholds& th) {
  th.validate();
  const auto& img = res.delta;
  if (img.c != 2) throw std::invalid_argument("classify: expected a 2-channel residual");
  std::vector<std::uint8_t> mask(img.plane_size(), 0);
  const double* dd = img.plane(0);
  const double* di = img.plane(1);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (dd[i] > 0.0 && di[i] > 0.0 &&
        std::pow(dd[i], th.n_d) * std::pow(di[i], th.n_i) > th.delta_bar)
      mask[i] = 1;
  }
  return mask;
}

// Extracts frame f of a residual batch tensor into an Image.
template <class S>
Image delta_to_image(const Tensor<S>& batch, int frame) {
  const int c = batch.dim(1), h = batch.dim(2), w = batch.dim(3);
  Image img(h, w, c);
  const std::size_t plane = size_t(h) * w;
  const S* src = batch.values().data() + size_t(frame) * c * plane;
  for (std::size_t i = 0; i < plane * c; ++i) img.data[i] = static_cast<double>(src[i]);
  return img;
}

template <class S>
Tensor<S> image_to_tensor(const Image& img) {
  std::vector<S> vals(img.data.size());
  for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = static_cast<S>(img.data[i]);
  return Tensor<S>::from({1, img.c, img.h, img.w}, std::move(vals));
}

struct DenoiseResult {
  PointCloud kept;
  PointCloud removed;
  SnowMask mask;
};

// Full prediction pipeline for one cloud:
// preprocess -> forward -> restoration residual -> classify -> apply_mask.
// Points that never projected are kept (never classified as snow).
template <class S>
DenoiseResult denoise_cloud(LisnowNet<S>& net, const Thresholds& th, const PointCloud& cloud,
                            const ProjectionConfig& pcfg, const VoidFillConfig& vf = {}) {
  const RangeImage img = preprocess(cloud, pcfg, vf);
  const ResidualImage res = restoration_residual(net.infer(img.data));
  const auto pixel_mask = classify(res, th);
  auto split = apply_mask(cloud, img, pixel_mask);

  DenoiseResult out;
  out.kept = std::move(split.kept);
  out.removed = std::move(split.removed);
  out.mask.point_snow = std::move(split.point_removed);
  out.mask.score_d.assign(cloud.points.size(), 0.0f);
  out.mask.score_i.assign(cloud.points.size(), 0.0f);
  const std::size_t n_pix = img.data.plane_size();
  for (std::size_t pix = 0; pix < n_pix; ++pix) {
    auto [first, last] = img.pixel_points(static_cast<int>(pix));
    for (auto* it = first; it != last; ++it) {
      out.mask.score_d[*it] = static_cast<float>(res.delta.data[pix]);
      out.mask.score_i[*it] = static_cast<float>(res.delta.data[n_pix + pix]);
    }
  }
  return out;
}

}  // namespace lisnow

#endif  // LISNOW_NET_HPP
