#ifndef LISNOW_TRANSFORMS_HPP
#define LISNOW_TRANSFORMS_HPP

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace lisnow {

// Planar multi-channel image: channel plane ch starts at ch*h*w, rows are
// contiguous. Used for range images, residuals and the transform inputs.
struct Image {
  int h = 0;
  int w = 0;
  int c = 1;
  std::vector<double> data;

  Image() = default;
  Image(int h_, int w_, int c_ = 1) : h(h_), w(w_), c(c_), data(size_t(h_) * w_ * c_, 0.0) {}

  double& at(int ch, int y, int x) { return data[(size_t(ch) * h + y) * w + x]; }
  double at(int ch, int y, int x) const { return data[(size_t(ch) * h + y) * w + x]; }
  double* plane(int ch) { return data.data() + size_t(ch) * h * w; }
  const double* plane(int ch) const { return data.data() + size_t(ch) * h * w; }
  std::size_t plane_size() const { return size_t(h) * w; }
};

// Four orientation subbands of a single-level 2D Haar decomposition,
// one (h/2)x(w/2) plane per channel in each band.
struct Subbands {
  int h2 = 0;
  int w2 = 0;
  int c = 1;
  std::vector<double> ll, lh, hl, hh;

  Subbands() = default;
  Subbands(int h2_, int w2_, int c_)
      : h2(h2_), w2(w2_), c(c_),
        ll(size_t(h2_) * w2_ * c_, 0.0), lh(ll.size(), 0.0), hl(ll.size(), 0.0),
        hh(ll.size(), 0.0) {}

  std::size_t plane_size() const { return size_t(h2) * w2; }
};

namespace detail {

inline bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

// Orthonormal Haar analysis of one plane. Per 2x2 block [[a,b],[c,d]]:
//   ll=(a+b+c+d)/2  hl=(a+b-c-d)/2  lh=(a-b+c-d)/2  hh=(a-b-c+d)/2
template <class T>
void haar_analysis_plane(const T* src, int h, int w, T* ll, T* lh, T* hl, T* hh) {
  const int h2 = h / 2, w2 = w / 2;
  for (int y = 0; y < h2; ++y) {
    const T* r0 = src + size_t(2 * y) * w;
    const T* r1 = r0 + w;
    for (int x = 0; x < w2; ++x) {
      const T a = r0[2 * x], b = r0[2 * x + 1], c = r1[2 * x], d = r1[2 * x + 1];
      ll[size_t(y) * w2 + x] = (a + b + c + d) / 2;
      hl[size_t(y) * w2 + x] = (a + b - c - d) / 2;
      lh[size_t(y) * w2 + x] = (a - b + c - d) / 2;
      hh[size_t(y) * w2 + x] = (a - b - c + d) / 2;
    }
  }
}

template <class T>
void haar_synthesis_plane(const T* ll, const T* lh, const T* hl, const T* hh, int h2, int w2,
                          T* dst) {
  const int w = 2 * w2;
  for (int y = 0; y < h2; ++y) {
    T* r0 = dst + size_t(2 * y) * w;
    T* r1 = r0 + w;
    for (int x = 0; x < w2; ++x) {
      const std::size_t i = size_t(y) * w2 + x;
      const T s = ll[i], v = hl[i], u = lh[i], q = hh[i];
      r0[2 * x] = (s + v + u + q) / 2;
      r0[2 * x + 1] = (s + v - u - q) / 2;
      r1[2 * x] = (s - v + u - q) / 2;
      r1[2 * x + 1] = (s - v - u + q) / 2;
    }
  }
}

// Iterative radix-2 complex FFT, unnormalized, in place.
// inverse=true uses the +i kernel; no 1/n scaling is applied either way.
template <class T>
void fft_inplace(T* re, T* im, int n, bool inverse) {
  if (!is_pow2(n)) throw std::invalid_argument("fft length must be a power of two");
  // bit reversal
  for (int i = 1, j = 0; i < n; ++i) {
    int bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      std::swap(re[i], re[j]);
      std::swap(im[i], im[j]);
    }
  }
  for (int len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? 2.0 : -2.0) * 3.141592653589793238462643383279502884 / len;
    const T wr = static_cast<T>(std::cos(ang));
    const T wi = static_cast<T>(std::sin(ang));
    for (int i = 0; i < n; i += len) {
      T cr = 1, ci = 0;
      for (int k = 0; k < len / 2; ++k) {
        const int a = i + k, b = i + k + len / 2;
        const T tr = re[b] * cr - im[b] * ci;
        const T ti = re[b] * ci + im[b] * cr;
        re[b] = re[a] - tr;
        im[b] = im[a] - ti;
        re[a] += tr;
        im[a] += ti;
        const T ncr = cr * wr - ci * wi;
        ci = cr * wi + ci * wr;
        cr = ncr;
      }
    }
  }
}

// 2D FFT over an h*w plane (rows, then columns).
template <class T>
void fft2_inplace(T* re, T* im, int h, int w, bool inverse) {
  for (int y = 0; y < h; ++y) fft_inplace(re + size_t(y) * w, im + size_t(y) * w, w, inverse);
  std::vector<T> cre(h), cim(h);
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) {
      cre[y] = re[size_t(y) * w + x];
      cim[y] = im[size_t(y) * w + x];
    }
    fft_inplace(cre.data(), cim.data(), h, inverse);
    for (int y = 0; y < h; ++y) {
      re[size_t(y) * w + x] = cre[y];
      im[size_t(y) * w + x] = cim[y];
    }
  }
}

}  // namespace detail

inline Subbands dwt2_haar(const Image& img) {
  if (img.h % 2 != 0 || img.w % 2 != 0)
    throw std::invalid_argument("dwt2_haar requires even dimensions, got " +
                                std::to_string(img.h) + "x" + std::to_string(img.w));
  Subbands sb(img.h / 2, img.w / 2, img.c);
  for (int ch = 0; ch < img.c; ++ch)
    detail::haar_analysis_plane(img.plane(ch), img.h, img.w,
                                sb.ll.data() + ch * sb.plane_size(),
                                sb.lh.data() + ch * sb.plane_size(),
                                sb.hl.data() + ch * sb.plane_size(),
                                sb.hh.data() + ch * sb.plane_size());
  return sb;
}

inline Image idwt2_haar(const Subbands& sb) {
  if (sb.ll.size() != sb.plane_size() * sb.c || sb.lh.size() != sb.ll.size() ||
      sb.hl.size() != sb.ll.size() || sb.hh.size() != sb.ll.size())
    throw std::invalid_argument("idwt2_haar: inconsistent subband shapes");
  Image img(sb.h2 * 2, sb.w2 * 2, sb.c);
  for (int ch = 0; ch < sb.c; ++ch)
    detail::haar_synthesis_plane(sb.ll.data() + ch * sb.plane_size(),
                                 sb.lh.data() + ch * sb.plane_size(),
                                 sb.hl.data() + ch * sb.plane_size(),
                                 sb.hh.data() + ch * sb.plane_size(), sb.h2, sb.w2,
                                 img.plane(ch));
  return img;
}

// Repacks subbands into the original image shape as quadrants
// [[ll, hl], [lh, hh]].
inline Image pack_subbands(const Subbands& sb) {
  Image img(sb.h2 * 2, sb.w2 * 2, sb.c);
  for (int ch = 0; ch < sb.c; ++ch)
    for (int y = 0; y < sb.h2; ++y)
      for (int x = 0; x < sb.w2; ++x) {
        const std::size_t i = ch * sb.plane_size() + size_t(y) * sb.w2 + x;
        img.at(ch, y, x) = sb.ll[i];
        img.at(ch, y, x + sb.w2) = sb.hl[i];
        img.at(ch, y + sb.h2, x) = sb.lh[i];
        img.at(ch, y + sb.h2, x + sb.w2) = sb.hh[i];
      }
  return img;
}

// Full-spectrum log magnitude of the 2D DFT, per channel:
// out(u,v) = log(|X(u,v)| + 1). The redundant conjugate half is kept so the
// output shape matches the input.
inline Image fft2_logmag(const Image& img) {
  Image out(img.h, img.w, img.c);
  std::vector<double> re(img.plane_size()), im(img.plane_size());
  for (int ch = 0; ch < img.c; ++ch) {
    const double* src = img.plane(ch);
    std::copy(src, src + img.plane_size(), re.begin());
    std::fill(im.begin(), im.end(), 0.0);
    detail::fft2_inplace(re.data(), im.data(), img.h, img.w, false);
    double* dst = out.plane(ch);
    for (std::size_t i = 0; i < img.plane_size(); ++i)
      dst[i] = std::log1p(std::hypot(re[i], im[i]));
  }
  return out;
}

}  // namespace lisnow

#endif  // LISNOW_TRANSFORMS_HPP
