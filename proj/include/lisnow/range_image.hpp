#ifndef LISNOW_RANGE_IMAGE_HPP
#define LISNOW_RANGE_IMAGE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "lisnow/common.hpp"
#include "lisnow/point_cloud.hpp"
#include "lisnow/transforms.hpp"

namespace lisnow {

struct ProjectionConfig {
  int h = 64;
  int w = 2048;
  double fov_min = -25.0 * 3.141592653589793 / 180.0;  // inclination, radians
  double fov_max = 3.0 * 3.141592653589793 / 180.0;

  void validate() const {
    if (h < 2 || w < 4 || !(fov_min < fov_max))
      throw std::invalid_argument("bad projection config");
  }
};

struct VoidFillConfig {
  double dog_sigma1 = 0.5;
  double dog_sigma2 = 1.0;
};

// Two-channel panoramic range image. Channel 0 is distance (meters before
// compress(), cube-root meters after), channel 1 is intensity. valid marks
// pixels that received at least one point; pixel point lists are stored in
// CSR form, nearest point first.
struct RangeImage {
  Image data;  // c = 2
  std::vector<std::uint8_t> valid;
  std::vector<std::uint32_t> pixel_offsets;  // size h*w + 1
  std::vector<std::uint32_t> pixel_indices;  // point indices into the source cloud
  double fov_min = 0.0;
  double fov_max = 0.0;
  std::size_t dropped = 0;  // points outside the FOV or at the origin

  int h() const { return data.h; }
  int w() const { return data.w; }

  std::pair<const std::uint32_t*, const std::uint32_t*> pixel_points(int pix) const {
    return {pixel_indices.data() + pixel_offsets[pix],
            pixel_indices.data() + pixel_offsets[pix + 1]};
  }
};

// Spherical projection. Row binning is uniform in inclination over the FOV;
// column binning is uniform in azimuth with wrap-around. The nearest point
// in a pixel defines the pixel value.
inline RangeImage project(const PointCloud& cloud, const ProjectionConfig& cfg) {
  cfg.validate();
  if (cloud.points.empty()) throw DataError("project: empty cloud");

  const std::size_t n = cloud.points.size();
  const double fov_span = cfg.fov_max - cfg.fov_min;
  const double two_pi = 6.283185307179586476925286766559;

  std::vector<std::int32_t> pix_of(n, -1);
  std::vector<double> dist(n, 0.0);
  std::size_t dropped = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = cloud.points[i];
    const double d = std::sqrt(double(p.x) * p.x + double(p.y) * p.y + double(p.z) * p.z);
    if (d <= 0.0) {  // direction undefined at the origin
      ++dropped;
      continue;
    }
    const double phi = std::asin(std::clamp(double(p.z) / d, -1.0, 1.0));
    if (phi < cfg.fov_min || phi > cfg.fov_max) {
      ++dropped;
      continue;
    }
    const double psi = (p.x == 0.0f && p.y == 0.0f) ? 0.0 : std::atan2(double(p.y), double(p.x));
    int row = static_cast<int>(std::floor((cfg.fov_max - phi) / fov_span * cfg.h));
    row = std::clamp(row, 0, cfg.h - 1);
    int col = static_cast<int>(std::floor((psi + 3.141592653589793238462643) / two_pi * cfg.w));
    col = ((col % cfg.w) + cfg.w) % cfg.w;
    pix_of[i] = row * cfg.w + col;
    dist[i] = d;
  }

  const std::size_t n_pix = size_t(cfg.h) * cfg.w;
  RangeImage img;
  img.data = Image(cfg.h, cfg.w, 2);
  img.valid.assign(n_pix, 0);
  img.fov_min = cfg.fov_min;
  img.fov_max = cfg.fov_max;
  img.dropped = dropped;

  img.pixel_offsets.assign(n_pix + 1, 0);
  for (std::size_t i = 0; i < n; ++i)
    if (pix_of[i] >= 0) ++img.pixel_offsets[pix_of[i] + 1];
  std::partial_sum(img.pixel_offsets.begin(), img.pixel_offsets.end(),
                   img.pixel_offsets.begin());
  img.pixel_indices.resize(img.pixel_offsets.back());
  {
    std::vector<std::uint32_t> cursor(img.pixel_offsets.begin(), img.pixel_offsets.end() - 1);
    for (std::size_t i = 0; i < n; ++i)
      if (pix_of[i] >= 0) img.pixel_indices[cursor[pix_of[i]]++] = static_cast<std::uint32_t>(i);
  }
  for (std::size_t pix = 0; pix < n_pix; ++pix) {
    auto* first = img.pixel_indices.data() + img.pixel_offsets[pix];
    auto* last = img.pixel_indices.data() + img.pixel_offsets[pix + 1];
    if (first == last) continue;
    std::sort(first, last, [&](std::uint32_t a, std::uint32_t b) {
      if (dist[a] != dist[b]) return dist[a] < dist[b];
      return a < b;
    });
    img.valid[pix] = 1;
    const std::uint32_t nearest = *first;
    img.data.data[pix] = dist[nearest];
    img.data.data[n_pix + pix] = cloud.points[nearest].intensity;
  }
  return img;
}

// Cube-root amplitude compression, both channels. Strictly monotone, so the
// nearest-point ordering inside a pixel is unchanged.
inline RangeImage compress(RangeImage img) {
  for (auto& v : img.data.data) v = std::cbrt(v);
  return img;
}

namespace detail {

inline void gaussian3x3(double sigma, double k[9]) {
  double sum = 0.0;
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx) {
      const double v = std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma));
      k[(dy + 1) * 3 + (dx + 1)] = v;
      sum += v;
    }
  for (int i = 0; i < 9; ++i) k[i] /= sum;
}

}  // namespace detail

// Void filling. Works per channel on a copy:
//   1. 3x3 grayscale dilation written only into void pixels that have at
//      least one originally-valid 8-neighbor (horizontal wrap).
//   2. remaining voids take mu_row + sigma_row computed over the row's
//      originally-valid pixels (image-global fallback for all-void rows).
//   3. subtract a 3x3 difference-of-Gaussians response.
//   4. 7x7 average pooling, stride 1, same size.
// Steps 3-4 use circular horizontal / replicate vertical padding. The result
// is composited back only at originally-void pixels, so every valid pixel
// keeps its exact input value.
inline RangeImage fill_voids(const RangeImage& img, const VoidFillConfig& vf = {}) {
  const int h = img.h(), w = img.w();
  const std::size_t n_pix = size_t(h) * w;
  RangeImage out = img;

  double g1k[9], g2k[9];
  detail::gaussian3x3(vf.dog_sigma1, g1k);
  detail::gaussian3x3(vf.dog_sigma2, g2k);
  double dog[9];
  for (int i = 0; i < 9; ++i) dog[i] = g1k[i] - g2k[i];

  std::vector<double> work(n_pix), step(n_pix);
  for (int ch = 0; ch < 2; ++ch) {
    const double* src = img.data.plane(ch);
    std::copy(src, src + n_pix, work.begin());

    // global stats over originally-valid pixels (fallback for all-void rows)
    double gsum = 0.0, gsum2 = 0.0;
    std::size_t gcount = 0;
    for (std::size_t i = 0; i < n_pix; ++i)
      if (img.valid[i]) {
        gsum += src[i];
        gsum2 += src[i] * src[i];
        ++gcount;
      }
    const double gmu = gcount ? gsum / gcount : 0.0;
    const double gsd = gcount ? std::sqrt(std::max(0.0, gsum2 / gcount - gmu * gmu)) : 0.0;

    // step 1: dilation into voids adjacent to valid pixels
    std::vector<std::uint8_t> dilated(n_pix, 0);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const std::size_t pix = size_t(y) * w + x;
        if (img.valid[pix]) continue;
        double m = 0.0;
        bool any = false;
        for (int dy = -1; dy <= 1; ++dy) {
          const int yy = y + dy;
          if (yy < 0 || yy >= h) continue;
          for (int dx = -1; dx <= 1; ++dx) {
            if (dy == 0 && dx == 0) continue;
            const int xx = (x + dx + w) % w;
            const std::size_t q = size_t(yy) * w + xx;
            if (img.valid[q] && (!any || src[q] > m)) {
              m = src[q];
              any = true;
            }
          }
        }
        if (any) {
          work[pix] = m;
          dilated[pix] = 1;
        }
      }

    // step 2: row statistics for the rest
    for (int y = 0; y < h; ++y) {
      double sum = 0.0, sum2 = 0.0;
      std::size_t count = 0;
      for (int x = 0; x < w; ++x) {
        const std::size_t pix = size_t(y) * w + x;
        if (img.valid[pix]) {
          sum += src[pix];
          sum2 += src[pix] * src[pix];
          ++count;
        }
      }
      const double mu = count ? sum / count : gmu;
      const double sd = count ? std::sqrt(std::max(0.0, sum2 / count - mu * mu)) : gsd;
      for (int x = 0; x < w; ++x) {
        const std::size_t pix = size_t(y) * w + x;
        if (!img.valid[pix] && !dilated[pix]) work[pix] = mu + sd;
      }
    }

    // step 3: subtract the DoG response
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double resp = 0.0;
        for (int dy = -1; dy <= 1; ++dy) {
          const int yy = std::clamp(y + dy, 0, h - 1);
          for (int dx = -1; dx <= 1; ++dx) {
            const int xx = (x + dx + w) % w;
            resp += dog[(dy + 1) * 3 + (dx + 1)] * work[size_t(yy) * w + xx];
          }
        }
        step[size_t(y) * w + x] = work[size_t(y) * w + x] - resp;
      }
    work.swap(step);

    // step 4: 7x7 average pooling, separable
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double s = 0.0;
        for (int dx = -3; dx <= 3; ++dx) s += work[size_t(y) * w + (x + dx + w) % w];
        step[size_t(y) * w + x] = s / 7.0;
      }
    for (int x = 0; x < w; ++x)
      for (int y = 0; y < h; ++y) {
        double s = 0.0;
        for (int dy = -3; dy <= 3; ++dy) s += step[size_t(std::clamp(y + dy, 0, h - 1)) * w + x];
        work[size_t(y) * w + x] = s / 7.0;
      }

    double* dst = out.data.plane(ch);
    for (std::size_t i = 0; i < n_pix; ++i)
      if (!img.valid[i]) dst[i] = work[i];
  }
  return out;
}

inline RangeImage preprocess(const PointCloud& cloud, const ProjectionConfig& cfg,
                             const VoidFillConfig& vf = {}) {
  return fill_voids(compress(project(cloud, cfg)), vf);
}

struct MaskedClouds {
  PointCloud kept;
  PointCloud removed;
  std::vector<std::uint8_t> point_removed;  // per source point
};

// Splits a cloud by a pixel mask: every point binned to a masked pixel is
// removed, everything else (including points that never projected) is kept.
inline MaskedClouds apply_mask(const PointCloud& cloud, const RangeImage& img,
                               const std::vector<std::uint8_t>& pixel_mask) {
  const std::size_t n_pix = size_t(img.h()) * img.w();
  if (pixel_mask.size() != n_pix)
    throw std::invalid_argument("apply_mask: mask shape mismatch");
  MaskedClouds out;
  out.point_removed.assign(cloud.points.size(), 0);
  for (std::size_t pix = 0; pix < n_pix; ++pix) {
    if (!pixel_mask[pix]) continue;
    auto [first, last] = img.pixel_points(static_cast<int>(pix));
    for (auto* it = first; it != last; ++it) out.point_removed[*it] = 1;
  }
  const bool labeled = cloud.has_labels();
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    auto& dst = out.point_removed[i] ? out.removed : out.kept;
    dst.points.push_back(cloud.points[i]);
    if (labeled) dst.labels.push_back(cloud.labels[i]);
  }
  out.kept.frame_id = cloud.frame_id;
  out.removed.frame_id = cloud.frame_id;
  return out;
}

// Flat binary export: h, w as little-endian uint32, then both channels as
// float32, row major.
inline void write_range_image_bin(const RangeImage& img, const std::string& path) {
  std::vector<char> bytes;
  bytes.reserve(8 + img.data.data.size() * 4);
  const std::uint32_t hw[2] = {static_cast<std::uint32_t>(img.h()),
                               static_cast<std::uint32_t>(img.w())};
  bytes.insert(bytes.end(), reinterpret_cast<const char*>(hw),
               reinterpret_cast<const char*>(hw) + 8);
  for (double v : img.data.data) {
    const float f = static_cast<float>(v);
    bytes.insert(bytes.end(), reinterpret_cast<const char*>(&f),
                 reinterpret_cast<const char*>(&f) + 4);
  }
  write_file_bytes(path, bytes.data(), bytes.size());
}

// Lossy 8-bit dump for eyeballing a channel (gamma 1/2.2 against the channel
// max). Debug only.
inline void write_range_image_pgm(const RangeImage& img, int channel, const std::string& path) {
  const double* plane = img.data.plane(channel);
  const std::size_t n_pix = img.data.plane_size();
  double mx = 0.0;
  for (std::size_t i = 0; i < n_pix; ++i) mx = std::max(mx, plane[i]);
  std::string header = "P5\n" + std::to_string(img.w()) + " " + std::to_string(img.h()) + "\n255\n";
  std::vector<char> bytes(header.begin(), header.end());
  for (std::size_t i = 0; i < n_pix; ++i) {
    const double norm = mx > 0 ? std::clamp(plane[i] / mx, 0.0, 1.0) : 0.0;
    bytes.push_back(static_cast<char>(static_cast<int>(255.0 * std::pow(norm, 1.0 / 2.2))));
  }
  write_file_bytes(path, bytes.data(), bytes.size());
}

}  // namespace lisnow

#endif  // LISNOW_RANGE_IMAGE_HPP
