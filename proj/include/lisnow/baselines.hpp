#ifndef LISNOW_BASELINES_HPP
#define LISNOW_BASELINES_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "lisnow/point_cloud.hpp"
#include "lisnow/range_image.hpp"

namespace lisnow {

// Exact 3D kd-tree for radius counting and k-nearest-neighbor queries.
// Median-split build; leaves hold small linear-scan buckets. Results are
// exact, which the baseline contracts require (masks must equal brute force).
class KdTree3 {
 public:
  explicit KdTree3(const std::vector<Point>& points) : pts_(points) {
    idx_.resize(points.size());
    for (std::size_t i = 0; i < idx_.size(); ++i) idx_[i] = static_cast<std::uint32_t>(i);
    if (!idx_.empty()) root_ = build(0, idx_.size(), 0);
  }

  // Number of points within radius r of q (including any point equal to q).
  int count_within(const Point& q, double r) const {
    if (idx_.empty()) return 0;
    int count = 0;
    count_rec(root_, q, r * r, count);
    return count;
  }

  // Collects every point within radius r of q with its distance, sorted by
  // distance (ties by index). This mirrors the materialize-then-inspect
  // radius search the published outlier filters are built on.
  void radius_collect(const Point& q, double r, std::vector<std::uint32_t>& indices,
                      std::vector<float>& distances) const {
    indices.clear();
    distances.clear();
    if (idx_.empty()) return;
    collect_rec(root_, q, r * r, indices, distances);
    std::vector<std::uint32_t> order(indices.size());
    for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
      if (distances[a] != distances[b]) return distances[a] < distances[b];
      return indices[a] < indices[b];
    });
    std::vector<std::uint32_t> si(indices.size());
    std::vector<float> sd(distances.size());
    for (std::uint32_t i = 0; i < order.size(); ++i) {
      si[i] = indices[order[i]];
      sd[i] = distances[order[i]];
    }
    indices.swap(si);
    distances.swap(sd);
  }

  // Mean distance to the k nearest neighbors, excluding the point at
  // skip_index. Requires k valid neighbors to exist.
  double knn_mean_distance(const Point& q, int k, std::uint32_t skip_index) const {
    std::vector<double> heap;  // max-heap of squared distances, size <= k
    heap.reserve(k);
    knn_rec(root_, q, k, skip_index, heap);
    double sum = 0.0;
    for (double d2 : heap) sum += std::sqrt(d2);
    return sum / double(k);
  }

 private:
  struct NodeRef {
    int node = -1;
  };
  struct Node {
    int axis = -1;  // -1 for leaves
    float split = 0.0f;
    std::uint32_t begin = 0, end = 0;  // leaf range into idx_
    int left = -1, right = -1;
  };

  static double sqdist(const Point& a, const Point& b) {
    const double dx = double(a.x) - b.x, dy = double(a.y) - b.y, dz = double(a.z) - b.z;
    return dx * dx + dy * dy + dz * dz;
  }
  static float coord(const Point& p, int axis) { return axis == 0 ? p.x : (axis == 1 ? p.y : p.z); }

  int build(std::size_t begin, std::size_t end, int depth) {
    Node node;
    if (end - begin <= 16) {
      node.begin = static_cast<std::uint32_t>(begin);
      node.end = static_cast<std::uint32_t>(end);
      nodes_.push_back(node);
      return static_cast<int>(nodes_.size() - 1);
    }
    const int axis = depth % 3;
    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(idx_.begin() + begin, idx_.begin() + mid, idx_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) {
                       return coord(pts_[a], axis) < coord(pts_[b], axis);
                     });
    node.axis = axis;
    node.split = coord(pts_[idx_[mid]], axis);
    const int self = static_cast<int>(nodes_.size());
    nodes_.push_back(node);
    const int left = build(begin, mid, depth + 1);
    const int right = build(mid, end, depth + 1);
    nodes_[self].left = left;
    nodes_[self].right = right;
    return self;
  }

  void count_rec(int ni, const Point& q, double r2, int& count) const {
    const Node& n = nodes_[ni];
    if (n.axis < 0) {
      for (std::uint32_t i = n.begin; i < n.end; ++i)
        if (sqdist(pts_[idx_[i]], q) <= r2) ++count;
      return;
    }
    const double diff = double(coord(q, n.axis)) - n.split;
    const int near = diff < 0.0 ? n.left : n.right;
    const int far = diff < 0.0 ? n.right : n.left;
    count_rec(near, q, r2, count);
    if (diff * diff <= r2) count_rec(far, q, r2, count);
  }

  void collect_rec(int ni, const Point& q, double r2, std::vector<std::uint32_t>& indices,
                   std::vector<float>& distances) const {
    const Node& n = nodes_[ni];
    if (n.axis < 0) {
      for (std::uint32_t i = n.begin; i < n.end; ++i) {
        const double d2 = sqdist(pts_[idx_[i]], q);
        if (d2 <= r2) {
          indices.push_back(idx_[i]);
          distances.push_back(static_cast<float>(std::sqrt(d2)));
        }
      }
      return;
    }
    const double diff = double(coord(q, n.axis)) - n.split;
    const int near = diff < 0.0 ? n.left : n.right;
    const int far = diff < 0.0 ? n.right : n.left;
    collect_rec(near, q, r2, indices, distances);
    if (diff * diff <= r2) collect_rec(far, q, r2, indices, distances);
  }

  void knn_rec(int ni, const Point& q, int k, std::uint32_t skip,
               std::vector<double>& heap) const {
    const Node& n = nodes_[ni];
    if (n.axis < 0) {
      for (std::uint32_t i = n.begin; i < n.end; ++i) {
        if (idx_[i] == skip) continue;
        const double d2 = sqdist(pts_[idx_[i]], q);
        if (static_cast<int>(heap.size()) < k) {
          heap.push_back(d2);
          std::push_heap(heap.begin(), heap.end());
        } else if (d2 < heap.front()) {
          std::pop_heap(heap.begin(), heap.end());
          heap.back() = d2;
          std::push_heap(heap.begin(), heap.end());
        }
      }
      return;
    }
    const double diff = double(coord(q, n.axis)) - n.split;
    const int near = diff < 0.0 ? n.left : n.right;
    const int far = diff < 0.0 ? n.right : n.left;
    knn_rec(near, q, k, skip, heap);
    if (static_cast<int>(heap.size()) < k || diff * diff < heap.front())
      knn_rec(far, q, k, skip, heap);
  }

  const std::vector<Point>& pts_;
  std::vector<std::uint32_t> idx_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

struct DrorConfig {
  double radius_multiplier = 3.0;
  double azimuth_resolution = 6.283185307179586 / 2048.0;  // radians
  double min_radius = 0.04;                                // meters
  int min_neighbors = 3;

  void validate() const {
    if (!(radius_multiplier > 0.0) || !(azimuth_resolution > 0.0) || !(min_radius > 0.0) ||
        min_neighbors < 1)
      throw std::invalid_argument("bad DROR config");
  }
};

// Dynamic-radius outlier removal: the search radius grows with range, points
// with too few neighbors inside it are flagged as snow. true = outlier.
// The per-point query materializes the sorted neighbor list, as the reference
// implementations of this filter family do, and then inspects its size.
inline std::vector<std::uint8_t> dror(const PointCloud& cloud, const DrorConfig& cfg) {
  cfg.validate();
  std::vector<std::uint8_t> mask(cloud.size(), 0);
  if (cloud.points.empty()) return mask;
  KdTree3 tree(cloud.points);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    const double d = std::sqrt(double(p.x) * p.x + double(p.y) * p.y + double(p.z) * p.z);
    const double r = std::max(cfg.min_radius, cfg.radius_multiplier * d * cfg.azimuth_resolution);
    std::vector<std::uint32_t> neighbor_indices;
    std::vector<float> neighbor_distances;
    tree.radius_collect(p, r, neighbor_indices, neighbor_distances);
    const int neighbors = static_cast<int>(neighbor_indices.size()) - 1;  // self excluded
    mask[i] = neighbors < cfg.min_neighbors;
  }
  return mask;
}

struct DsorConfig {
  int k_neighbors = 5;
  double stddev_multiplier = 0.01;
  double range_multiplier = 0.05;

  void validate() const {
    if (k_neighbors < 1 || !(stddev_multiplier > 0.0) || !(range_multiplier > 0.0))
      throw std::invalid_argument("bad DSOR config");
  }
};

// Statistical outlier removal with a range-scaled threshold: per-point mean
// kNN distance against a global threshold that shrinks for nearby points.
inline std::vector<std::uint8_t> dsor(const PointCloud& cloud, const DsorConfig& cfg) {
  cfg.validate();
  const std::size_t n = cloud.size();
  if (n <= static_cast<std::size_t>(cfg.k_neighbors))
    throw DataError("dsor: cloud of " + std::to_string(n) + " points is too small for k=" +
                    std::to_string(cfg.k_neighbors));
  KdTree3 tree(cloud.points);
  std::vector<double> mean_dist(n);
  for (std::size_t i = 0; i < n; ++i)
    mean_dist[i] =
        tree.knn_mean_distance(cloud.points[i], cfg.k_neighbors, static_cast<std::uint32_t>(i));
  double mu = 0.0;
  for (double v : mean_dist) mu += v;
  mu /= double(n);
  double var = 0.0;
  for (double v : mean_dist) var += (v - mu) * (v - mu);
  const double sigma = std::sqrt(var / double(n));
  const double t_global = mu + cfg.stddev_multiplier * sigma;

  std::vector<std::uint8_t> mask(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = cloud.points[i];
    const double d = std::sqrt(double(p.x) * p.x + double(p.y) * p.y + double(p.z) * p.z);
    const double t_dynamic = t_global * cfg.range_multiplier * d;
    mask[i] = mean_dist[i] > t_dynamic;
  }
  return mask;
}

struct MedianConfig {
  int window = 5;
  double tau_d = 0.05;  // darker-than-median margins, g1 units
  double tau_i = 0.05;

  void validate() const {
    if (window < 3 || window % 2 == 0 || !(tau_d > 0.0) || !(tau_i > 0.0))
      throw std::invalid_argument("bad median filter config");
  }
};

// Asymmetric windowed median filter on a preprocessed (g1-scaled) range
// image: a valid pixel is flagged iff it is darker than its windowed median
// by the margin in BOTH channels. Brighter outliers are never flagged.
// Window neighbors wrap horizontally, replicate vertically, and skip pixels
// that never held a point.
inline std::vector<std::uint8_t> median_filter(const RangeImage& img,
                                               const MedianConfig& cfg = {}) {
  cfg.validate();
  const int h = img.h(), w = img.w(), half = cfg.window / 2;
  const std::size_t n_pix = size_t(h) * w;
  std::vector<std::uint8_t> mask(n_pix, 0);
  const double* dplane = img.data.plane(0);
  const double* iplane = img.data.plane(1);
  std::vector<double> wd, wi;
  wd.reserve(size_t(cfg.window) * cfg.window);
  wi.reserve(wd.capacity());

  auto median_of = [](std::vector<double>& vals) {
    const std::size_t m = vals.size() / 2;
    std::nth_element(vals.begin(), vals.begin() + m, vals.end());
    double med = vals[m];
    if (vals.size() % 2 == 0)
      med = 0.5 * (med + *std::max_element(vals.begin(), vals.begin() + m));
    return med;
  };

  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t pix = size_t(y) * w + x;
      if (!img.valid[pix]) continue;
      wd.clear();
      wi.clear();
      const bool interior = x >= half && x < w - half;
      for (int dy = -half; dy <= half; ++dy) {
        const std::size_t row = size_t(std::clamp(y + dy, 0, h - 1)) * w;
        if (interior) {
          for (int dx = -half; dx <= half; ++dx) {
            const std::size_t q = row + x + dx;
            if (img.valid[q]) {
              wd.push_back(dplane[q]);
              wi.push_back(iplane[q]);
            }
          }
        } else {
          for (int dx = -half; dx <= half; ++dx) {
            const std::size_t q = row + (x + dx + w) % w;
            if (img.valid[q]) {
              wd.push_back(dplane[q]);
              wi.push_back(iplane[q]);
            }
          }
        }
      }
      if (!(dplane[pix] < median_of(wd) - cfg.tau_d)) continue;
      if (iplane[pix] < median_of(wi) - cfg.tau_i) mask[pix] = 1;
    }
  return mask;
}

}  // namespace lisnow

#endif  // LISNOW_BASELINES_HPP
