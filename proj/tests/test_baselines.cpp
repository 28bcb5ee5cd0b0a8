#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "lisnow/baselines.hpp"
#include "lisnow/rng.hpp"
#include "lisnow/synth.hpp"

using namespace lisnow;

namespace {

double dist3(const Point& a, const Point& b) {
  const double dx = double(a.x) - b.x, dy = double(a.y) - b.y, dz = double(a.z) - b.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

// O(n^2) references
std::vector<std::uint8_t> dror_brute(const PointCloud& cloud, const DrorConfig& cfg) {
  std::vector<std::uint8_t> mask(cloud.size(), 0);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    const double d = std::sqrt(double(p.x) * p.x + double(p.y) * p.y + double(p.z) * p.z);
    const double r = std::max(cfg.min_radius, cfg.radius_multiplier * d * cfg.azimuth_resolution);
    int neighbors = 0;
    for (std::size_t j = 0; j < cloud.size(); ++j)
      if (j != i && dist3(cloud.points[i], cloud.points[j]) <= r) ++neighbors;
    mask[i] = neighbors < cfg.min_neighbors;
  }
  return mask;
}

std::vector<std::uint8_t> dsor_brute(const PointCloud& cloud, const DsorConfig& cfg) {
  const std::size_t n = cloud.size();
  std::vector<double> mean_dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> d;
    d.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) d.push_back(dist3(cloud.points[i], cloud.points[j]));
    std::sort(d.begin(), d.end());
    double sum = 0;
    for (int k = 0; k < cfg.k_neighbors; ++k) sum += d[k];
    mean_dist[i] = sum / cfg.k_neighbors;
  }
  double mu = 0;
  for (double v : mean_dist) mu += v;
  mu /= double(n);
  double var = 0;
  for (double v : mean_dist) var += (v - mu) * (v - mu);
  const double t_global = mu + cfg.stddev_multiplier * std::sqrt(var / double(n));
  std::vector<std::uint8_t> mask(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = cloud.points[i];
    const double d = std::sqrt(double(p.x) * p.x + double(p.y) * p.y + double(p.z) * p.z);
    mask[i] = mean_dist[i] > t_global * cfg.range_multiplier * d;
  }
  return mask;
}

PointCloud random_cloud(RngState& rng, std::size_t n, double extent = 40.0) {
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i)
    c.points.push_back({static_cast<float>(rng.uniform(-extent, extent)),
                        static_cast<float>(rng.uniform(-extent, extent)),
                        static_cast<float>(rng.uniform(-4, 4)),
                        static_cast<float>(rng.uniform(0, 1))});
  return c;
}

}  // namespace

TEST_CASE("dror: an isolated point is an outlier, empty cloud is fine") {
  PointCloud cloud;
  cloud.points.push_back({100, 0, 0, 0.5f});
  cloud.points.push_back({0, 1, 0, 0.5f});
  cloud.points.push_back({0, 1.001f, 0, 0.5f});
  const auto mask = dror(cloud, {});
  CHECK(mask[0] == 1);
  CHECK(dror(PointCloud{}, {}).empty());
}

TEST_CASE("dror: a dense close-range cluster is kept under defaults") {
  // 3x3x3 lattice, 1 cm spacing, centered 5 m ahead: radius at 5 m is
  // max(0.04, 3 * 5 * 2pi/2048) = 0.046, so every point keeps >= 3 neighbors.
  PointCloud cloud;
  for (int ix = 0; ix < 3; ++ix)
    for (int iy = 0; iy < 3; ++iy)
      for (int iz = 0; iz < 3; ++iz)
        cloud.points.push_back({static_cast<float>(5.0 + 0.01 * ix),
                                static_cast<float>(0.01 * iy),
                                static_cast<float>(0.01 * iz), 0.5f});
  const auto mask = dror(cloud, {});
  const auto brute = dror_brute(cloud, {});
  CHECK(mask == brute);
  for (auto v : mask) CHECK(v == 0);
}

TEST_CASE("dror and dsor masks equal brute force on random clouds across configs") {
  RngState rng(1234);
  const std::vector<DrorConfig> dror_cfgs = {
      {},
      {2.0, 6.283185307179586 / 1024.0, 0.1, 2},
      {5.0, 6.283185307179586 / 2048.0, 0.02, 5},
  };
  const std::vector<DsorConfig> dsor_cfgs = {
      {},
      {3, 0.5, 0.1},
      {8, 1.0, 0.02},
  };
  for (int trial = 0; trial < 22; ++trial) {
    const std::size_t n = 60 + rng.uniform_u64(400);
    // mix of diffuse points and a dense cluster so both labels appear
    auto cloud = random_cloud(rng, n);
    const float cx = static_cast<float>(rng.uniform(-10, 10));
    const float cy = static_cast<float>(rng.uniform(-10, 10));
    for (int j = 0; j < 40; ++j)
      cloud.points.push_back({cx + static_cast<float>(rng.uniform(-0.05, 0.05)),
                              cy + static_cast<float>(rng.uniform(-0.05, 0.05)),
                              static_cast<float>(rng.uniform(-0.05, 0.05)), 0.5f});
    const auto& dror_cfg = dror_cfgs[trial % dror_cfgs.size()];
    CHECK(dror(cloud, dror_cfg) == dror_brute(cloud, dror_cfg));
    const auto& dsor_cfg = dsor_cfgs[trial % dsor_cfgs.size()];
    CHECK(dsor(cloud, dsor_cfg) == dsor_brute(cloud, dsor_cfg));
  }
}

TEST_CASE("dror is monotone in min_neighbors") {
  RngState rng(77);
  auto cloud = random_cloud(rng, 300, 25.0);
  DrorConfig lo{}, hi{};
  lo.min_neighbors = 2;
  hi.min_neighbors = 6;
  const auto mask_lo = dror(cloud, lo);
  const auto mask_hi = dror(cloud, hi);
  for (std::size_t i = 0; i < cloud.size(); ++i)
    if (mask_lo[i]) CHECK(mask_hi[i]);  // raising the bar never un-flags
}

TEST_CASE("dsor: uniform lattice has no outliers, displaced point is flagged") {
  PointCloud lattice;
  for (int ix = 0; ix < 6; ++ix)
    for (int iy = 0; iy < 6; ++iy)
      lattice.points.push_back(
          {static_cast<float>(10.0 + 0.1 * ix), static_cast<float>(0.1 * iy), 0.0f, 0.5f});
  DsorConfig cfg;
  cfg.k_neighbors = 4;
  cfg.stddev_multiplier = 1.0;
  cfg.range_multiplier = 0.3;  // threshold ~ t_g * 3 at 10 m, well above the 0.1 m spacing
  auto mask = dsor(lattice, cfg);
  CHECK(mask == dsor_brute(lattice, cfg));
  for (auto v : mask) CHECK(v == 0);

  auto with_outlier = lattice;
  with_outlier.points.push_back({10.3f, 0.3f, 2.0f, 0.1f});  // 20x the spacing, off-plane
  mask = dsor(with_outlier, cfg);
  CHECK(mask == dsor_brute(with_outlier, cfg));
  CHECK(mask.back() == 1);
}

TEST_CASE("dsor rejects clouds with too few points") {
  PointCloud tiny;
  for (int i = 0; i < 5; ++i)
    tiny.points.push_back({static_cast<float>(i), 0, 0, 0.5f});
  DsorConfig cfg;  // k = 5
  CHECK_THROWS_AS(dsor(tiny, cfg), DataError);
}

TEST_CASE("median filter: constant images are never flagged") {
  RangeImage img;
  img.data = Image(8, 16, 2);
  img.valid.assign(128, 1);
  img.pixel_offsets.assign(129, 0);
  std::fill(img.data.data.begin(), img.data.data.end(), 1.5);
  for (double tau : {0.01, 0.05, 0.5}) {
    MedianConfig cfg;
    cfg.tau_d = tau;
    cfg.tau_i = tau;
    const auto mask = median_filter(img, cfg);
    for (auto v : mask) CHECK(v == 0);
  }
}

TEST_CASE("median filter flags an isolated dark pixel in both channels") {
  RangeImage img;
  img.data = Image(8, 16, 2);
  img.valid.assign(128, 1);
  img.pixel_offsets.assign(129, 0);
  std::fill(img.data.data.begin(), img.data.data.end(), 2.0);
  MedianConfig cfg;  // tau = 0.05
  img.data.at(0, 4, 8) = 2.0 - 10 * cfg.tau_d;
  img.data.at(1, 4, 8) = 2.0 - 10 * cfg.tau_i;
  const auto mask = median_filter(img, cfg);
  CHECK(mask[4 * 16 + 8] == 1);
  std::size_t flagged = 0;
  for (auto v : mask) flagged += v;
  CHECK(flagged == 1);
}

TEST_CASE("median filter never flags brighter-than-median outliers") {
  RangeImage img;
  img.data = Image(8, 16, 2);
  img.valid.assign(128, 1);
  img.pixel_offsets.assign(129, 0);
  std::fill(img.data.data.begin(), img.data.data.end(), 1.0);
  img.data.at(0, 3, 5) = 5.0;
  img.data.at(1, 3, 5) = 5.0;
  const auto mask = median_filter(img, {});
  for (auto v : mask) CHECK(v == 0);
}

TEST_CASE("median filter: dark pixel in one channel only is not snow") {
  RangeImage img;
  img.data = Image(8, 16, 2);
  img.valid.assign(128, 1);
  img.pixel_offsets.assign(129, 0);
  std::fill(img.data.data.begin(), img.data.data.end(), 2.0);
  img.data.at(0, 4, 8) = 0.5;  // dark in distance, normal in intensity
  const auto mask = median_filter(img, {});
  for (auto v : mask) CHECK(v == 0);
}

TEST_CASE("median filter skips void pixels and excludes them from windows") {
  RangeImage img;
  img.data = Image(6, 12, 2);
  img.valid.assign(72, 0);
  img.pixel_offsets.assign(73, 0);
  // single valid dark pixel: its window median is itself, so no flag
  img.valid[3 * 12 + 6] = 1;
  img.data.at(0, 3, 6) = 0.2;
  img.data.at(1, 3, 6) = 0.2;
  const auto mask = median_filter(img, {});
  for (auto v : mask) CHECK(v == 0);
}
