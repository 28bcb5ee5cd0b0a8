#ifndef LISNOW_SYNTH_HPP
#define LISNOW_SYNTH_HPP

#include <cmath>
#include <stdexcept>
#include <vector>

#include "lisnow/point_cloud.hpp"
#include "lisnow/range_image.hpp"
#include "lisnow/rng.hpp"

namespace lisnow {

struct SynthLabels {
  static constexpr std::uint32_t kGround = 40;
  static constexpr std::uint32_t kStructure = 50;
  static constexpr std::uint32_t kSnow = 110;
};

// Deterministic synthetic winter scene on the sensor's ray grid: a ground
// plane plus 2-4 wall segments, with snow returns at uniformly random
// directions concentrated near the vehicle (<= 25 m, intensity <= 0.05).
// Single-return model: a snow return occludes the scene return of its ray.
// Labels: 40 ground, 50 structure, 110 snow.
inline PointCloud synth_scene(std::uint64_t seed, int n_beams, int n_cols, double snow_rate,
                              const ProjectionConfig& proto = {}) {
  if (snow_rate < 0.0 || snow_rate > 0.5)
    throw std::invalid_argument("synth_scene: snow_rate must be in [0, 0.5]");
  if (n_beams < 2 || n_cols < 4) throw std::invalid_argument("synth_scene: grid too small");

  const double fov_min = proto.fov_min, fov_max = proto.fov_max;
  const double span = fov_max - fov_min;
  const double two_pi = 6.283185307179586476925286766559;
  const double pi = 3.141592653589793238462643383279;
  const double sensor_z = 1.8;  // sensor height above ground
  const double ground_cap = 70.0;

  RngState rng(seed, RngState::hash_label("synth"));

  auto beam_incl = [&](int r) { return fov_max - (r + 0.5) / double(n_beams) * span; };
  auto col_azim = [&](int c) { return -pi + (c + 0.5) / double(n_cols) * two_pi; };

  // per-ray scene range / intensity / label
  const std::size_t n_rays = size_t(n_beams) * n_cols;
  std::vector<double> scene_d(n_rays, -1.0);
  std::vector<double> scene_i(n_rays, 0.0);
  std::vector<std::uint32_t> scene_label(n_rays, 0);

  const double ground_int = rng.uniform(0.32, 0.78);
  for (int r = 0; r < n_beams; ++r) {
    const double phi = beam_incl(r);
    if (std::sin(phi) < -1e-6) {
      const double d = sensor_z / -std::sin(phi);
      if (d <= ground_cap)
        for (int c = 0; c < n_cols; ++c) {
          scene_d[size_t(r) * n_cols + c] = d;
          scene_i[size_t(r) * n_cols + c] = ground_int;
          scene_label[size_t(r) * n_cols + c] = SynthLabels::kGround;
        }
    }
  }
  const int n_struct = 2 + static_cast<int>(rng.uniform_u64(3));  // 2..4
  for (int s = 0; s < n_struct; ++s) {
    const double a0 = rng.uniform(-pi, pi);
    const double width = rng.uniform(0.3, 1.5);
    const double dist = rng.uniform(8.0, 45.0);
    const double height = rng.uniform(1.0, 6.0);
    const double sint = rng.uniform(0.32, 0.78);
    for (int c = 0; c < n_cols; ++c) {
      double da = std::fmod(col_azim(c) - a0 + 3.0 * pi, two_pi) - pi;
      if (std::abs(da) >= width / 2) continue;
      for (int r = 0; r < n_beams; ++r) {
        const double phi = beam_incl(r);
        const double d = dist / (std::cos(phi) * std::cos(da));
        if (d <= 0.0) continue;
        const double z = d * std::sin(phi);
        if (z < -sensor_z || z > height) continue;
        const std::size_t ray = size_t(r) * n_cols + c;
        if (scene_d[ray] < 0.0 || d < scene_d[ray]) {
          scene_d[ray] = d;
          scene_i[ray] = sint;
          scene_label[ray] = SynthLabels::kStructure;
        }
      }
    }
  }

  // snow, occluding the scene return of its ray
  std::vector<std::uint8_t> occluded(n_rays, 0);
  std::size_t alive = 0;
  for (std::size_t i = 0; i < n_rays; ++i)
    if (scene_d[i] >= 0.0) ++alive;

  struct Flake {
    double x, y, z, intensity;
  };
  std::vector<Flake> flakes;
  while (flakes.size() <
         static_cast<std::size_t>(std::llround(snow_rate * static_cast<double>(alive)))) {
    const double phi = rng.uniform(fov_min, fov_max);
    const double psi = rng.uniform(-pi, pi);
    const int r = std::clamp(static_cast<int>((fov_max - phi) / span * n_beams), 0, n_beams - 1);
    const int c = static_cast<int>((psi + pi) / two_pi * n_cols) % n_cols;
    const std::size_t ray = size_t(r) * n_cols + c;
    double d_max = 25.0;
    if (scene_d[ray] >= 0.0) d_max = std::min(25.0, 0.9 * scene_d[ray]);
    if (d_max < 1.0) continue;
    const double u = rng.uniform();
    const double d = 0.5 + (d_max - 0.5) * u * u;  // concentrated near the sensor
    flakes.push_back({d * std::cos(phi) * std::cos(psi), d * std::cos(phi) * std::sin(psi),
                      d * std::sin(phi), rng.uniform(0.0, 0.05)});
    if (scene_d[ray] >= 0.0 && !occluded[ray]) {
      occluded[ray] = 1;
      --alive;
    }
  }

  PointCloud cloud;
  for (int r = 0; r < n_beams; ++r) {
    const double phi = beam_incl(r);
    for (int c = 0; c < n_cols; ++c) {
      const std::size_t ray = size_t(r) * n_cols + c;
      if (scene_d[ray] < 0.0 || occluded[ray]) continue;
      const double d = scene_d[ray];
      const double psi = col_azim(c);
      cloud.points.push_back({static_cast<float>(d * std::cos(phi) * std::cos(psi)),
                              static_cast<float>(d * std::cos(phi) * std::sin(psi)),
                              static_cast<float>(d * std::sin(phi)),
                              static_cast<float>(std::clamp(
                                  scene_i[ray] + rng.uniform(-0.02, 0.02), 0.0, 1.0))});
      cloud.labels.push_back(scene_label[ray]);
    }
  }
  for (const auto& f : flakes) {
    cloud.points.push_back({static_cast<float>(f.x), static_cast<float>(f.y),
                            static_cast<float>(f.z), static_cast<float>(f.intensity)});
    cloud.labels.push_back(SynthLabels::kSnow);
  }
  return cloud;
}

}  // namespace lisnow

#endif  // LISNOW_SYNTH_HPP
