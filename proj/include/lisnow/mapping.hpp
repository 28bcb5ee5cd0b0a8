#ifndef LISNOW_MAPPING_HPP
#define LISNOW_MAPPING_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <vector>

#include "lisnow/common.hpp"
#include "lisnow/point_cloud.hpp"

namespace lisnow {

// Rigid transform, row-major 4x4, meters.
struct Pose {
  std::array<double, 16> m{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};

  void validate() const {
    if (m[12] != 0.0 || m[13] != 0.0 || m[14] != 0.0 || m[15] != 1.0)
      throw DataError("pose: bottom row must be (0, 0, 0, 1)");
    // R^T R == I within 1e-6
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double dot = 0.0;
        for (int k = 0; k < 3; ++k) dot += m[k * 4 + i] * m[k * 4 + j];
        const double target = i == j ? 1.0 : 0.0;
        if (std::abs(dot - target) > 1e-6)
          throw DataError("pose: rotation block is not orthonormal");
      }
  }

  Point apply(const Point& p) const {
    Point out = p;
    out.x = static_cast<float>(m[0] * p.x + m[1] * p.y + m[2] * p.z + m[3]);
    out.y = static_cast<float>(m[4] * p.x + m[5] * p.y + m[6] * p.z + m[7]);
    out.z = static_cast<float>(m[8] * p.x + m[9] * p.y + m[10] * p.z + m[11]);
    return out;
  }
};

// KITTI odometry convention: one 3x4 row-major transform (12 floats) per line.
inline std::vector<Pose> load_poses(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open poses file: " + path);
  std::vector<Pose> poses;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    Pose pose;
    for (int i = 0; i < 12; ++i)
      if (!(ss >> pose.m[i]))
        throw DataError("poses file " + path + ": line " + std::to_string(poses.size() + 1) +
                        " needs 12 values");
    pose.validate();
    poses.push_back(pose);
  }
  return poses;
}

// Transforms each cloud by its pose into a common frame and concatenates.
// With a voxel size, keeps the point nearest to its voxel center (first wins
// ties), scanning in input order so the output is deterministic.
inline PointCloud accumulate_map(const std::vector<PointCloud>& clouds,
                                 const std::vector<Pose>& poses, double voxel = 0.0) {
  if (clouds.size() != poses.size())
    throw DataError("accumulate_map: " + std::to_string(clouds.size()) + " clouds vs " +
                    std::to_string(poses.size()) + " poses");
  for (const auto& pose : poses) pose.validate();

  PointCloud merged;
  const bool labeled = std::all_of(clouds.begin(), clouds.end(), [](const PointCloud& c) {
    return c.has_labels() || c.points.empty();
  });
  for (std::size_t i = 0; i < clouds.size(); ++i)
    for (std::size_t j = 0; j < clouds[i].points.size(); ++j) {
      merged.points.push_back(poses[i].apply(clouds[i].points[j]));
      if (labeled && clouds[i].has_labels()) merged.labels.push_back(clouds[i].labels[j]);
    }
  if (!labeled) merged.labels.clear();
  if (voxel <= 0.0) return merged;

  struct Key {
    std::int64_t x, y, z;
    bool operator==(const Key& o) const { return x == o.x && y == o.y && z == o.z; }
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      std::uint64_t h = 1469598103934665603ull;
      for (std::int64_t v : {k.x, k.y, k.z}) {
        h ^= static_cast<std::uint64_t>(v);
        h *= 1099511628211ull;
      }
      return static_cast<std::size_t>(h);
    }
  };
  std::unordered_map<Key, std::pair<std::size_t, double>, KeyHash> winner;  // voxel -> (idx, d2)
  for (std::size_t i = 0; i < merged.points.size(); ++i) {
    const auto& p = merged.points[i];
    const Key key{static_cast<std::int64_t>(std::floor(p.x / voxel)),
                  static_cast<std::int64_t>(std::floor(p.y / voxel)),
                  static_cast<std::int64_t>(std::floor(p.z / voxel))};
    const double cx = (double(key.x) + 0.5) * voxel;
    const double cy = (double(key.y) + 0.5) * voxel;
    const double cz = (double(key.z) + 0.5) * voxel;
    const double d2 = (p.x - cx) * (p.x - cx) + (p.y - cy) * (p.y - cy) + (p.z - cz) * (p.z - cz);
    auto it = winner.find(key);
    if (it == winner.end() || d2 < it->second.second) winner[key] = {i, d2};
  }
  PointCloud filtered;
  for (std::size_t i = 0; i < merged.points.size(); ++i) {
    const auto& p = merged.points[i];
    const Key key{static_cast<std::int64_t>(std::floor(p.x / voxel)),
                  static_cast<std::int64_t>(std::floor(p.y / voxel)),
                  static_cast<std::int64_t>(std::floor(p.z / voxel))};
    if (winner.at(key).first == i) {
      filtered.points.push_back(p);
      if (!merged.labels.empty()) filtered.labels.push_back(merged.labels[i]);
    }
  }
  return filtered;
}

}  // namespace lisnow

#endif  // LISNOW_MAPPING_HPP
