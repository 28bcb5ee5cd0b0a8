#ifndef LISNOW_POINT_CLOUD_HPP
#define LISNOW_POINT_CLOUD_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "lisnow/common.hpp"
#include "lisnow/rng.hpp"

namespace lisnow {

struct Point {
  float x = 0.0f;
  float y = 0.0f;
  float z = 0.0f;
  float intensity = 0.0f;  // clamped to [0, 1] on load
};

struct PointCloud {
  std::vector<Point> points;
  std::vector<std::uint32_t> labels;  // empty or one class id per point
  std::string frame_id;

  std::size_t size() const { return points.size(); }
  bool has_labels() const { return !labels.empty(); }
};

struct LoadReport {
  std::size_t dropped_nonfinite = 0;
};

// KITTI-style .bin: 4 little-endian float32 per point (x, y, z, intensity).
inline PointCloud load_bin(const std::string& path, LoadReport* report = nullptr) {
  const auto bytes = read_file_bytes(path);
  if (bytes.size() % 16 != 0)
    throw DataError("malformed point file (size " + std::to_string(bytes.size()) +
                    " not a multiple of 16): " + path);
  const std::size_t n = bytes.size() / 16;
  PointCloud cloud;
  cloud.points.reserve(n);
  std::size_t dropped = 0;
  for (std::size_t i = 0; i < n; ++i) {
    float v[4];
    std::memcpy(v, bytes.data() + i * 16, 16);
    if (!std::isfinite(v[0]) || !std::isfinite(v[1]) || !std::isfinite(v[2]) ||
        !std::isfinite(v[3])) {
      ++dropped;
      continue;
    }
    cloud.points.push_back({v[0], v[1], v[2], std::clamp(v[3], 0.0f, 1.0f)});
  }
  if (report) report->dropped_nonfinite = dropped;
  cloud.frame_id = path;
  return cloud;
}

inline void save_cloud(const PointCloud& cloud, const std::string& path) {
  std::vector<float> buf;
  buf.reserve(cloud.points.size() * 4);
  for (const auto& p : cloud.points) {
    buf.push_back(p.x);
    buf.push_back(p.y);
    buf.push_back(p.z);
    buf.push_back(std::clamp(p.intensity, 0.0f, 1.0f));
  }
  write_file_bytes(path, buf.data(), buf.size() * sizeof(float));
}

// SemanticKITTI-style .label: one little-endian uint32 per point, class id in
// the lower 16 bits.
inline std::vector<std::uint32_t> load_labels(const std::string& path, std::size_t n_points) {
  const auto bytes = read_file_bytes(path);
  if (bytes.size() != n_points * 4)
    throw DataError("label count mismatch: " + path + " holds " +
                    std::to_string(bytes.size() / 4) + " labels for " +
                    std::to_string(n_points) + " points");
  std::vector<std::uint32_t> labels(n_points);
  for (std::size_t i = 0; i < n_points; ++i) {
    std::uint32_t raw;
    std::memcpy(&raw, bytes.data() + i * 4, 4);
    labels[i] = raw & 0xFFFFu;
  }
  return labels;
}

inline void save_labels(const std::vector<std::uint32_t>& labels, const std::string& path) {
  write_file_bytes(path, labels.data(), labels.size() * sizeof(std::uint32_t));
}

struct SequenceEntry {
  std::string sequence_id;
  std::vector<std::string> frames;
  std::vector<std::string> label_paths;  // empty, or parallel to frames
};

struct DatasetManifest {
  std::vector<SequenceEntry> sequences;
  std::uint64_t split_seed = 0;

  std::size_t frame_count() const {
    std::size_t n = 0;
    for (const auto& s : sequences) n += s.frames.size();
    return n;
  }
};

// Manifest text format: one line per frame,
//   <sequence_id> <bin_path> [<label_path>]
// '#' starts a comment line.
inline DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest: " + path);
  DatasetManifest m;
  std::unordered_set<std::string> seen_paths;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string seq, bin, label;
    ss >> seq >> bin;
    if (seq.empty() || bin.empty())
      throw DataError("manifest " + path + ": bad line " + std::to_string(lineno));
    ss >> label;
    if (!seen_paths.insert(bin).second)
      throw DataError("manifest " + path + ": duplicate frame path " + bin);
    auto it = std::find_if(m.sequences.begin(), m.sequences.end(),
                           [&](const SequenceEntry& s) { return s.sequence_id == seq; });
    if (it == m.sequences.end()) {
      m.sequences.push_back({seq, {}, {}});
      it = m.sequences.end() - 1;
    }
    it->frames.push_back(bin);
    it->label_paths.push_back(label);  // possibly empty
  }
  return m;
}

inline void save_manifest(const DatasetManifest& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open manifest for writing: " + path);
  for (const auto& s : m.sequences)
    for (std::size_t i = 0; i < s.frames.size(); ++i) {
      out << s.sequence_id << ' ' << s.frames[i];
      if (i < s.label_paths.size() && !s.label_paths[i].empty()) out << ' ' << s.label_paths[i];
      out << '\n';
    }
}

struct SplitResult {
  DatasetManifest train;
  DatasetManifest val;
};

// Partitions whole sequences, never individual frames. Both sides are kept
// non-empty, so at least 2 sequences are required.
inline SplitResult split_dataset(const DatasetManifest& manifest, double train_fraction,
                                 std::uint64_t seed) {
  const std::size_t total = manifest.sequences.size();
  if (total < 2)
    throw DataError("cannot split a manifest with fewer than 2 sequences (have " +
                    std::to_string(total) + ")");
  std::vector<std::size_t> order(total);
  for (std::size_t i = 0; i < total; ++i) order[i] = i;
  RngState rng(seed, RngState::hash_label("split"));
  rng.shuffle(order.begin(), order.end());

  auto n_train =
      static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(total)));
  n_train = std::clamp<std::size_t>(n_train, 1, total - 1);

  SplitResult out;
  out.train.split_seed = seed;
  out.val.split_seed = seed;
  for (std::size_t i = 0; i < total; ++i) {
    auto& dst = (i < n_train) ? out.train : out.val;
    dst.sequences.push_back(manifest.sequences[order[i]]);
  }
  // Deterministic output order independent of the shuffle.
  auto by_id = [](const SequenceEntry& a, const SequenceEntry& b) {
    return a.sequence_id < b.sequence_id;
  };
  std::sort(out.train.sequences.begin(), out.train.sequences.end(), by_id);
  std::sort(out.val.sequences.begin(), out.val.sequences.end(), by_id);
  return out;
}

}  // namespace lisnow

#endif  // LISNOW_POINT_CLOUD_HPP
