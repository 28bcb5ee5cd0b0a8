#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>

#include "lisnow/point_cloud.hpp"
#include "lisnow/rng.hpp"

using namespace lisnow;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  auto dir = fs::temp_directory_path() / "lisnow_test_cloud";
  fs::create_directories(dir);
  return dir;
}

void write_floats(const fs::path& path, const std::vector<float>& vals) {
  write_file_bytes(path.string(), vals.data(), vals.size() * sizeof(float));
}

}  // namespace

TEST_CASE("load_bin decodes single record") {
  const auto path = temp_dir() / "one.bin";
  write_floats(path, {1.0f, 0.0f, 0.0f, 0.5f});
  const auto cloud = load_bin(path.string());
  REQUIRE(cloud.size() == 1);
  CHECK(cloud.points[0].x == 1.0f);
  CHECK(cloud.points[0].intensity == 0.5f);
}

TEST_CASE("load_bin handles empty file") {
  const auto path = temp_dir() / "empty.bin";
  write_file_bytes(path.string(), nullptr, 0);
  CHECK(load_bin(path.string()).size() == 0);
}

TEST_CASE("load_bin rejects sizes that are not a multiple of 16") {
  const auto path = temp_dir() / "bad.bin";
  std::vector<float> vals = {1, 2, 3, 4, 5, 6};  // 24 bytes
  write_floats(path, vals);
  CHECK_THROWS_AS(load_bin(path.string()), DataError);
}

TEST_CASE("load_bin reports missing file") {
  CHECK_THROWS_AS(load_bin((temp_dir() / "nope.bin").string()), DataError);
}

TEST_CASE("load_bin clamps intensity and drops non-finite points") {
  const auto path = temp_dir() / "mixed.bin";
  const float inf = std::numeric_limits<float>::infinity();
  const float nan = std::numeric_limits<float>::quiet_NaN();
  write_floats(path, {0, 0, 1, 2.0f,     // clamped to 1
                      inf, 0, 0, 0.5f,   // dropped
                      0, nan, 0, 0.5f,   // dropped
                      1, 1, 1, -0.25f}); // clamped to 0
  LoadReport report;
  const auto cloud = load_bin(path.string(), &report);
  REQUIRE(cloud.size() == 2);
  CHECK(report.dropped_nonfinite == 2);
  CHECK(cloud.points[0].intensity == 1.0f);
  CHECK(cloud.points[1].intensity == 0.0f);
}

TEST_CASE("label io extracts the lower 16 bits") {
  const auto path = temp_dir() / "a.label";
  const std::uint32_t raw[2] = {0x0000006Eu, 0x00010046u};
  write_file_bytes(path.string(), raw, sizeof(raw));
  const auto labels = load_labels(path.string(), 2);
  CHECK(labels[0] == 110);
  CHECK(labels[1] == 70);
  CHECK_THROWS_AS(load_labels(path.string(), 1), DataError);
}

TEST_CASE("save/load round trip is exact, with label sidecar") {
  RngState rng(42);
  PointCloud cloud;
  for (int i = 0; i < 257; ++i) {
    cloud.points.push_back({static_cast<float>(rng.uniform(-50, 50)),
                            static_cast<float>(rng.uniform(-50, 50)),
                            static_cast<float>(rng.uniform(-5, 5)),
                            static_cast<float>(rng.uniform(0, 1))});
    cloud.labels.push_back(static_cast<std::uint32_t>(rng.uniform_u64(200)));
  }
  const auto bin = temp_dir() / "rt.bin";
  const auto lab = temp_dir() / "rt.label";
  save_cloud(cloud, bin.string());
  save_labels(cloud.labels, lab.string());
  const auto loaded = load_bin(bin.string());
  REQUIRE(loaded.size() == cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    CHECK(loaded.points[i].x == cloud.points[i].x);
    CHECK(loaded.points[i].y == cloud.points[i].y);
    CHECK(loaded.points[i].z == cloud.points[i].z);
    CHECK(loaded.points[i].intensity == cloud.points[i].intensity);
  }
  CHECK(load_labels(lab.string(), cloud.size()) == cloud.labels);
}

TEST_CASE("zero-point cloud saves to a zero-byte file") {
  const auto path = temp_dir() / "zero.bin";
  save_cloud(PointCloud{}, path.string());
  CHECK(fs::file_size(path) == 0);
  CHECK(load_bin(path.string()).size() == 0);
}

namespace {

DatasetManifest make_manifest(int n_sequences) {
  DatasetManifest m;
  for (int s = 0; s < n_sequences; ++s) {
    SequenceEntry e;
    e.sequence_id = "seq" + std::to_string(s);
    for (int f = 0; f < 3; ++f)
      e.frames.push_back("frames/" + e.sequence_id + "_" + std::to_string(f) + ".bin");
    m.sequences.push_back(e);
  }
  return m;
}

}  // namespace

TEST_CASE("split_dataset: 10 sequences at 0.8 give an 8/2 split") {
  const auto m = make_manifest(10);
  const auto split = split_dataset(m, 0.8, 7);
  CHECK(split.train.sequences.size() == 8);
  CHECK(split.val.sequences.size() == 2);
}

TEST_CASE("split_dataset keeps both sides non-empty") {
  const auto m = make_manifest(2);
  const auto split = split_dataset(m, 0.99, 3);
  CHECK(split.train.sequences.size() == 1);
  CHECK(split.val.sequences.size() == 1);
}

TEST_CASE("split_dataset is deterministic and rejects tiny manifests") {
  const auto m = make_manifest(7);
  const auto a = split_dataset(m, 0.7, 11);
  const auto b = split_dataset(m, 0.7, 11);
  REQUIRE(a.train.sequences.size() == b.train.sequences.size());
  for (std::size_t i = 0; i < a.train.sequences.size(); ++i)
    CHECK(a.train.sequences[i].sequence_id == b.train.sequences[i].sequence_id);
  CHECK_THROWS_AS(split_dataset(make_manifest(1), 0.8, 0), DataError);
}

TEST_CASE("split_dataset partitions sequences for random seeds") {
  const auto m = make_manifest(9);
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const auto split = split_dataset(m, 0.6, seed);
    std::set<std::string> seen;
    for (const auto& s : split.train.sequences) seen.insert(s.sequence_id);
    for (const auto& s : split.val.sequences) {
      CHECK(seen.count(s.sequence_id) == 0);
      seen.insert(s.sequence_id);
    }
    CHECK(seen.size() == m.sequences.size());
  }
}

TEST_CASE("manifest io round trips") {
  auto m = make_manifest(3);
  m.sequences[1].label_paths = {"l0.label", "l1.label", "l2.label"};
  const auto path = temp_dir() / "manifest.txt";
  save_manifest(m, path.string());
  const auto loaded = load_manifest(path.string());
  REQUIRE(loaded.sequences.size() == 3);
  CHECK(loaded.sequences[1].label_paths[2] == "l2.label");
  CHECK(loaded.frame_count() == 9);
}
