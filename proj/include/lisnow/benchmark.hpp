#ifndef LISNOW_BENCHMARK_HPP
#define LISNOW_BENCHMARK_HPP

#include <chrono>
#include <functional>
#include <stdexcept>
#include <vector>

#include "lisnow/common.hpp"
#include "lisnow/metrics.hpp"
#include "lisnow/point_cloud.hpp"

namespace lisnow {

struct BenchResult {
  std::vector<double> samples_ms;  // one sample per (frame, rep)
  std::uint64_t total_points = 0;

  RuntimeStats stats() const { return runtime_stats(samples_ms, total_points); }
};

// Times a denoiser over a fixed frame set: `warmup` untimed passes, then
// `reps` timed passes, one latency sample per frame per pass. Methods run
// serially; the harness never mutates the frames.
inline BenchResult benchmark(const std::function<void(const PointCloud&)>& method,
                             const std::vector<PointCloud>& frames, int warmup, int reps) {
  if (reps < 1) throw std::invalid_argument("benchmark: reps must be >= 1");
  if (frames.empty()) throw DataError("benchmark: empty frame set");
  for (int i = 0; i < warmup; ++i)
    for (const auto& f : frames) method(f);
  BenchResult result;
  result.samples_ms.reserve(size_t(reps) * frames.size());
  for (int rep = 0; rep < reps; ++rep)
    for (const auto& f : frames) {
      const auto t0 = std::chrono::steady_clock::now();
      method(f);
      const auto t1 = std::chrono::steady_clock::now();
      result.samples_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
      result.total_points += f.size();
    }
  return result;
}

}  // namespace lisnow

#endif  // LISNOW_BENCHMARK_HPP
