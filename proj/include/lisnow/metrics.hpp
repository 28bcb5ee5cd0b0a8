#ifndef LISNOW_METRICS_HPP
#define LISNOW_METRICS_HPP

#include <algorithm>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace lisnow {

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
  std::uint64_t total() const { return tp + fp + fn + tn; }
};

// positive = predicted snow; ground-truth positive = label in snow_ids.
inline ConfusionCounts evaluate(const std::vector<std::uint8_t>& pred,
                                const std::vector<std::uint32_t>& labels,
                                const std::set<std::uint32_t>& snow_ids) {
  if (pred.size() != labels.size())
    throw std::invalid_argument("evaluate: prediction/label length mismatch");
  ConfusionCounts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool truth = snow_ids.count(labels[i]) > 0;
    if (pred[i] && truth)
      ++c.tp;
    else if (pred[i] && !truth)
      ++c.fp;
    else if (!pred[i] && truth)
      ++c.fn;
    else
      ++c.tn;
  }
  return c;
}

struct Metrics {
  double precision = 1.0;
  double recall = 1.0;
  double iou = 1.0;
};

// Zero-denominator convention: a metric with an empty denominator is 1.
inline Metrics metrics_from_counts(const ConfusionCounts& c) {
  Metrics m;
  m.precision = (c.tp + c.fp) ? double(c.tp) / double(c.tp + c.fp) : 1.0;
  m.recall = (c.tp + c.fn) ? double(c.tp) / double(c.tp + c.fn) : 1.0;
  m.iou = (c.tp + c.fp + c.fn) ? double(c.tp) / double(c.tp + c.fp + c.fn) : 1.0;
  return m;
}

struct RuntimeStats {
  double mean_ms = 0.0;
  double p50_ms = 0.0;
  double p95_ms = 0.0;
  double points_per_sec = 0.0;
};

// Nearest-rank percentile over per-frame latencies.
inline RuntimeStats runtime_stats(std::vector<double> samples_ms, std::uint64_t total_points = 0) {
  RuntimeStats s;
  if (samples_ms.empty()) return s;
  double sum = 0.0;
  for (double v : samples_ms) sum += v;
  s.mean_ms = sum / double(samples_ms.size());
  std::sort(samples_ms.begin(), samples_ms.end());
  auto rank = [&](double p) {
    const std::size_t n = samples_ms.size();
    std::size_t idx = static_cast<std::size_t>(std::max<long long>(
        0, static_cast<long long>(std::ceil(p * double(n))) - 1));
    return samples_ms[std::min(idx, n - 1)];
  };
  s.p50_ms = rank(0.50);
  s.p95_ms = rank(0.95);
  if (sum > 0.0 && total_points > 0) s.points_per_sec = double(total_points) / (sum / 1000.0);
  return s;
}

inline const char* metrics_csv_header() {
  return "method,frames,tp,fp,fn,precision,recall,iou,mean_ms,p50_ms,p95_ms";
}

inline std::string metrics_csv_row(const std::string& method, std::size_t frames,
                                   const ConfusionCounts& c, const RuntimeStats& rt) {
  const Metrics m = metrics_from_counts(c);
  char buf[384];
  std::snprintf(buf, sizeof(buf), "%s,%zu,%llu,%llu,%llu,%.6f,%.6f,%.6f,%.3f,%.3f,%.3f",
                method.c_str(), frames, static_cast<unsigned long long>(c.tp),
                static_cast<unsigned long long>(c.fp), static_cast<unsigned long long>(c.fn),
                m.precision, m.recall, m.iou, rt.mean_ms, rt.p50_ms, rt.p95_ms);
  return buf;
}

}  // namespace lisnow

#endif  // LISNOW_METRICS_HPP
