#ifndef LISNOW_TUNE_HPP
#define LISNOW_TUNE_HPP

#include <cmath>
#include <set>
#include <stdexcept>
#include <vector>

#include "lisnow/metrics.hpp"
#include "lisnow/net.hpp"

namespace lisnow {

struct ThresholdGrid {
  std::vector<double> n_d;
  std::vector<double> n_i;
  std::vector<double> delta_bar;

  static ThresholdGrid defaults() {
    ThresholdGrid g;
    g.n_d = {0.25, 0.5, 1.0, 2.0, 4.0};
    g.n_i = g.n_d;
    // log-spaced 1e-8 .. 10
    for (int i = 0; i < 37; ++i) g.delta_bar.push_back(std::pow(10.0, -8.0 + 0.25 * i));
    return g;
  }

  bool empty() const { return n_d.empty() || n_i.empty() || delta_bar.empty(); }
};

// One evaluated point: the residual scores of its pixel plus ground truth.
struct ResidualSample {
  double dd = 0.0;
  double di = 0.0;
  bool truth = false;
};

struct TuneReport {
  Thresholds best;
  ConfusionCounts counts;  // at the chosen thresholds, over the tuning set
  Metrics metrics;
};

// Exhaustive scan of the candidate grid maximizing point-level IoU. Ties
// break toward higher precision, then lower delta_bar (delta_bar is visited
// in ascending order, so the first winner stands).
inline TuneReport select_thresholds(const std::vector<ResidualSample>& samples,
                                    const ThresholdGrid& grid) {
  if (grid.empty()) throw std::invalid_argument("select_thresholds: empty grid");
  if (samples.empty()) throw DataError("select_thresholds: no samples");
  TuneReport report;
  bool have_best = false;
  double best_iou = -1.0, best_prec = -1.0;
  for (double nd : grid.n_d)
    for (double ni : grid.n_i)
      for (double db : grid.delta_bar) {
        ConfusionCounts c;
        for (const auto& s : samples) {
          const bool pred =
              s.dd > 0.0 && s.di > 0.0 && std::pow(s.dd, nd) * std::pow(s.di, ni) > db;
          if (pred && s.truth)
            ++c.tp;
          else if (pred && !s.truth)
            ++c.fp;
          else if (!pred && s.truth)
            ++c.fn;
          else
            ++c.tn;
        }
        const Metrics m = metrics_from_counts(c);
        if (!have_best || m.iou > best_iou || (m.iou == best_iou && m.precision > best_prec)) {
          have_best = true;
          best_iou = m.iou;
          best_prec = m.precision;
          report.best = {nd, ni, db};
          report.counts = c;
          report.metrics = m;
        }
      }
  return report;
}

// Collects per-point residual samples for labeled clouds: each point carries
// the restoration residual of its pixel (zero when it never projected).
template <class S>
std::vector<ResidualSample> collect_residual_samples(LisnowNet<S>& net,
                                                     const std::vector<PointCloud>& frames,
                                                     const ProjectionConfig& pcfg,
                                                     const std::set<std::uint32_t>& snow_ids,
                                                     const VoidFillConfig& vf = {}) {
  std::vector<ResidualSample> samples;
  for (const auto& cloud : frames) {
    if (!cloud.has_labels()) throw DataError("tune: frame without labels: " + cloud.frame_id);
    const RangeImage img = preprocess(cloud, pcfg, vf);
    const ResidualImage res = restoration_residual(net.infer(img.data));
    const std::size_t n_pix = res.delta.plane_size();
    const std::size_t base = samples.size();
    samples.resize(base + cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i)
      samples[base + i].truth = snow_ids.count(cloud.labels[i]) > 0;
    for (std::size_t pix = 0; pix < n_pix; ++pix) {
      auto [first, last] = img.pixel_points(static_cast<int>(pix));
      for (auto* it = first; it != last; ++it) {
        samples[base + *it].dd = res.delta.data[pix];
        samples[base + *it].di = res.delta.data[n_pix + pix];
      }
    }
  }
  return samples;
}

// Grid search for the decision boundary on labeled frames.
template <class S>
TuneReport tune_thresholds(LisnowNet<S>& net, const std::vector<PointCloud>& labeled_frames,
                           const ProjectionConfig& pcfg, const std::set<std::uint32_t>& snow_ids,
                           const ThresholdGrid& grid, const VoidFillConfig& vf = {}) {
  if (labeled_frames.empty()) throw DataError("tune_thresholds: no labeled frames");
  return select_thresholds(collect_residual_samples(net, labeled_frames, pcfg, snow_ids, vf),
                           grid);
}

}  // namespace lisnow

#endif  // LISNOW_TUNE_HPP
