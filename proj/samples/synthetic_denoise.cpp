// Minimal library walkthrough: build a snowy synthetic frame, train a tiny
// network on a handful of clean-ish frames, then classify and split the cloud.
#include <cstdio>
#include <filesystem>

#include "lisnow/net.hpp"
#include "lisnow/point_cloud.hpp"
#include "lisnow/synth.hpp"
#include "lisnow/train.hpp"
#include "lisnow/tune.hpp"

using namespace lisnow;

int main() {
  ProjectionConfig proj;
  proj.h = 32;
  proj.w = 256;

  NetworkConfig ncfg;
  ncfg.levels = 3;
  ncfg.base_channels = 4;

  const auto dir = std::filesystem::temp_directory_path() / "lisnow_sample";
  std::filesystem::create_directories(dir);

  DatasetManifest manifest;
  manifest.sequences.push_back({"seq0", {}, {}});
  for (int k = 0; k < 8; ++k) {
    const auto cloud = synth_scene(100 + k, proj.h, proj.w, 0.1, proj);
    const auto path = (dir / ("frame" + std::to_string(k) + ".bin")).string();
    save_cloud(cloud, path);
    manifest.sequences[0].frames.push_back(path);
  }

  auto net = LisnowNet<double>::init(ncfg, 1);
  TrainConfig tcfg;
  tcfg.epochs = 2;
  tcfg.batch_size = 4;
  const auto log = train(net, manifest, proj, tcfg, LossWeights{});
  for (const auto& e : log.epochs)
    std::printf("epoch %d: loss %.2f\n", e.epoch, e.total);

  const auto frame = synth_scene(999, proj.h, proj.w, 0.1, proj);
  const auto tuned = tune_thresholds(net, {frame}, proj, {SynthLabels::kSnow},
                                     ThresholdGrid::defaults());
  const auto result = denoise_cloud(net, tuned.best, frame, proj);
  std::printf("frame: %zu points, removed %zu as snow (thresholds n_d=%.2f n_i=%.2f db=%.2g)\n",
              frame.size(), result.removed.size(), tuned.best.n_d, tuned.best.n_i,
              tuned.best.delta_bar);
  return 0;
}
