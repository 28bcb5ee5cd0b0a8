#ifndef LISNOW_TRAIN_HPP
#define LISNOW_TRAIN_HPP

#include <cstdio>
#include <string>
#include <vector>

#include "lisnow/net.hpp"
#include "lisnow/optim.hpp"
#include "lisnow/point_cloud.hpp"
#include "lisnow/range_image.hpp"

namespace lisnow {

struct TrainConfig {
  int epochs = 20;
  int batch_size = 8;
  double lr = 0.001;
  double lr_decay = 0.89;  // multiplied in at each epoch end
  std::uint64_t seed = 0;

  void validate() const {
    if (epochs < 1 || batch_size < 1 || !(lr > 0.0) || !(lr_decay > 0.0) || lr_decay > 1.0)
      throw std::invalid_argument("bad train config");
  }
};

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;  // rate used during this epoch
  double total = 0.0;
  double l_fft = 0.0;
  double l_dwt = 0.0;
  double l_delta = 0.0;
};

struct TrainResult {
  NetworkConfig net_cfg;
  std::vector<EpochLog> epochs;
};

// Stacks preprocessed frames into one {n, 2, h, w} batch tensor.
template <class S>
Tensor<S> stack_frames(const std::vector<const Image*>& frames) {
  const int h = frames[0]->h, w = frames[0]->w;
  auto t = Tensor<S>::zeros({static_cast<int>(frames.size()), 2, h, w});
  const std::size_t frame_len = size_t(2) * h * w;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (frames[i]->h != h || frames[i]->w != w || frames[i]->c != 2)
      throw std::invalid_argument("stack_frames: mixed frame shapes");
    for (std::size_t j = 0; j < frame_len; ++j)
      t.values()[i * frame_len + j] = static_cast<S>(frames[i]->data[j]);
  }
  return t;
}

inline std::vector<std::string> manifest_frame_paths(const DatasetManifest& m) {
  std::vector<std::string> paths;
  for (const auto& s : m.sequences)
    for (const auto& f : s.frames) paths.push_back(f);
  return paths;
}

// Unsupervised training loop: shuffled mini-batches, Adam, per-epoch learning
// rate decay, optional per-epoch checkpoints. Deterministic for a fixed seed.
template <class S>
TrainResult train(LisnowNet<S>& net, const DatasetManifest& manifest,
                  const ProjectionConfig& pcfg, const TrainConfig& tcfg, const LossWeights& lw,
                  const VoidFillConfig& vf = {}, const std::string& checkpoint_dir = "") {
  tcfg.validate();
  lw.validate();
  const auto paths = manifest_frame_paths(manifest);
  if (paths.empty()) throw DataError("train: empty training set");

  std::vector<Image> frames;
  frames.reserve(paths.size());
  for (const auto& p : paths) frames.push_back(preprocess(load_bin(p), pcfg, vf).data);

  RngState rng(tcfg.seed);
  RngState dropout_rng = rng.fork("dropout");

  TrainResult result;
  result.net_cfg = net.config();
  double lr = tcfg.lr;
  std::vector<std::size_t> order(frames.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
    auto shuffle_rng = rng.fork("shuffle").fork(static_cast<std::uint64_t>(epoch));
    shuffle_rng.shuffle(order.begin(), order.end());

    EpochLog log;
    log.epoch = epoch;
    log.lr = lr;
    std::size_t n_batches = 0;
    for (std::size_t start = 0; start < order.size(); start += tcfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + tcfg.batch_size);
      std::vector<const Image*> batch;
      for (std::size_t i = start; i < end; ++i) batch.push_back(&frames[order[i]]);
      auto x = stack_frames<S>(batch);
      auto delta = net.forward(x, true, &dropout_rng);
      auto loss = compute_loss(x, delta, lw);
      if (!std::isfinite(loss.total_value))
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(n_batches));
      loss.total.backward();
      adam_step(net.params(), lr);
      log.total += loss.total_value;
      log.l_fft += loss.l_fft;
      log.l_dwt += loss.l_dwt;
      log.l_delta += loss.l_delta;
      ++n_batches;
    }
    log.total /= double(n_batches);
    log.l_fft /= double(n_batches);
    log.l_dwt /= double(n_batches);
    log.l_delta /= double(n_batches);
    result.epochs.push_back(log);

    lr *= tcfg.lr_decay;
    if (!checkpoint_dir.empty()) {
      char name[64];
      std::snprintf(name, sizeof(name), "/ckpt_epoch_%03d.bin", epoch);
      save_checkpoint(net.params(), checkpoint_dir + name);
    }
  }
  if (!checkpoint_dir.empty()) save_checkpoint(net.params(), checkpoint_dir + "/ckpt.bin");
  return result;
}

inline void write_train_log_csv(const TrainResult& r, const std::string& path) {
  std::string text = "epoch,lr,total,l_fft,l_dwt,l_delta\n";
  for (const auto& e : r.epochs) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%d,%.9f,%.6f,%.6f,%.6f,%.6f\n", e.epoch, e.lr, e.total,
                  e.l_fft, e.l_dwt, e.l_delta);
    text += buf;
  }
  write_file_bytes(path, text.data(), text.size());
}

}  // namespace lisnow

#endif  // LISNOW_TRAIN_HPP
