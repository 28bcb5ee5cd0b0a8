// lisnow: train, denoise, evaluate and benchmark LiDAR snow removal.
#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "lisnow/baselines.hpp"
#include "lisnow/benchmark.hpp"
#include "lisnow/config.hpp"
#include "lisnow/mapping.hpp"
#include "lisnow/metrics.hpp"
#include "lisnow/net.hpp"
#include "lisnow/point_cloud.hpp"
#include "lisnow/synth.hpp"
#include "lisnow/train.hpp"
#include "lisnow/tune.hpp"

namespace fs = std::filesystem;
using namespace lisnow;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> alpha, beta, lr, lr_decay;
  std::optional<int> epochs, batch_size, beams, cols, jobs;
  std::optional<std::string> snow_ids;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "key=value config file");
  cmd->add_option("--seed", flags.seed, "deterministic seed");
  cmd->add_option("--alpha", flags.alpha, "sparsity/residual balance");
  cmd->add_option("--beta", flags.beta, "FFT vs DWT mix");
  cmd->add_option("--lr", flags.lr, "initial learning rate");
  cmd->add_option("--lr-decay", flags.lr_decay, "per-epoch learning rate decay");
  cmd->add_option("--epochs", flags.epochs, "training epochs");
  cmd->add_option("--batch-size", flags.batch_size, "frames per optimizer step");
  cmd->add_option("--beams", flags.beams, "range image rows");
  cmd->add_option("--cols", flags.cols, "range image columns");
  cmd->add_option("--jobs", flags.jobs, "worker threads (default 1)");
  cmd->add_option("--snow-ids", flags.snow_ids, "comma-separated snow class ids");
}

RunConfig resolve_config(const CommonFlags& flags) {
  RunConfig cfg;
  if (!flags.config_path.empty()) cfg.load_file(flags.config_path);
  if (flags.seed) cfg.train.seed = *flags.seed;
  if (flags.alpha) cfg.loss.alpha = *flags.alpha;
  if (flags.beta) cfg.loss.beta = *flags.beta;
  if (flags.lr) cfg.train.lr = *flags.lr;
  if (flags.lr_decay) cfg.train.lr_decay = *flags.lr_decay;
  if (flags.epochs) cfg.train.epochs = *flags.epochs;
  if (flags.batch_size) cfg.train.batch_size = *flags.batch_size;
  if (flags.beams) cfg.projection.h = *flags.beams;
  if (flags.cols) cfg.projection.w = *flags.cols;
  if (flags.jobs) cfg.jobs = *flags.jobs;
  if (flags.snow_ids) cfg.snow_ids = RunConfig::parse_id_list(*flags.snow_ids);
#ifdef _OPENMP
  omp_set_num_threads(std::max(1, cfg.jobs));
#endif
  return cfg;
}

std::vector<std::string> list_bin_files(const std::string& dir) {
  std::vector<std::string> files;
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir);
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".bin")
      files.push_back(entry.path().string());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no .bin files in " + dir);
  return files;
}

PointCloud load_frame_with_labels(const std::string& bin_path, const std::string& label_path) {
  auto cloud = load_bin(bin_path);
  if (!label_path.empty()) cloud.labels = load_labels(label_path, cloud.size());
  return cloud;
}

std::vector<PointCloud> load_manifest_frames(const DatasetManifest& manifest,
                                             bool require_labels) {
  std::vector<PointCloud> frames;
  for (const auto& seq : manifest.sequences)
    for (std::size_t i = 0; i < seq.frames.size(); ++i) {
      const std::string label =
          i < seq.label_paths.size() ? seq.label_paths[i] : std::string();
      if (require_labels && label.empty())
        throw DataError("frame without labels in manifest: " + seq.frames[i]);
      frames.push_back(load_frame_with_labels(seq.frames[i], label));
    }
  return frames;
}

// ---- train ----------------------------------------------------------------

int cmd_train(const CommonFlags& flags, const std::string& manifest_path,
              const std::string& out_dir) {
  auto cfg = resolve_config(flags);
  const auto manifest = load_manifest(manifest_path);
  fs::create_directories(out_dir);

  auto net = LisnowNet<double>::init(cfg.network, cfg.train.seed);
  const auto result =
      train(net, manifest, cfg.projection, cfg.train, cfg.loss, cfg.void_fill, out_dir);
  for (const auto& e : result.epochs)
    std::printf("epoch %d  lr %.6f  loss %.4f  (fft %.4f  dwt %.4f  delta %.4f)\n", e.epoch, e.lr,
                e.total, e.l_fft, e.l_dwt, e.l_delta);
  write_train_log_csv(result, out_dir + "/train_log.csv");
  const auto dump = cfg.dump();
  write_file_bytes(out_dir + "/config.txt", dump.data(), dump.size());
  std::printf("checkpoint: %s/ckpt.bin\n", out_dir.c_str());
  return kExitOk;
}

// ---- denoise ---------------------------------------------------------------

int cmd_denoise(const CommonFlags& flags, const std::string& ckpt, const std::string& in_dir,
                const std::string& out_dir, const std::string& thresholds_path) {
  auto cfg = resolve_config(flags);
  Thresholds th = cfg.thresholds;
  if (!thresholds_path.empty()) th = load_thresholds(thresholds_path);
  auto net = LisnowNet<double>(cfg.network, load_checkpoint<double>(ckpt));

  fs::create_directories(out_dir + "/kept");
  fs::create_directories(out_dir + "/removed");
  std::string stats = "frame,points,kept,removed,mean_score_d,mean_score_i\n";
  for (const auto& path : list_bin_files(in_dir)) {
    const auto cloud = load_bin(path);
    const auto result = denoise_cloud(net, th, cloud, cfg.projection, cfg.void_fill);
    const auto name = fs::path(path).filename().string();
    save_cloud(result.kept, out_dir + "/kept/" + name);
    save_cloud(result.removed, out_dir + "/removed/" + name);
    double mean_d = 0, mean_i = 0;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      mean_d += result.mask.score_d[i];
      mean_i += result.mask.score_i[i];
    }
    if (cloud.size()) {
      mean_d /= double(cloud.size());
      mean_i /= double(cloud.size());
    }
    char row[256];
    std::snprintf(row, sizeof(row), "%s,%zu,%zu,%zu,%.6f,%.6f\n", name.c_str(), cloud.size(),
                  result.kept.size(), result.removed.size(), mean_d, mean_i);
    stats += row;
  }
  write_file_bytes(out_dir + "/stats.csv", stats.data(), stats.size());
  return kExitOk;
}

// ---- eval / bench ----------------------------------------------------------

struct MethodRunner {
  // returns per-point snow flags
  std::function<std::vector<std::uint8_t>(const PointCloud&)> run;
};

MethodRunner make_method(const std::string& method, RunConfig& cfg,
                         std::shared_ptr<LisnowNet<float>> net) {
  if (method == "lisnownet") {
    if (!net) throw DataError("method lisnownet needs --ckpt");
    return {[net, &cfg](const PointCloud& cloud) {
      const auto result = denoise_cloud(*net, cfg.thresholds, cloud, cfg.projection,
                                        cfg.void_fill);
      return result.mask.point_snow;
    }};
  }
  if (method == "dror")
    return {[&cfg](const PointCloud& cloud) { return dror(cloud, cfg.dror); }};
  if (method == "dsor")
    return {[&cfg](const PointCloud& cloud) { return dsor(cloud, cfg.dsor); }};
  if (method == "median")
    return {[&cfg](const PointCloud& cloud) {
      const auto img = preprocess(cloud, cfg.projection, cfg.void_fill);
      const auto mask = median_filter(img, cfg.median);
      return apply_mask(cloud, img, mask).point_removed;
    }};
  throw CLI::ValidationError("--method", "unknown method: " + method);
}

int cmd_eval(const CommonFlags& flags, const std::string& method, const std::string& manifest_path,
             const std::string& ckpt, const std::string& thresholds_path, const std::string& csv,
             bool no_timing) {
  auto cfg = resolve_config(flags);
  if (!thresholds_path.empty()) cfg.thresholds = load_thresholds(thresholds_path);
  std::shared_ptr<LisnowNet<float>> net;
  if (!ckpt.empty())
    net = std::make_shared<LisnowNet<float>>(cfg.network, load_checkpoint<float>(ckpt));
  auto runner = make_method(method, cfg, net);

  const auto frames = load_manifest_frames(load_manifest(manifest_path), true);
  ConfusionCounts total;
  std::vector<double> latencies;
  std::uint64_t total_points = 0;
  for (const auto& cloud : frames) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto pred = runner.run(cloud);
    const auto t1 = std::chrono::steady_clock::now();
    latencies.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    total_points += cloud.size();
    total += evaluate(pred, cloud.labels, cfg.snow_ids);
  }
  RuntimeStats rt;
  if (!no_timing) rt = runtime_stats(latencies, total_points);
  const std::string row = metrics_csv_row(method, frames.size(), total, rt);
  std::printf("%s\n%s\n", metrics_csv_header(), row.c_str());
  if (!csv.empty()) {
    const std::string text = std::string(metrics_csv_header()) + "\n" + row + "\n";
    write_file_bytes(csv, text.data(), text.size());
  }
  return kExitOk;
}

int cmd_bench(const CommonFlags& flags, const std::string& methods_arg,
              const std::string& frames_dir, int reps, int warmup, const std::string& ckpt,
              const std::string& csv) {
  auto cfg = resolve_config(flags);
  std::shared_ptr<LisnowNet<float>> net;
  if (!ckpt.empty())
    net = std::make_shared<LisnowNet<float>>(cfg.network, load_checkpoint<float>(ckpt));

  std::vector<PointCloud> frames;
  for (const auto& path : list_bin_files(frames_dir)) frames.push_back(load_bin(path));

  std::vector<std::string> methods;
  std::stringstream ss(methods_arg);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) methods.push_back(item);
  if (methods.empty()) throw CLI::ValidationError("--methods", "no methods given");

  std::string text = std::string(metrics_csv_header()) + "\n";
  std::printf("%s\n", metrics_csv_header());
  for (const auto& method : methods) {
    auto runner = make_method(method, cfg, net);
    const auto result =
        benchmark([&](const PointCloud& cloud) { (void)runner.run(cloud); }, frames, warmup, reps);
    const auto row = metrics_csv_row(method, frames.size(), ConfusionCounts{}, result.stats());
    std::printf("%s\n", row.c_str());
    text += row + "\n";
  }
  if (!csv.empty()) write_file_bytes(csv, text.data(), text.size());
  return kExitOk;
}

// ---- tune -------------------------------------------------------------------

ThresholdGrid load_grid(const std::string& path) {
  if (path.empty()) return ThresholdGrid::defaults();
  std::ifstream in(path);
  if (!in) throw DataError("cannot open grid file: " + path);
  ThresholdGrid grid;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    std::vector<double> values;
    std::stringstream ss(line.substr(eq + 1));
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) values.push_back(std::stod(item));
    if (key == "n_d") grid.n_d = values;
    else if (key == "n_i") grid.n_i = values;
    else if (key == "delta_bar") grid.delta_bar = values;
    else throw DataError("grid file: unknown key " + key);
  }
  if (grid.empty()) throw DataError("grid file defines no candidates: " + path);
  return grid;
}

int cmd_tune(const CommonFlags& flags, const std::string& ckpt, const std::string& manifest_path,
             const std::string& grid_path, const std::string& out_path) {
  auto cfg = resolve_config(flags);
  auto net = LisnowNet<double>(cfg.network, load_checkpoint<double>(ckpt));
  const auto frames = load_manifest_frames(load_manifest(manifest_path), true);
  const auto grid = load_grid(grid_path);
  const auto report = tune_thresholds(net, frames, cfg.projection, cfg.snow_ids, grid,
                                      cfg.void_fill);
  std::printf("n_d=%.9g\nn_i=%.9g\ndelta_bar=%.9g\n", report.best.n_d, report.best.n_i,
              report.best.delta_bar);
  std::printf("# tuning IoU %.4f precision %.4f recall %.4f\n", report.metrics.iou,
              report.metrics.precision, report.metrics.recall);
  if (!out_path.empty()) save_thresholds(report.best, out_path);
  return kExitOk;
}

// ---- synth ------------------------------------------------------------------

int cmd_synth(const CommonFlags& flags, const std::string& out_dir, int n_frames,
              double snow_rate, int seq_len) {
  auto cfg = resolve_config(flags);
  fs::create_directories(out_dir);
  DatasetManifest manifest;
  for (int k = 0; k < n_frames; ++k) {
    const auto cloud = synth_scene(cfg.train.seed + static_cast<std::uint64_t>(k),
                                   cfg.projection.h, cfg.projection.w, snow_rate, cfg.projection);
    char name[32];
    std::snprintf(name, sizeof(name), "%06d", k);
    const std::string bin = out_dir + "/" + name + ".bin";
    const std::string label = out_dir + "/" + name + ".label";
    save_cloud(cloud, bin);
    save_labels(cloud.labels, label);
    const std::string seq_id = "seq" + std::to_string(k / seq_len);
    if (manifest.sequences.empty() || manifest.sequences.back().sequence_id != seq_id)
      manifest.sequences.push_back({seq_id, {}, {}});
    manifest.sequences.back().frames.push_back(bin);
    manifest.sequences.back().label_paths.push_back(label);
  }
  save_manifest(manifest, out_dir + "/manifest.txt");
  std::printf("wrote %d frames to %s\n", n_frames, out_dir.c_str());
  return kExitOk;
}

// ---- map --------------------------------------------------------------------

int cmd_map(const CommonFlags& flags, const std::string& in_dir, const std::string& poses_path,
            const std::string& out_path, double voxel) {
  (void)resolve_config(flags);
  const auto files = list_bin_files(in_dir);
  const auto poses = load_poses(poses_path);
  if (files.size() != poses.size())
    throw DataError("map: " + std::to_string(files.size()) + " frames vs " +
                    std::to_string(poses.size()) + " poses");
  std::vector<PointCloud> clouds;
  for (const auto& f : files) clouds.push_back(load_bin(f));
  const auto merged = accumulate_map(clouds, poses, voxel);
  save_cloud(merged, out_path);
  std::printf("map: %zu points -> %s\n", merged.size(), out_path.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LiDAR snow removal: unsupervised denoising network with classic baselines"};
  app.require_subcommand(1);

  CommonFlags flags;

  auto* train_cmd = app.add_subcommand("train", "train the denoising network");
  std::string manifest_path, out_dir;
  train_cmd->add_option("--manifest", manifest_path, "training manifest")->required();
  train_cmd->add_option("--out", out_dir, "checkpoint directory")->required();
  add_common(train_cmd, flags);

  auto* denoise_cmd = app.add_subcommand("denoise", "remove snow from .bin frames");
  std::string ckpt, in_dir, thresholds_path;
  denoise_cmd->add_option("--ckpt", ckpt, "checkpoint file")->required();
  denoise_cmd->add_option("--in", in_dir, "input directory of .bin frames")->required();
  denoise_cmd->add_option("--out", out_dir, "output directory")->required();
  denoise_cmd->add_option("--thresholds", thresholds_path, "thresholds file");
  add_common(denoise_cmd, flags);

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a method against labels");
  std::string method = "lisnownet", csv_path;
  bool no_timing = false;
  eval_cmd->add_option("--method", method, "lisnownet|dror|dsor|median")->required();
  eval_cmd->add_option("--manifest", manifest_path, "labeled manifest")->required();
  eval_cmd->add_option("--ckpt", ckpt, "checkpoint (lisnownet)");
  eval_cmd->add_option("--thresholds", thresholds_path, "thresholds file");
  eval_cmd->add_option("--csv", csv_path, "write metrics CSV here");
  eval_cmd->add_flag("--no-timing", no_timing, "zero out runtime columns (deterministic output)");
  add_common(eval_cmd, flags);

  auto* bench_cmd = app.add_subcommand("bench", "benchmark methods on a frame set");
  std::string methods_arg = "lisnownet,dror,dsor,median", frames_dir;
  int reps = 5, warmup = 1;
  bench_cmd->add_option("--methods", methods_arg, "comma-separated method list");
  bench_cmd->add_option("--frames", frames_dir, "directory of .bin frames")->required();
  bench_cmd->add_option("--reps", reps, "timed repetitions per frame");
  bench_cmd->add_option("--warmup", warmup, "untimed warmup passes");
  bench_cmd->add_option("--ckpt", ckpt, "checkpoint (lisnownet)");
  bench_cmd->add_option("--csv", csv_path, "write runtime CSV here");
  add_common(bench_cmd, flags);

  auto* tune_cmd = app.add_subcommand("tune", "grid-search decision thresholds");
  std::string grid_path, tune_out;
  tune_cmd->add_option("--ckpt", ckpt, "checkpoint file")->required();
  tune_cmd->add_option("--manifest", manifest_path, "labeled manifest")->required();
  tune_cmd->add_option("--grid", grid_path, "grid file (n_d/n_i/delta_bar lists)");
  tune_cmd->add_option("--out", tune_out, "write chosen thresholds here");
  add_common(tune_cmd, flags);

  auto* synth_cmd = app.add_subcommand("synth", "generate labeled synthetic frames");
  int n_frames = 16, seq_len = 8;
  double snow_rate = 0.1;
  synth_cmd->add_option("--out", out_dir, "output directory")->required();
  synth_cmd->add_option("--frames", n_frames, "number of frames");
  synth_cmd->add_option("--snow-rate", snow_rate, "snow points per scene point");
  synth_cmd->add_option("--seq-len", seq_len, "frames per sequence in the manifest");
  add_common(synth_cmd, flags);

  auto* map_cmd = app.add_subcommand("map", "accumulate posed frames into one cloud");
  std::string poses_path, map_out = "cloud.bin";
  double voxel = 0.0;
  map_cmd->add_option("--in", in_dir, "directory of .bin frames")->required();
  map_cmd->add_option("--poses", poses_path, "poses file (KITTI 3x4 per line)")->required();
  map_cmd->add_option("--out", map_out, "output cloud");
  map_cmd->add_option("--voxel", voxel, "voxel size for downsampling (meters)");
  add_common(map_cmd, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(flags, manifest_path, out_dir);
    if (denoise_cmd->parsed())
      return cmd_denoise(flags, ckpt, in_dir, out_dir, thresholds_path);
    if (eval_cmd->parsed())
      return cmd_eval(flags, method, manifest_path, ckpt, thresholds_path, csv_path, no_timing);
    if (bench_cmd->parsed())
      return cmd_bench(flags, methods_arg, frames_dir, reps, warmup, ckpt, csv_path);
    if (tune_cmd->parsed()) return cmd_tune(flags, ckpt, manifest_path, grid_path, tune_out);
    if (synth_cmd->parsed()) return cmd_synth(flags, out_dir, n_frames, snow_rate, seq_len);
    if (map_cmd->parsed()) return cmd_map(flags, in_dir, poses_path, map_out, voxel);
  } catch (const CLI::Error& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
