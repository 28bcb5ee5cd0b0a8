#ifndef LISNOW_CONFIG_HPP
#define LISNOW_CONFIG_HPP

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "lisnow/baselines.hpp"
#include "lisnow/net.hpp"
#include "lisnow/range_image.hpp"
#include "lisnow/train.hpp"

namespace lisnow {

// Flat configuration shared by all CLI subcommands. File format is plain
// `key=value` lines with `#` comments; command-line flags are applied after
// the file, last one wins. dump() round-trips through parse_line().
struct RunConfig {
  ProjectionConfig projection;
  VoidFillConfig void_fill;
  NetworkConfig network;
  LossWeights loss;
  TrainConfig train;
  Thresholds thresholds;
  DrorConfig dror;
  DsorConfig dsor;
  MedianConfig median;
  std::set<std::uint32_t> snow_ids{110, 111};
  int jobs = 1;

  static double deg2rad(double d) { return d * 3.141592653589793238462643 / 180.0; }
  static double rad2deg(double r) { return r * 180.0 / 3.141592653589793238462643; }

  void parse_line(const std::string& key, const std::string& value) {
    auto num = [&]() {
      try {
        return std::stod(value);
      } catch (...) {
        throw DataError("config: bad numeric value for " + key + ": " + value);
      }
    };
    if (key == "projection.h") projection.h = static_cast<int>(num());
    else if (key == "projection.w") projection.w = static_cast<int>(num());
    else if (key == "projection.fov_min_deg") projection.fov_min = deg2rad(num());
    else if (key == "projection.fov_max_deg") projection.fov_max = deg2rad(num());
    else if (key == "void_fill.dog_sigma1") void_fill.dog_sigma1 = num();
    else if (key == "void_fill.dog_sigma2") void_fill.dog_sigma2 = num();
    else if (key == "network.levels") network.levels = static_cast<int>(num());
    else if (key == "network.base_channels") network.base_channels = static_cast<int>(num());
    else if (key == "network.blocks_per_level") network.blocks_per_level = static_cast<int>(num());
    else if (key == "network.dropout_p") network.dropout_p = num();
    else if (key == "loss.alpha") loss.alpha = num();
    else if (key == "loss.beta") loss.beta = num();
    else if (key == "train.epochs") train.epochs = static_cast<int>(num());
    else if (key == "train.batch_size") train.batch_size = static_cast<int>(num());
    else if (key == "train.lr") train.lr = num();
    else if (key == "train.lr_decay") train.lr_decay = num();
    else if (key == "train.seed") train.seed = static_cast<std::uint64_t>(num());
    else if (key == "thresholds.n_d") thresholds.n_d = num();
    else if (key == "thresholds.n_i") thresholds.n_i = num();
    else if (key == "thresholds.delta_bar") thresholds.delta_bar = num();
    else if (key == "dror.radius_multiplier") dror.radius_multiplier = num();
    else if (key == "dror.azimuth_resolution") dror.azimuth_resolution = num();
    else if (key == "dror.min_radius") dror.min_radius = num();
    else if (key == "dror.min_neighbors") dror.min_neighbors = static_cast<int>(num());
    else if (key == "dsor.k_neighbors") dsor.k_neighbors = static_cast<int>(num());
    else if (key == "dsor.stddev_multiplier") dsor.stddev_multiplier = num();
    else if (key == "dsor.range_multiplier") dsor.range_multiplier = num();
    else if (key == "median.tau_d") median.tau_d = num();
    else if (key == "median.tau_i") median.tau_i = num();
    else if (key == "snow_ids") snow_ids = parse_id_list(value);
    else if (key == "jobs") jobs = static_cast<int>(num());
    else throw DataError("config: unknown key: " + key);
  }

  static std::set<std::uint32_t> parse_id_list(const std::string& value) {
    std::set<std::uint32_t> ids;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) ids.insert(static_cast<std::uint32_t>(std::stoul(item)));
    if (ids.empty()) throw DataError("config: empty id list");
    return ids;
  }

  void load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file: " + path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      // trim
      const auto b = line.find_first_not_of(" \t\r");
      if (b == std::string::npos) continue;
      const auto e = line.find_last_not_of(" \t\r");
      line = line.substr(b, e - b + 1);
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw DataError("config " + path + ": line " + std::to_string(lineno) + " missing '='");
      auto strip = [](std::string s) {
        const auto sb = s.find_first_not_of(" \t");
        const auto se = s.find_last_not_of(" \t");
        return sb == std::string::npos ? std::string() : s.substr(sb, se - sb + 1);
      };
      parse_line(strip(line.substr(0, eq)), strip(line.substr(eq + 1)));
    }
  }

  std::string dump() const {
    std::ostringstream out;
    char buf[128];
    auto put = [&](const char* key, double v) {
      std::snprintf(buf, sizeof(buf), "%s=%.9g\n", key, v);
      out << buf;
    };
    put("projection.h", projection.h);
    put("projection.w", projection.w);
    put("projection.fov_min_deg", rad2deg(projection.fov_min));
    put("projection.fov_max_deg", rad2deg(projection.fov_max));
    put("void_fill.dog_sigma1", void_fill.dog_sigma1);
    put("void_fill.dog_sigma2", void_fill.dog_sigma2);
    put("network.levels", network.levels);
    put("network.base_channels", network.base_channels);
    put("network.blocks_per_level", network.blocks_per_level);
    put("network.dropout_p", network.dropout_p);
    put("loss.alpha", loss.alpha);
    put("loss.beta", loss.beta);
    put("train.epochs", train.epochs);
    put("train.batch_size", train.batch_size);
    put("train.lr", train.lr);
    put("train.lr_decay", train.lr_decay);
    put("train.seed", static_cast<double>(train.seed));
    put("thresholds.n_d", thresholds.n_d);
    put("thresholds.n_i", thresholds.n_i);
    put("thresholds.delta_bar", thresholds.delta_bar);
    put("dror.radius_multiplier", dror.radius_multiplier);
    put("dror.azimuth_resolution", dror.azimuth_resolution);
    put("dror.min_radius", dror.min_radius);
    put("dror.min_neighbors", dror.min_neighbors);
    put("dsor.k_neighbors", dsor.k_neighbors);
    put("dsor.stddev_multiplier", dsor.stddev_multiplier);
    put("dsor.range_multiplier", dsor.range_multiplier);
    put("median.tau_d", median.tau_d);
    put("median.tau_i", median.tau_i);
    out << "snow_ids=";
    bool first = true;
    for (auto id : snow_ids) {
      if (!first) out << ',';
      out << id;
      first = false;
    }
    out << "\njobs=" << jobs << "\n";
    return out.str();
  }
};

// Thresholds sidecar: same key=value syntax, keys n_d / n_i / delta_bar.
inline Thresholds load_thresholds(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open thresholds file: " + path);
  Thresholds th;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const double v = std::stod(line.substr(eq + 1));
    if (key == "n_d") th.n_d = v;
    else if (key == "n_i") th.n_i = v;
    else if (key == "delta_bar") th.delta_bar = v;
    else throw DataError("thresholds file: unknown key " + key);
  }
  th.validate();
  return th;
}

inline void save_thresholds(const Thresholds& th, const std::string& path) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "n_d=%.9g\nn_i=%.9g\ndelta_bar=%.9g\n", th.n_d, th.n_i,
                th.delta_bar);
  write_file_bytes(path, buf, std::strlen(buf));
}

}  // namespace lisnow

#endif  // LISNOW_CONFIG_HPP
