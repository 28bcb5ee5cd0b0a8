#ifndef LISNOW_OPTIM_HPP
#define LISNOW_OPTIM_HPP

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "lisnow/common.hpp"
#include "lisnow/tensor.hpp"

namespace lisnow {

// Named learnable tensors plus per-parameter Adam state. Iteration always
// follows registration order so updates and serialization are deterministic.
template <class S>
struct ParamStore {
  std::vector<std::string> order;
  std::map<std::string, Tensor<S>> params;
  std::map<std::string, std::vector<double>> adam_m;
  std::map<std::string, std::vector<double>> adam_v;
  long long step_count = 0;

  Tensor<S>& add(const std::string& name, std::vector<int> shape) {
    if (params.count(name)) throw std::invalid_argument("duplicate parameter: " + name);
    order.push_back(name);
    auto [it, _] = params.emplace(name, Tensor<S>::zeros(std::move(shape), true));
    adam_m[name].assign(it->second.numel(), 0.0);
    adam_v[name].assign(it->second.numel(), 0.0);
    return it->second;
  }

  Tensor<S>& get(const std::string& name) {
    auto it = params.find(name);
    if (it == params.end()) throw std::invalid_argument("unknown parameter: " + name);
    return it->second;
  }
  const Tensor<S>& get(const std::string& name) const {
    auto it = params.find(name);
    if (it == params.end()) throw std::invalid_argument("unknown parameter: " + name);
    return it->second;
  }

  std::size_t total_count() const {
    std::size_t n = 0;
    for (const auto& name : order) n += params.at(name).numel();
    return n;
  }

  void zero_grad() {
    for (const auto& name : order) {
      auto& g = params.at(name).grad();
      std::fill(g.begin(), g.end(), S(0));
    }
  }
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam, applied in place; gradients are cleared afterwards.
template <class S>
void adam_step(ParamStore<S>& store, double lr, const AdamConfig& cfg = {}) {
  ++store.step_count;
  const double t = static_cast<double>(store.step_count);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (const auto& name : store.order) {
    auto& p = store.params.at(name);
    if (!p.has_grad())
      throw std::invalid_argument("adam_step: parameter has no gradient: " + name);
    auto& val = p.values();
    auto& g = p.grad();
    auto& m = store.adam_m.at(name);
    auto& v = store.adam_v.at(name);
    for (std::size_t i = 0; i < val.size(); ++i) {
      const double gi = static_cast<double>(g[i]);
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      val[i] -= static_cast<S>(lr * mhat / (std::sqrt(vhat) + cfg.eps));
      g[i] = S(0);
    }
  }
}

// Checkpoint format (little-endian): magic "LSNW", u32 version, u32 count,
// then per parameter: u32 name length, name bytes, u32 rank, u32 dims[rank],
// float32 values. Optimizer state is not serialized.
inline constexpr std::uint32_t kCheckpointVersion = 1;

template <class S>
void save_checkpoint(const ParamStore<S>& store, const std::string& path) {
  std::vector<char> bytes;
  auto put = [&](const void* p, std::size_t n) {
    bytes.insert(bytes.end(), static_cast<const char*>(p), static_cast<const char*>(p) + n);
  };
  auto put_u32 = [&](std::uint32_t v) { put(&v, 4); };
  put("LSNW", 4);
  put_u32(kCheckpointVersion);
  put_u32(static_cast<std::uint32_t>(store.order.size()));
  for (const auto& name : store.order) {
    const auto& p = store.params.at(name);
    put_u32(static_cast<std::uint32_t>(name.size()));
    put(name.data(), name.size());
    put_u32(static_cast<std::uint32_t>(p.shape().size()));
    for (int d : p.shape()) put_u32(static_cast<std::uint32_t>(d));
    for (S v : p.values()) {
      const float f = static_cast<float>(v);
      put(&f, 4);
    }
  }
  write_file_bytes(path, bytes.data(), bytes.size());
}

template <class S>
ParamStore<S> load_checkpoint(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  std::size_t pos = 0;
  auto need = [&](std::size_t n) {
    if (pos + n > bytes.size()) throw DataError("truncated checkpoint: " + path);
  };
  auto get_u32 = [&]() {
    need(4);
    std::uint32_t v;
    std::memcpy(&v, bytes.data() + pos, 4);
    pos += 4;
    return v;
  };
  need(4);
  if (std::memcmp(bytes.data(), "LSNW", 4) != 0)
    throw DataError("not a checkpoint file: " + path);
  pos = 4;
  if (get_u32() != kCheckpointVersion) throw DataError("unsupported checkpoint version: " + path);
  const std::uint32_t count = get_u32();
  ParamStore<S> store;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = get_u32();
    need(name_len);
    std::string name(bytes.data() + pos, name_len);
    pos += name_len;
    const std::uint32_t rank = get_u32();
    std::vector<int> shape(rank);
    std::size_t numel = 1;
    for (auto& d : shape) {
      d = static_cast<int>(get_u32());
      numel *= static_cast<std::size_t>(d);
    }
    auto& t = store.add(name, shape);
    need(numel * 4);
    for (std::size_t j = 0; j < numel; ++j) {
      float f;
      std::memcpy(&f, bytes.data() + pos, 4);
      pos += 4;
      t.values()[j] = static_cast<S>(f);
    }
  }
  return store;
}

}  // namespace lisnow

#endif  // LISNOW_OPTIM_HPP
