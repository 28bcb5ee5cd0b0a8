#ifndef LISNOW_RNG_HPP
#define LISNOW_RNG_HPP

#include <cmath>
#include <cstdint>
#include <string_view>

namespace lisnow {

// Counter-based generator: every draw is a pure function of (seed, stream,
// counter), so identical seeds give identical sequences regardless of how
// work is scheduled. Streams are derived by hashing a label, which lets
// independent consumers (init, dropout, shuffling) share one seed without
// coupling their sequences.
class RngState {
 public:
  RngState() : RngState(0) {}
  explicit RngState(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(seed), stream_(stream), counter_(0) {}

  static std::uint64_t hash_label(std::string_view label) {
    std::uint64_t h = 14695981039346656037ull;
    for (char c : label) {
      h ^= static_cast<std::uint8_t>(c);
      h *= 1099511628211ull;
    }
    return h;
  }

  RngState fork(std::string_view label) const {
    return RngState(seed_, mix(stream_ ^ hash_label(label)));
  }
  RngState fork(std::uint64_t salt) const { return RngState(seed_, mix(stream_ ^ salt)); }

  std::uint64_t next_u64() {
    std::uint64_t x = seed_ + 0x9e3779b97f4a7c15ull * (counter_++ + 1);
    x ^= mix(stream_);
    return mix(x);
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t uniform_u64(std::uint64_t bound) { return next_u64() % bound; }

  double normal() {
    // Box-Muller; one value per call keeps the draw count predictable.
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  template <class It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      const auto j = uniform_u64(i);
      std::swap(*(first + static_cast<std::ptrdiff_t>(i - 1)),
                *(first + static_cast<std::ptrdiff_t>(j)));
    }
  }

  std::uint64_t seed() const { return seed_; }

 private:
  static std::uint64_t mix(std::uint64_t x) {
    // splitmix64 finalizer
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ull;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebull;
    x ^= x >> 31;
    return x;
  }

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_;
};

}  // namespace lisnow

#endif  // LISNOW_RNG_HPP
