#ifndef LISNOW_COMMON_HPP
#define LISNOW_COMMON_HPP

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace lisnow {

// Data-level failures (missing/malformed files, mismatched sizes).
// The CLI maps these to exit code 2.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values where finite ones are required. CLI exit code 3.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// All on-disk formats are little-endian; this code assumes a little-endian
// host (checked once at startup by the CLI).
inline bool host_is_little_endian() {
  const std::uint32_t probe = 1;
  std::uint8_t byte;
  std::memcpy(&byte, &probe, 1);
  return byte == 1;
}

inline std::vector<char> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw DataError("cannot open file: " + path);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  std::vector<char> bytes(size);
  if (size > 0 && !in.read(bytes.data(), static_cast<std::streamsize>(size)))
    throw DataError("read failed: " + path);
  return bytes;
}

inline void write_file_bytes(const std::string& path, const void* data, std::size_t size) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open file for writing: " + path);
  if (size > 0 && !out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size)))
    throw DataError("write failed: " + path);
}

// FNV-1a, used by tests to assert inputs were not mutated.
inline std::uint64_t fnv1a(const void* data, std::size_t size) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  std::uint64_t h = 1469598103934665603ull;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace lisnow

#endif  // LISNOW_COMMON_HPP
