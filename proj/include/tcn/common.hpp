#pragma once

#include <cstdint>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace tcn {

using Shape = std::vector<int>;

inline int64_t numel(const Shape& shape) {
  int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

[[noreturn]] inline void fail(const std::string& msg) {
  throw std::invalid_argument(msg);
}

inline void check(bool ok, const std::string& msg) {
  if (!ok) fail(msg);
}

// Raised when a training loop hits a non-finite loss; the CLI maps it to
// exit code 4 after writing a diagnostic snapshot.
struct NumericalAbort : std::runtime_error {
  explicit NumericalAbort(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised when a referenced input (checkpoint, manifest, run directory) does
// not exist; the CLI maps it to exit code 3.
struct MissingInput : std::runtime_error {
  explicit MissingInput(const std::string& msg) : std::runtime_error(msg) {}
};

// FNV-1a, used for config hashes and seed derivation.
inline uint64_t fnv1a(const void* data, size_t len, uint64_t h = 0xcbf29ce484222325ull) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline uint64_t fnv1a(const std::string& s) { return fnv1a(s.data(), s.size()); }

inline std::string hex64(uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

}  // namespace tcn
