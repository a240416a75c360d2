// Shared utilities: error taxonomy, deterministic RNG, hashing, small formatting helpers.
#pragma once

#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cirl {

// ---------------------------------------------------------------------------
// Errors

enum class ErrorKind {
  Config,   // invalid configuration or arguments
  Data,     // malformed file, shape mismatch, bad dataset
  Numeric,  // non-finite values where finite ones are required
  Logic,    // contract violation inside the library
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

inline std::string strfmt(const char* fmt, ...) {
  va_list args;
  va_start(args, fmt);
  char buf[1024];
  std::vsnprintf(buf, sizeof(buf), fmt, args);
  va_end(args);
  return std::string(buf);
}

[[noreturn]] inline void throw_config(const std::string& msg) { throw Error(ErrorKind::Config, msg); }
[[noreturn]] inline void throw_data(const std::string& msg) { throw Error(ErrorKind::Data, msg); }
[[noreturn]] inline void throw_numeric(const std::string& msg) { throw Error(ErrorKind::Numeric, msg); }
[[noreturn]] inline void throw_logic(const std::string& msg) { throw Error(ErrorKind::Logic, msg); }

inline void require(bool cond, ErrorKind kind, const std::string& msg) {
  if (!cond) throw Error(kind, msg);
}

// ---------------------------------------------------------------------------
// Hashing (stable across platforms; used for seeds and provenance)

inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Order-sensitive combiner for deriving episode/stream seeds.
inline uint64_t seed_mix(uint64_t a, uint64_t b) { return splitmix64(a ^ splitmix64(b)); }

// ---------------------------------------------------------------------------
// Deterministic RNG
//
// std::mt19937_64 output is specified bit-exactly by the standard; the
// distributions below are hand-rolled because the standard library's
// distribution objects are implementation-defined.

class Rng {
 public:
  explicit Rng(uint64_t seed) : s_(splitmix64(seed)) {}

  uint64_t next_u64() {
    // xoshiro-style splitmix stream: simple, fast, full 64-bit state walk
    s_ += 0x9e3779b97f4a7c15ull;
    uint64_t z = s_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1).
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n); n must be positive.
  int uniform_int(int n) { return int(next_u64() % uint64_t(n)); }

  /// Standard normal via Box-Muller (cosine branch only, no cached state).
  double normal() {
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  /// Fisher-Yates; std::shuffle is implementation-defined, this one is not.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = next_u64() % i;
      std::swap(v[i - 1], v[j]);
    }
  }

  /// Derive an independent child stream; advances this stream by one draw.
  Rng fork(uint64_t salt) { return Rng(seed_mix(next_u64(), salt)); }

 private:
  uint64_t s_;
};

// ---------------------------------------------------------------------------
// Formatting

/// Shortest round-trip decimal form; stable text output for hashable CSVs.
inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  // trim to the shortest representation that still round-trips
  for (int prec = 1; prec < 17; ++prec) {
    char shorter[40];
    std::snprintf(shorter, sizeof(shorter), "%.*g", prec, v);
    if (std::strtod(shorter, nullptr) == v) return std::string(shorter);
  }
  return std::string(buf);
}

inline bool finite(double v) { return std::isfinite(v); }

}  // namespace cirl
