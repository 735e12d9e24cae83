#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace blockfill {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Stable 64-bit combine; used for per-trial seeds hash(seed, index).
inline std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ splitmix64(b + 0x632be59bd9b4e019ULL));
}

inline std::uint64_t hash_tag(std::string_view tag) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Counter-based random stream. Draws are a pure function of
/// (seed, stream, counter), so independent streams never interact and
/// reordering draws in one stream cannot perturb another.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(hash_combine(seed, stream)) {}

  RngStream derive(std::string_view tag) const {
    return RngStream(key_, hash_tag(tag));
  }
  RngStream derive(std::uint64_t salt) const { return RngStream(key_, salt); }

  std::uint64_t next_u64() { return splitmix64(key_ + (++counter_)); }

  /// Uniform draw in [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; one spare cached per pair.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  /// Index in [0, n).
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  /// Draw from a discrete distribution given by nonnegative weights
  /// (not necessarily normalized) via its cumulative sums.
  std::size_t categorical(const std::vector<double>& cumsum) {
    const double u = uniform() * cumsum.back();
    std::size_t lo = 0, hi = cumsum.size() - 1;
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      if (cumsum[mid] <= u)
        lo = mid + 1;
      else
        hi = mid;
    }
    return lo;
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace blockfill
