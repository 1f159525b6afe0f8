#pragma once

#include <cstdint>
#include <initializer_list>
#include <cmath>
#include <random>
#include <utility>

namespace tabraster {

// Stream tags that separate independent uses of one root seed.
enum class Stage : std::uint64_t {
  elastic = 0x656c6173ULL,
  morphology = 0x6d6f7270ULL,
  split = 0x73706c74ULL,
  palette = 0x70616c74ULL,
  shuffle = 0x73687566ULL,
  synthetic = 0x73796e74ULL,
  trial = 0x7472616cULL,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// A random sequence identified by a root seed plus a derivation path such as
// (sample id, aug index, stage). The sequence depends only on that identity,
// never on how many other streams were created before it, so work can be
// scheduled in any order. All conversions to real/integer values are done by
// hand so results are identical across standard library implementations.
class RngStream {
 public:
  RngStream(std::uint64_t root_seed, std::initializer_list<std::uint64_t> path)
      : engine_(derive(root_seed, path)) {}

  RngStream(std::uint64_t root_seed, std::uint64_t a, std::uint64_t b, Stage stage)
      : RngStream(root_seed, {a, b, static_cast<std::uint64_t>(stage)}) {}

  static std::uint64_t derive(std::uint64_t root_seed,
                              std::initializer_list<std::uint64_t> path) {
    std::uint64_t h = splitmix64(root_seed);
    for (std::uint64_t p : path) h = splitmix64(h ^ splitmix64(p + 0x632be59bd9b4e019ULL));
    return h;
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1).
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer on [lo, hi], unbiased.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<std::int64_t>(engine_());
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return lo + static_cast<std::int64_t>(x % span);
  }

  // Standard normal via Box-Muller.
  double normal() {
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  template <typename It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::int64_t>(last - first);
    for (std::int64_t i = n - 1; i > 0; --i) {
      const auto j = uniform_int(0, i);
      std::swap(first[i], first[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace tabraster
