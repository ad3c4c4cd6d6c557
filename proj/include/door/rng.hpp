#pragma once

#include <door/types.hpp>

#include <cstdint>
#include <random>

namespace door {

// splitmix64 step; used to derive decorrelated substream seeds from
// (master seed, stream index) pairs.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// One reproducible random stream. Substreams derived from (seed, index) are
// independent of thread scheduling, so parallel simulation replicates are
// bitwise reproducible for any thread count. All transforms are hand-rolled:
// the mt19937_64 engine is pinned by the standard, distributions are not.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  static RngStream substream(std::uint64_t master_seed, std::uint64_t stream) {
    std::uint64_t s = master_seed;
    std::uint64_t a = splitmix64(s);
    s ^= 0x5851f42d4c957f2dULL * (stream + 1);
    std::uint64_t b = splitmix64(s);
    return RngStream(a ^ (b + 0x2545f4914f6cdd1dULL * stream));
  }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Standard normal via Marsaglia polar, one spare cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    have_spare_ = true;
    return u * m;
  }

  int bernoulli(double p) { return uniform() < p ? 1 : 0; }

  // Index in [0, probs.size()) drawn from an (unnormalized is fine) mass vector.
  Index categorical(const Vector& probs) {
    const double total = probs.sum();
    double u = uniform() * total;
    for (Index k = 0; k < probs.size(); ++k) {
      u -= probs[k];
      if (u < 0.0) return k;
    }
    return probs.size() - 1;
  }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace door
