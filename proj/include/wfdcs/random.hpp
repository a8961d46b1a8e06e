#ifndef WFDCS_RANDOM_HPP
#define WFDCS_RANDOM_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace wfdcs {

// splitmix64: decorrelates derived seeds (per-trial, per-channel streams).
inline uint64_t mix_seed(uint64_t seed, uint64_t stream) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Deterministic standard normal via Box-Muller; identical streams on any
// platform, unlike std::normal_distribution.
class GaussianRng {
public:
  explicit GaussianRng(uint64_t seed) : eng_(seed) {}

  double uniform() {
    // 53-bit mantissa uniform in (0,1]
    const uint64_t r = eng_();
    return (static_cast<double>(r >> 11) + 1.0) * 0x1.0p-53;
  }

  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double rad = std::sqrt(-2.0 * std::log(u1));
    const double ang = 2.0 * std::numbers::pi * u2;
    spare_ = rad * std::sin(ang);
    have_spare_ = true;
    return rad * std::cos(ang);
  }

  // integer in [0, bound) without modulo bias
  uint64_t below(uint64_t bound) {
    const uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    uint64_t r;
    do {
      r = eng_();
    } while (r >= limit);
    return r % bound;
  }

  std::mt19937_64 &engine() { return eng_; }

private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

} // namespace wfdcs

#endif
