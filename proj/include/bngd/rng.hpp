#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace bngd {

// Counter-based generator: a keyed SplitMix64 finalizer applied to an
// incrementing counter. Substreams are derived from (master seed, stream id),
// so results never depend on scheduling or call interleaving between work
// items.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(mix(seed ^ mix(stream + 0x9e3779b97f4a7c15ull))), counter_(0) {}

  static CounterRng substream(std::uint64_t master_seed, std::uint64_t item) {
    return CounterRng(master_seed, item + 1);
  }

  std::uint64_t next_u64() {
    ++counter_;
    return mix(key_ + counter_ * 0x9e3779b97f4a7c15ull);
  }

  // uniform in [0, 1), 53-bit resolution
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // uniform in (0, 1]
  double uniform_open0() { return 1.0 - uniform(); }

  double uniform_range(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; platform-independent unlike std::normal_distribution
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    const double u1 = uniform_open0();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(theta);
    has_cached_ = true;
    return r * std::cos(theta);
  }

  std::vector<double> gaussian_vector(std::size_t d) {
    std::vector<double> v(d);
    for (auto& x : v) x = normal();
    return v;
  }

  // uniform on the unit sphere S^{d-1}
  std::vector<double> unit_sphere(std::size_t d) {
    std::vector<double> v = gaussian_vector(d);
    double s = 0.0;
    for (double x : v) s += x * x;
    s = std::sqrt(s);
    if (s == 0.0) {  // astronomically unlikely; retry keeps the contract
      return unit_sphere(d);
    }
    for (auto& x : v) x /= s;
    return v;
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ull;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebull;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t key_;
  std::uint64_t counter_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace bngd
