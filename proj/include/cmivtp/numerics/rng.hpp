#pragma once

#include <cstdint>
#include <vector>

namespace cmivtp::num {

/// Counter-based splitmix64 stream.
///
/// Output n is mix(seed + (n + 1) * 0x9E3779B97F4A7C15) with the splitmix64
/// finalizer (shifts 30/27/31, multipliers 0xBF58476D1CE4E5B9 and
/// 0x94D049BB133111EB). Uniform doubles take the top 53 bits. Normals use
/// Box-Muller on two consecutive uniforms and return the cosine branch
/// first, the sine branch on the next call.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64();
  double uniform();                       // [0, 1)
  double uniform(double lo, double hi);   // [lo, hi)
  std::uint64_t uniform_int(std::uint64_t n);  // [0, n)
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

  /// Independent stream keyed by (seed, stream id).
  Rng fork(std::uint64_t stream) const;

  template <class T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_int(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace cmivtp::num
