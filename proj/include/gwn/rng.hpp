#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace gwn {

std::uint64_t splitmix64(std::uint64_t x);

/// Deterministic random source. Wraps std::mt19937_64 (whose output sequence
/// the standard pins down) and does all value mapping itself, so runs are
/// bit-reproducible across platforms and standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next() { return engine_(); }

  double uniform();                          // [0, 1)
  double uniform(double lo, double hi);      // [lo, hi)
  double normal();                           // standard normal, Box-Muller
  double normal(double mean, double sd) { return mean + sd * normal(); }
  int below(int n);                          // uniform in [0, n)

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      int j = below(i + 1);
      std::swap(v[i], v[static_cast<std::size_t>(j)]);
    }
  }

  /// Independent child stream; depends only on the parent seed and the tag,
  /// not on how many values were drawn so far.
  Rng fork(std::uint64_t tag) const { return Rng(splitmix64(seed_ ^ splitmix64(tag + 0x9e3779b97f4a7c15ULL))); }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace gwn
