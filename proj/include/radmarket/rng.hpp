#pragma once

// Seeded randomness with results that do not depend on the standard library
// implementation (the std distributions are implementation-defined).

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace radmarket {

std::uint64_t splitmix64(std::uint64_t& state);

/// Independent stream seed for (master, stream).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform on [0, n) by rejection; n > 0.
  std::uint64_t below(std::uint64_t n);
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  bool bernoulli(double p) { return uniform() < p; }

  template <class T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[static_cast<std::size_t>(below(i))]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace radmarket
