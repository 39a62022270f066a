#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace fedem {

/// Deterministic pseudo-random stream with platform-independent draws.
/// std::mt19937_64 supplies the raw bits (its output sequence is fully
/// specified by the standard); all distributions are derived here rather
/// than through std::*_distribution, whose mappings are
/// implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }
  /// Uniform draw in [0, 1) with 53 bits of precision.
  double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  /// Uniform integer in [0, n); n must be positive.
  std::uint64_t uniform_int(std::uint64_t n);
  /// Standard normal via Box-Muller (pairs are consumed eagerly).
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  /// Laplace(0, b) via inverse CDF.
  double laplace(double b);

  /// In-place Fisher-Yates shuffle, fixed traversal order.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    if (v.empty()) return;
    for (std::size_t i = v.size() - 1; i > 0; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(i + 1));
      std::swap(v[i], v[j]);
    }
  }

 private:
  std::mt19937_64 eng_;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

/// Splits one master seed into named, counter-indexed streams. Adding a new
/// consumer (a new stream name) never shifts the seeds of existing streams.
class SeedSplitter {
 public:
  explicit SeedSplitter(std::uint64_t master) : master_(master) {}

  /// Derive the stream seed for (name, a, b); a/b are free counters
  /// (client id, round, restart index, ...).
  std::uint64_t derive(std::string_view name, std::uint64_t a = 0, std::uint64_t b = 0) const;

  Rng stream(std::string_view name, std::uint64_t a = 0, std::uint64_t b = 0) const {
    return Rng(derive(name, a, b));
  }

  std::uint64_t master() const { return master_; }

 private:
  std::uint64_t master_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace fedem
