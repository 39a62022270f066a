#include "fedem/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace fedem {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t Rng::uniform_int(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_int(0)");
  // Rejection sampling over the largest multiple of n, unbiased.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = eng_();
  } while (x >= limit);
  return x % n;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_normal_;
  }
  // Box-Muller; u1 is kept away from 0 so log() stays finite.
  double u1, u2;
  do {
    u1 = uniform01();
  } while (u1 <= 0.0);
  u2 = uniform01();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_normal_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

double Rng::laplace(double b) {
  if (b <= 0) throw std::invalid_argument("laplace scale must be positive");
  // Inverse CDF: u in (-1/2, 1/2], x = -b * sgn(u) * ln(1 - 2|u|).
  double u = uniform01() - 0.5;
  if (u == -0.5) u = 0.5;  // uniform01() is half-open at 1, mirror the edge
  const double s = u < 0 ? -1.0 : 1.0;
  return -b * s * std::log(1.0 - 2.0 * std::fabs(u));
}

namespace {
// FNV-1a over the stream name; stable across platforms.
std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}
}  // namespace

std::uint64_t SeedSplitter::derive(std::string_view name, std::uint64_t a, std::uint64_t b) const {
  std::uint64_t h = splitmix64(master_ ^ fnv1a(name));
  h = splitmix64(h ^ (a * 0x9e3779b97f4a7c15ULL + 1));
  h = splitmix64(h ^ (b * 0xd1342543de82ef95ULL + 2));
  return h;
}

}  // namespace fedem
