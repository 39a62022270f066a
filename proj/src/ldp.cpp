#include "fedem/ldp.hpp"

#include <cmath>
#include <stdexcept>

namespace fedem {

void NoiseSpec::validate() const {
  if (scale < 0) throw std::invalid_argument("noise scale must be nonnegative");
  if (clip < 0) throw std::invalid_argument("clip bound must be nonnegative");
}

std::vector<double> clip_gradient(std::vector<double> g, double c) {
  if (c <= 0) throw std::invalid_argument("clip bound must be positive");
  auto l2 = [](const std::vector<double>& v) {
    double sq = 0.0;
    for (double x : v) sq += x * x;
    return std::sqrt(sq);
  };
  double norm = l2(g);
  if (norm > c) {
    const double s = c / norm;
    for (double& v : g) v *= s;
    // Rescaling can land a few ulps above the bound; nudge down until the
    // postcondition ||g||2 <= c holds exactly.
    while (l2(g) > c) {
      const double down = std::nextafter(1.0, 0.0);
      for (double& v : g) v *= down;
    }
  }
  return g;
}

std::vector<double> add_noise(std::vector<double> g, const NoiseSpec& spec, Rng& rng) {
  spec.validate();
  if (spec.mechanism == NoiseSpec::Mechanism::kNone || spec.scale == 0.0) return g;
  if (spec.mechanism == NoiseSpec::Mechanism::kGaussian) {
    for (double& v : g) v += spec.scale * rng.normal();
  } else {
    for (double& v : g) v += rng.laplace(spec.scale);
  }
  return g;
}

std::vector<double> apply_ldp(std::vector<double> g, const NoiseSpec& spec, Rng& rng) {
  spec.validate();
  if (spec.clip > 0) g = clip_gradient(std::move(g), spec.clip);
  return add_noise(std::move(g), spec, rng);
}

}  // namespace fedem
