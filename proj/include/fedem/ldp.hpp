#pragma once

#include <vector>

#include "fedem/rng.hpp"

namespace fedem {

/// Local-DP style gradient defense: optional L2 clip, then i.i.d.
/// per-component noise before the gradient leaves the client.
struct NoiseSpec {
  enum class Mechanism { kNone, kGaussian, kLaplace };
  Mechanism mechanism = Mechanism::kNone;
  double scale = 0.0;  // sigma for Gaussian, b for Laplace
  double clip = 0.0;   // L2 bound; 0 = no clipping

  void validate() const;
};

/// Scales g by C/||g||2 when the norm exceeds C; otherwise unchanged.
std::vector<double> clip_gradient(std::vector<double> g, double c);

/// Adds mechanism noise componentwise; scale 0 or mechanism none is a
/// pass-through.
std::vector<double> add_noise(std::vector<double> g, const NoiseSpec& spec, Rng& rng);

/// Clip first (when configured), then noise — the full upload transform.
std::vector<double> apply_ldp(std::vector<double> g, const NoiseSpec& spec, Rng& rng);

}  // namespace fedem
