#pragma once

#include <vector>

#include "fedem/dataset.hpp"
#include "fedem/model.hpp"
#include "fedem/rng.hpp"
#include "fedem/tensor.hpp"

namespace fedem {

/// Error-minimizing perturbation settings. Radii and the step size are in
/// raw pixel units out of 255 (rho_max = 8 means 8/255 on the [0,1] scale);
/// the perturbation is applied to images as x + delta/255.
struct PerturbationConfig {
  double rho_max = 8.0;
  double rho_min = 0.0;
  double alpha = 2.0;   // sign-step size; convention: rho_max / 4
  double eta_u = 0.01;  // co-trained surrogate model learning rate
  int iterations = 5;
  double loss_scale = 1.0;  // test hook; sign steps are invariant to it

  void validate() const;
};

struct PerturbationResult {
  Tensor delta;            // [m, d], pixel units
  Tensor x_perturbed_raw;  // x + delta/255, not yet normalized
};

/// Componentwise clamp to [-rho_max, +rho_max]; if the sup-norm then falls
/// below rho_min, rescale up and pin the largest component to exactly
/// +/- rho_min (an all-zero delta gets rho_min at flat index 0).
Tensor project_annulus(Tensor delta, const PerturbationConfig& cfg);

/// delta ~ uniform(-rho_max, +rho_max) elementwise, then projected.
Tensor init_delta(const Shape& shape, const PerturbationConfig& cfg, Rng& rng);

/// Algorithm: copy theta into a surrogate theta_u, then alternate
/// `iterations` times between a projected sign-descent step on delta (loss
/// gradient at the current theta_u) and an SGD step on theta_u (loss
/// gradient at the updated delta). Returns the final delta and the
/// perturbed raw batch; theta itself is never touched.
PerturbationResult generate_perturbation(const ParameterSet& theta, const Tensor& x_raw,
                                         const std::vector<int>& y,
                                         const PerturbationConfig& cfg,
                                         const NormalizationTransform& t, Rng& rng);

/// Gradient of the *global* model's loss on a (possibly perturbed) raw
/// batch, flattened in canonical order. The normalization t(.) is applied
/// inside, so callers pass raw-pixel batches.
std::vector<double> client_gradient(const ParameterSet& theta, const Tensor& x_raw,
                                    const std::vector<int>& y,
                                    const NormalizationTransform& t);

}  // namespace fedem
