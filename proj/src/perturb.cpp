#include "fedem/perturb.hpp"

#include <cmath>
#include <stdexcept>

namespace fedem {

void PerturbationConfig::validate() const {
  if (rho_min < 0 || rho_max < rho_min)
    throw std::invalid_argument("perturbation radii must satisfy 0 <= rho_min <= rho_max");
  if (alpha < 0) throw std::invalid_argument("perturbation step size must be nonnegative");
  if (iterations < 1) throw std::invalid_argument("perturbation iterations must be at least 1");
  if (loss_scale <= 0) throw std::invalid_argument("loss scale must be positive");
}

Tensor project_annulus(Tensor delta, const PerturbationConfig& cfg) {
  for (double& v : delta.data) v = std::min(std::max(v, -cfg.rho_max), cfg.rho_max);
  if (cfg.rho_min <= 0.0) return delta;

  std::size_t arg = 0;
  double mx = 0.0;
  for (std::size_t i = 0; i < delta.numel(); ++i) {
    const double a = std::fabs(delta.data[i]);
    if (a > mx) {
      mx = a;
      arg = i;
    }
  }
  if (mx >= cfg.rho_min) return delta;
  if (mx == 0.0) {
    delta.data[0] = cfg.rho_min;
    return delta;
  }
  // Radial rescale onto the inner shell; the peak component is then pinned
  // to exactly +/- rho_min so the sup-norm bound holds without round-off.
  const double s = cfg.rho_min / mx;
  for (double& v : delta.data) v *= s;
  delta.data[arg] = delta.data[arg] < 0 ? -cfg.rho_min : cfg.rho_min;
  return delta;
}

Tensor init_delta(const Shape& shape, const PerturbationConfig& cfg, Rng& rng) {
  Tensor delta(shape);
  for (double& v : delta.data) v = rng.uniform(-cfg.rho_max, cfg.rho_max);
  return project_annulus(std::move(delta), cfg);
}

namespace {

// Both alternating steps share this loss wiring; `delta_leaf` selects which
// side becomes differentiable leaves.
struct LossGraph {
  Graph g;
  std::vector<NodeId> params;
  NodeId delta = -1;
  NodeId loss = -1;
};

void build_loss(LossGraph& lg, const ParameterSet& theta, const Tensor& x_raw,
                const Tensor& delta, const std::vector<int>& y, const PerturbationConfig& cfg,
                const NormalizationTransform& t, std::size_t channels, std::size_t hw,
                bool delta_as_leaf) {
  Graph& g = lg.g;
  lg.params = make_param_leaves(g, theta);
  NodeId xc = g.constant(x_raw);
  lg.delta = delta_as_leaf ? g.leaf(delta) : g.constant(delta);
  NodeId shifted = g.add(xc, g.scale(lg.delta, 1.0 / 255.0));
  NodeId xn = apply_normalize(g, t, shifted, channels, hw);
  NodeId logits = model_logits(g, theta.spec, lg.params, xn);
  lg.loss = g.softmax_cross_entropy(logits, y);
  if (cfg.loss_scale != 1.0) lg.loss = g.scale(lg.loss, cfg.loss_scale);
}

}  // namespace

PerturbationResult generate_perturbation(const ParameterSet& theta, const Tensor& x_raw,
                                         const std::vector<int>& y,
                                         const PerturbationConfig& cfg,
                                         const NormalizationTransform& t, Rng& rng) {
  cfg.validate();
  const std::size_t channels = theta.spec.channels;
  const std::size_t hw = theta.spec.height * theta.spec.width;

  Tensor delta = init_delta(x_raw.shape, cfg, rng);
  ParameterSet theta_u = theta;

  for (int n = 0; n < cfg.iterations; ++n) {
    {
      LossGraph lg;
      build_loss(lg, theta_u, x_raw, delta, y, cfg, t, channels, hw, true);
      std::vector<NodeId> wrt{lg.delta};
      const Tensor& gd = lg.g.value(lg.g.grad(lg.loss, wrt)[0]);
      for (std::size_t i = 0; i < delta.numel(); ++i) {
        const double s = gd.data[i] > 0 ? 1.0 : (gd.data[i] < 0 ? -1.0 : 0.0);
        delta.data[i] -= cfg.alpha * s;
      }
      delta = project_annulus(std::move(delta), cfg);
    }
    {
      LossGraph lg;
      build_loss(lg, theta_u, x_raw, delta, y, cfg, t, channels, hw, false);
      auto grads = lg.g.grad(lg.loss, lg.params);
      theta_u.step(flatten_nodes(lg.g, grads), cfg.eta_u);
    }
  }

  PerturbationResult r;
  r.x_perturbed_raw = x_raw;
  for (std::size_t i = 0; i < delta.numel(); ++i)
    r.x_perturbed_raw.data[i] += delta.data[i] / 255.0;
  r.delta = std::move(delta);
  return r;
}

std::vector<double> client_gradient(const ParameterSet& theta, const Tensor& x_raw,
                                    const std::vector<int>& y,
                                    const NormalizationTransform& t) {
  Graph g;
  auto params = make_param_leaves(g, theta);
  NodeId xn = apply_normalize(g, t, g.constant(x_raw), theta.spec.channels,
                              theta.spec.height * theta.spec.width);
  NodeId loss = g.softmax_cross_entropy(model_logits(g, theta.spec, params, xn), y);
  return flatten_nodes(g, g.grad(loss, params));
}

}  // namespace fedem
