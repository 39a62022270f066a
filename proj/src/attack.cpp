#include "fedem/attack.hpp"

#include <cmath>
#include <stdexcept>

namespace fedem {

void AttackConfig::validate() const {
  if (iterations < 1) throw std::invalid_argument("attack: iterations must be at least 1");
  if (restarts < 1) throw std::invalid_argument("attack: restarts must be at least 1");
  if (lr <= 0) throw std::invalid_argument("attack: learning rate must be positive");
  if (batch < 1) throw std::invalid_argument("attack: batch must be at least 1");
  if (init == Init::kProvided && (init_x.numel() == 0))
    throw std::invalid_argument("attack: provided init requires init_x");
}

NodeId matching_loss(Graph& g, const ParameterSet& theta, NodeId x_hat, NodeId y_node,
                     const std::vector<int>& known_labels,
                     const std::vector<double>& g_target) {
  if (g_target.size() != theta.flat_size())
    throw std::invalid_argument("matching_loss: target length " +
                                std::to_string(g_target.size()) +
                                " does not match parameter count " +
                                std::to_string(theta.flat_size()));
  auto params = make_param_leaves(g, theta);
  NodeId logits = model_logits(g, theta.spec, params, x_hat);
  NodeId inner = known_labels.empty() ? g.soft_cross_entropy(logits, y_node)
                                      : g.softmax_cross_entropy(logits, known_labels);
  auto inner_grads = g.grad(inner, params);

  NodeId total = -1;
  std::size_t pos = 0;
  for (std::size_t p = 0; p < theta.values.size(); ++p) {
    const std::size_t n = theta.values[p].numel();
    Tensor slice(theta.values[p].shape,
                 std::vector<double>(g_target.begin() + pos, g_target.begin() + pos + n));
    pos += n;
    NodeId term = g.sum(g.square(g.sub(inner_grads[p], g.constant(std::move(slice)))));
    total = total < 0 ? term : g.add(total, term);
  }
  return total;
}

namespace {

Tensor softmax_eager(const Tensor& logits) {
  Tensor out = logits;
  const std::size_t m = logits.rows(), n = logits.cols();
  for (std::size_t i = 0; i < m; ++i) {
    double mx = out.data[i * n];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, out.data[i * n + j]);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += std::exp(out.data[i * n + j] - mx);
    for (std::size_t j = 0; j < n; ++j) out.data[i * n + j] = std::exp(out.data[i * n + j] - mx) / s;
  }
  return out;
}

Tensor onehot(const std::vector<int>& labels, std::size_t classes) {
  Tensor out({labels.size(), classes});
  for (std::size_t i = 0; i < labels.size(); ++i)
    out.data[i * classes + static_cast<std::size_t>(labels[i])] = 1.0;
  return out;
}

}  // namespace

ReconstructionResult reconstruct(const ParameterSet& theta, const std::vector<double>& g_target,
                                 const std::vector<int>& known_labels, const AttackConfig& cfg,
                                 const SeedSplitter& seeds, std::uint64_t stream_key) {
  cfg.validate();
  const bool known = cfg.label_mode == AttackConfig::LabelMode::kKnown;
  if (known && known_labels.size() != static_cast<std::size_t>(cfg.batch))
    throw std::invalid_argument("attack: known-label mode needs one label per batch row");
  const std::size_t m = static_cast<std::size_t>(cfg.batch);
  const std::size_t d = theta.spec.input_dim(), c = theta.spec.classes;
  const std::vector<int> no_labels;

  ReconstructionResult best;
  bool have_best = false;

  for (int r = 0; r < cfg.restarts; ++r) {
    Rng rng = seeds.stream("attack", stream_key, static_cast<std::uint64_t>(r));
    Tensor x({m, d}), ylog({m, c});
    if (cfg.init == AttackConfig::Init::kProvided) {
      x = cfg.init_x;
      if (!known) ylog = cfg.init_y;
    } else {
      for (double& v : x.data) v = rng.normal();
      for (double& v : ylog.data) v = rng.normal();
    }

    std::vector<double> trace;
    trace.reserve(static_cast<std::size_t>(cfg.iterations) + 1);
    bool failed = false;
    for (int it = 0; it < cfg.iterations; ++it) {
      try {
        Graph g;
        NodeId xh = g.leaf(x);
        NodeId yh = known ? -1 : g.leaf(ylog);
        NodeId loss = matching_loss(g, theta, xh, yh, known ? known_labels : no_labels, g_target);
        std::vector<NodeId> wrt{xh};
        if (!known) wrt.push_back(yh);
        auto grads = g.grad(loss, wrt);
        trace.push_back(g.value(loss).item());
        const Tensor& gx = g.value(grads[0]);
        for (std::size_t i = 0; i < x.numel(); ++i) x.data[i] -= cfg.lr * gx.data[i];
        if (!known) {
          const Tensor& gy = g.value(grads[1]);
          for (std::size_t i = 0; i < ylog.numel(); ++i) ylog.data[i] -= cfg.lr * gy.data[i];
        }
      } catch (const NumericsError&) {
        failed = true;
        break;
      }
    }
    if (failed) {
      ++best.failed_restarts;
      continue;
    }

    // Score the post-step iterate so the reported loss matches x_hat.
    double final_loss;
    try {
      Graph g;
      NodeId xh = g.leaf(x);
      NodeId yh = known ? -1 : g.leaf(ylog);
      final_loss =
          g.value(matching_loss(g, theta, xh, yh, known ? known_labels : no_labels, g_target))
              .item();
    } catch (const NumericsError&) {
      ++best.failed_restarts;
      continue;
    }
    trace.push_back(final_loss);
    best.traces.push_back(std::move(trace));

    if (!have_best || final_loss < best.final_loss) {
      have_best = true;
      best.final_loss = final_loss;
      best.x_hat = x;
      best.y_probs = known ? onehot(known_labels, c) : softmax_eager(ylog);
    }
  }

  if (!have_best)
    throw std::runtime_error("attack: every restart diverged to non-finite losses");
  return best;
}

std::vector<ReconstructionResult> attack_round(const ParameterSet& theta,
                                               const std::vector<AttackTarget>& targets,
                                               const AttackConfig& cfg,
                                               const SeedSplitter& seeds) {
  std::vector<ReconstructionResult> out;
  out.reserve(targets.size());
  for (const auto& target : targets) {
    const std::uint64_t key =
        (static_cast<std::uint64_t>(target.round) * 10000 +
         static_cast<std::uint64_t>(target.client)) *
            100 +
        static_cast<std::uint64_t>(target.sample);
    const std::vector<int> labels{target.label};
    out.push_back(reconstruct(theta, target.gradient,
                              cfg.label_mode == AttackConfig::LabelMode::kKnown
                                  ? labels
                                  : std::vector<int>{},
                              cfg, seeds, key));
  }
  return out;
}

}  // namespace fedem
