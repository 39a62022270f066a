#pragma once

#include <cstdint>
#include <vector>

#include "fedem/federation.hpp"
#include "fedem/model.hpp"
#include "fedem/rng.hpp"
#include "fedem/tensor.hpp"

namespace fedem {

/// Gradient-inversion settings. The dummy batch and its soft labels are
/// optimized jointly by plain gradient descent on the gradient-matching
/// loss; the best of `restarts` independent initializations wins.
struct AttackConfig {
  int iterations = 300;
  double lr = 0.1;
  int restarts = 3;
  int batch = 1;             // rows of the dummy batch being reconstructed
  int images_per_client = 2; // targets the trainer stores per client
  enum class LabelMode { kOptimize, kKnown };
  LabelMode label_mode = LabelMode::kOptimize;
  enum class Init { kGaussian, kProvided };
  Init init = Init::kGaussian;
  Tensor init_x, init_y;  // used when init == kProvided
  bool enabled = true;

  void validate() const;
};

struct ReconstructionResult {
  Tensor x_hat;    // [batch, d], normalized domain
  Tensor y_probs;  // [batch, classes], rows sum to 1
  double final_loss = 0;
  std::vector<std::vector<double>> traces;  // matching loss per iteration, per restart
  int failed_restarts = 0;
};

/// || grad_theta L(f_theta(x_hat), y) - g_target ||_2^2 as a graph node.
/// `y_node` carries label logits for the soft mode and is ignored (pass -1)
/// when `known_labels` drives an integer-label loss instead.
NodeId matching_loss(Graph& g, const ParameterSet& theta, NodeId x_hat, NodeId y_node,
                     const std::vector<int>& known_labels,
                     const std::vector<double>& g_target);

/// Best-of-restarts joint descent on (x_hat, label logits). `known_labels`
/// is consulted only in known-label mode. Restarts that hit non-finite
/// losses are discarded and counted.
ReconstructionResult reconstruct(const ParameterSet& theta, const std::vector<double>& g_target,
                                 const std::vector<int>& known_labels, const AttackConfig& cfg,
                                 const SeedSplitter& seeds, std::uint64_t stream_key);

/// One reconstruction per stored target of a round, in stored order.
std::vector<ReconstructionResult> attack_round(const ParameterSet& theta,
                                               const std::vector<AttackTarget>& targets,
                                               const AttackConfig& cfg,
                                               const SeedSplitter& seeds);

}  // namespace fedem
