#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedem/graph.hpp"
#include "fedem/tensor.hpp"

namespace fedem {

enum class Activation { kSigmoid, kTanh };

/// Architecture description. MLPs chain input_dim -> hidden... -> classes;
/// the CNN variant is one bias-free conv + activation + average pool
/// feeding the same dense chain.
struct ModelSpec {
  enum class Kind { kMlp, kCnn };
  Kind kind = Kind::kMlp;
  std::size_t channels = 1, height = 28, width = 28;
  std::size_t classes = 10;
  std::vector<std::size_t> hidden{256};
  Activation activation = Activation::kSigmoid;
  // CNN-only geometry.
  std::size_t conv_channels = 8, kernel = 5, pool = 2;

  std::size_t input_dim() const { return channels * height * width; }
  /// Named parameter shapes in canonical (declaration) order.
  std::vector<std::pair<std::string, Shape>> parameter_shapes() const;
  std::size_t flat_size() const;
  void validate() const;

  /// Compact textual form, also the checkpoint header.
  std::string to_string() const;
  static ModelSpec from_string(const std::string& s);
};

/// Ordered parameter tensors; flattening concatenates them in declaration
/// order, which every gradient vector in the system follows.
struct ParameterSet {
  ModelSpec spec;
  std::vector<Tensor> values;

  std::size_t flat_size() const;
  std::vector<double> flatten() const;
  void assign_flat(std::span<const double> flat);
  /// values -= eta * grad (flattened view).
  void step(std::span<const double> grad, double eta);
};

/// Weights ~ uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)), biases zero.
ParameterSet init_params(const ModelSpec& spec, std::uint64_t seed);

/// One graph leaf per parameter tensor, declaration order.
std::vector<NodeId> make_param_leaves(Graph& g, const ParameterSet& p);

/// Builds the network on an already-normalized [m, input_dim] node.
/// Returns the logits node; *penultimate receives the last hidden
/// activation node when requested.
NodeId model_logits(Graph& g, const ModelSpec& spec, std::span<const NodeId> params, NodeId x,
                    NodeId* penultimate = nullptr);

/// Concatenated gradient tensors in declaration order.
std::vector<double> flatten_nodes(const Graph& g, std::span<const NodeId> ids);

// Whole-graph conveniences over normalized inputs.
Tensor logits_eager(const ParameterSet& p, const Tensor& x);
Tensor penultimate_features(const ParameterSet& p, const Tensor& x);
double batch_loss(const ParameterSet& p, const Tensor& x, const std::vector<int>& y);

/// Checkpoint blob: two ASCII header lines (spec string, scalar count),
/// then the flattened scalars as 64-bit little-endian raw doubles.
void save_params(const std::string& path, const ParameterSet& p);
ParameterSet load_params(const std::string& path);

}  // namespace fedem
