#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedem/graph.hpp"
#include "fedem/rng.hpp"
#include "fedem/tensor.hpp"

namespace fedem {

struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Immutable image collection; pixel values live in [0,1].
struct Dataset {
  std::string name;
  std::string split;  // train/val/test tag
  Tensor images;      // [n, channels, H, W]
  std::vector<int> labels;
  std::size_t channels = 0, height = 0, width = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t flat_dim() const { return channels * height * width; }
};

struct ClientShard {
  int client_id = 0;
  std::vector<std::size_t> indices;  // into the parent dataset
  std::size_t count() const { return indices.size(); }
};

/// Per-channel affine normalization t(x) = (clamp(x,0,1) - mean) / std.
/// Empty mean/std means the identity transform (pass-through, no clamp).
struct NormalizationTransform {
  std::vector<double> mean, stddev;
  bool identity() const { return mean.empty(); }
};

/// IDX image/label pair (MNIST layout). Paths may be gzip-compressed or
/// plain; both are read through the same zlib channel.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

/// CIFAR-10 binary batches: records of 1 label byte + 3072 pixel bytes.
Dataset load_cifar10(const std::vector<std::string>& batch_paths);

/// Random permutation split into K near-equal disjoint shards; the first
/// n mod K shards get one extra element.
std::vector<ClientShard> partition_iid(std::size_t n, int k, std::uint64_t seed);

/// Gaussian class blobs rescaled into [0,1]; linearly separable by
/// construction (class centers kept apart relative to the spread).
Dataset synth_blobs(int classes, int per_class, std::size_t dims, std::uint64_t seed);

/// Rows of the flattened [m, c*h*w] batch at the given dataset indices.
Tensor gather_flat(const Dataset& ds, const std::vector<std::size_t>& idx);
std::vector<int> gather_labels(const Dataset& ds, const std::vector<std::size_t>& idx);

/// Published per-channel statistics for the bundled dataset names;
/// unknown names fall back to the identity transform.
NormalizationTransform stats_for(const std::string& dataset_name);

/// Graph-side t(x) on a flattened [m, d] node.
NodeId apply_normalize(Graph& g, const NormalizationTransform& t, NodeId x,
                       std::size_t channels, std::size_t hw);
/// Eager t(x) on a flattened [m, d] tensor (same arithmetic as the node form).
Tensor normalize_eager(const NormalizationTransform& t, const Tensor& x,
                       std::size_t channels, std::size_t hw);
/// Inverse affine followed by clamp to [0,1]; on [0,1] inputs
/// denormalize(normalize(x)) == x within round-off.
Tensor denormalize(const NormalizationTransform& t, const Tensor& z,
                   std::size_t channels, std::size_t hw);

/// Index split used by the trainer: the last tenth of the training set is
/// held out for validation before any client partitioning.
struct TrainValSplit {
  std::vector<std::size_t> train, val;
};
TrainValSplit split_train_val(std::size_t n);

}  // namespace fedem
