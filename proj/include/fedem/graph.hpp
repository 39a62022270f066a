#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fedem/tensor.hpp"

namespace fedem {

using NodeId = std::int32_t;

enum class Op : std::uint8_t {
  kLeaf,      // differentiable root
  kConstant,  // non-differentiable value
  kAdd,
  kSub,
  kMul,       // elementwise
  kMatMul,    // strict 2-D
  kTranspose, // 2-D
  kTileRows,  // [n] -> [m,n], every row a copy
  kTileCols,  // [m] -> [m,n], every column a copy
  kColSum,    // [m,n] -> [n]
  kRowSum,    // [m,n] -> [m]
  kSum,       // all elements -> scalar
  kSpread,    // scalar -> given shape (adjoint of kSum)
  kScale,     // x * c, c a compile-time constant of the node
  kSquare,
  kSigmoid,
  kTanh,
  kExp,
  kRowLse,      // row-wise log-sum-exp, [m,n] -> [m]
  kPickCols,    // z[m,n], labels -> [m] picking z[i, labels[i]]
  kScatterCols, // v[m], labels -> [m,n] scattering v into label columns
  kClamp,       // clamp(x, lo, hi)
  kClampMask,   // 1 where lo < x < hi else 0; gradient-free by construction
  kReshape,
  kConv2d,      // x[n,c,h,w] * k[oc,c,kh,kw], stride 1, valid
  kConv2dDx,    // input gradient of kConv2d (first-order only)
  kConv2dDw,    // kernel gradient of kConv2d (first-order only)
  kAvgPool,     // window w, stride w
  kAvgUnpool,   // adjoint of kAvgPool
};

const char* op_name(Op op);

struct Node {
  Op op;
  NodeId a = -1, b = -1;
  Tensor out;
  double c0 = 0.0, c1 = 0.0;      // scale factor / clamp bounds
  std::vector<int> labels;        // kPickCols / kScatterCols payload
  Shape target_shape;             // kSpread / kReshape / kConv2dDx payload
  std::size_t extent = 0;         // tile length / pool window
};

/// Append-only computation graph with eager evaluation. A backward pass
/// emits ordinary graph nodes, so grad() may be applied to its own output
/// (reverse-over-reverse) for second-order derivatives. Confined to one
/// thread; rebuilt per evaluation.
class Graph {
 public:
  NodeId leaf(Tensor t);
  NodeId constant(Tensor t);

  NodeId add(NodeId x, NodeId y);
  NodeId sub(NodeId x, NodeId y);
  NodeId mul(NodeId x, NodeId y);
  NodeId matmul(NodeId x, NodeId y);
  NodeId transpose(NodeId x);
  NodeId tile_rows(NodeId v, std::size_t m);
  NodeId tile_cols(NodeId v, std::size_t n);
  NodeId colsum(NodeId x);
  NodeId rowsum(NodeId x);
  NodeId sum(NodeId x);
  NodeId spread(NodeId s, Shape shape);
  NodeId scale(NodeId x, double c);
  NodeId square(NodeId x);
  NodeId sigmoid(NodeId x);
  NodeId tanh_op(NodeId x);
  NodeId exp_op(NodeId x);
  NodeId row_lse(NodeId z);
  NodeId pick_cols(NodeId z, std::vector<int> labels);
  NodeId scatter_cols(NodeId v, std::vector<int> labels, std::size_t n);
  NodeId clamp(NodeId x, double lo, double hi);
  NodeId reshape(NodeId x, Shape shape);
  NodeId conv2d(NodeId x, NodeId k);
  NodeId avg_pool(NodeId x, std::size_t window);

  // Composites over the primitive set.
  NodeId neg(NodeId x) { return scale(x, -1.0); }
  NodeId mean(NodeId x);
  /// x[m,n] + b[n] broadcast over rows.
  NodeId bias_add(NodeId x, NodeId b);
  /// Mean softmax cross-entropy against integer labels.
  NodeId softmax_cross_entropy(NodeId logits, const std::vector<int>& labels);
  /// Mean cross-entropy against soft labels given as logits (both inputs
  /// differentiable); shares the softmax kernel with the integer form.
  NodeId soft_cross_entropy(NodeId logits, NodeId label_logits);
  /// Row-wise softmax probabilities.
  NodeId softmax_rows(NodeId z);

  const Tensor& value(NodeId id) const { return nodes_[id].out; }
  const Node& node(NodeId id) const { return nodes_[id]; }
  std::size_t size() const { return nodes_.size(); }

  /// Reverse-mode gradient of a scalar node w.r.t. the given leaves.
  /// Result nodes live in this graph, so grad() composes with itself.
  /// Leaves unreachable from the loss get exact-zero gradients.
  std::vector<NodeId> grad(NodeId loss, std::span<const NodeId> wrt);

 private:
  std::vector<Node> nodes_;
  NodeId push(Node n);
  NodeId clamp_mask(NodeId x, double lo, double hi);
  NodeId conv2d_dx(NodeId u, NodeId k, Shape x_shape);
  NodeId conv2d_dw(NodeId x, NodeId u, Shape k_shape);
  NodeId avg_unpool(NodeId v, std::size_t window, Shape x_shape);
  void accumulate(std::vector<NodeId>& adjoint, NodeId target, NodeId contribution);
};

/// Rebuilds the computation from already-created leaves, returning the
/// scalar loss node; grad_check re-invokes it at perturbed points.
using GraphBuilder = std::function<NodeId(Graph&, const std::vector<NodeId>&)>;

/// Max over all components of |analytic - central difference| /
/// max(1, |central difference|), rebuilding the graph per probe.
double grad_check(const GraphBuilder& f, const std::vector<Tensor>& point, double eps);

}  // namespace fedem
