#include "fedem/graph.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fedem {

const char* op_name(Op op) {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kConstant: return "constant";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kMatMul: return "matmul";
    case Op::kTranspose: return "transpose";
    case Op::kTileRows: return "tile_rows";
    case Op::kTileCols: return "tile_cols";
    case Op::kColSum: return "colsum";
    case Op::kRowSum: return "rowsum";
    case Op::kSum: return "sum";
    case Op::kSpread: return "spread";
    case Op::kScale: return "scale";
    case Op::kSquare: return "square";
    case Op::kSigmoid: return "sigmoid";
    case Op::kTanh: return "tanh";
    case Op::kExp: return "exp";
    case Op::kRowLse: return "row_lse";
    case Op::kPickCols: return "pick_cols";
    case Op::kScatterCols: return "scatter_cols";
    case Op::kClamp: return "clamp";
    case Op::kClampMask: return "clamp_mask";
    case Op::kReshape: return "reshape";
    case Op::kConv2d: return "conv2d";
    case Op::kConv2dDx: return "conv2d_dx";
    case Op::kConv2dDw: return "conv2d_dw";
    case Op::kAvgPool: return "avg_pool";
    case Op::kAvgUnpool: return "avg_unpool";
  }
  return "?";
}

NodeId Graph::push(Node n) {
  const NodeId id = static_cast<NodeId>(nodes_.size());
  for (double v : n.out.data) {
    if (!std::isfinite(v))
      throw NumericsError("non-finite value in node " + std::to_string(id) + " (" +
                          op_name(n.op) + ")");
  }
  nodes_.push_back(std::move(n));
  return id;
}

NodeId Graph::leaf(Tensor t) { return push({.op = Op::kLeaf, .out = std::move(t)}); }
NodeId Graph::constant(Tensor t) { return push({.op = Op::kConstant, .out = std::move(t)}); }

namespace {

void require_same_shape(const Tensor& x, const Tensor& y, const char* what) {
  if (!x.same_shape(y))
    throw ShapeError(std::string(what) + ": shapes " + shape_str(x.shape) + " vs " +
                     shape_str(y.shape));
}

void require_rank(const Tensor& x, std::size_t r, const char* what) {
  if (x.rank() != r)
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(r) + ", got " +
                     shape_str(x.shape));
}

}  // namespace

NodeId Graph::add(NodeId x, NodeId y) {
  const Tensor &a = value(x), &b = value(y);
  require_same_shape(a, b, "add");
  Tensor out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
  return push({.op = Op::kAdd, .a = x, .b = y, .out = std::move(out)});
}

NodeId Graph::sub(NodeId x, NodeId y) {
  const Tensor &a = value(x), &b = value(y);
  require_same_shape(a, b, "sub");
  Tensor out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b.data[i];
  return push({.op = Op::kSub, .a = x, .b = y, .out = std::move(out)});
}

NodeId Graph::mul(NodeId x, NodeId y) {
  const Tensor &a = value(x), &b = value(y);
  require_same_shape(a, b, "mul");
  Tensor out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b.data[i];
  return push({.op = Op::kMul, .a = x, .b = y, .out = std::move(out)});
}

NodeId Graph::matmul(NodeId x, NodeId y) {
  const Tensor &a = value(x), &b = value(y);
  require_rank(a, 2, "matmul lhs");
  require_rank(b, 2, "matmul rhs");
  if (a.cols() != b.rows())
    throw ShapeError("matmul: shapes " + shape_str(a.shape) + " vs " + shape_str(b.shape));
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out({m, n});
  // i-k-j order streams rows of b and out; summation order per element is
  // still ascending in k, so results are bit-identical to the naive loop.
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = &a.data[i * k];
    double* orow = &out.data[i * n];
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double av = arow[kk];
      const double* brow = &b.data[kk * n];
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  return push({.op = Op::kMatMul, .a = x, .b = y, .out = std::move(out)});
}

NodeId Graph::transpose(NodeId x) {
  const Tensor& a = value(x);
  require_rank(a, 2, "transpose");
  const std::size_t m = a.rows(), n = a.cols();
  Tensor out({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.data[j * m + i] = a.data[i * n + j];
  return push({.op = Op::kTranspose, .a = x, .out = std::move(out)});
}

NodeId Graph::tile_rows(NodeId v, std::size_t m) {
  const Tensor& a = value(v);
  require_rank(a, 1, "tile_rows");
  const std::size_t n = a.shape[0];
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i)
    std::copy(a.data.begin(), a.data.end(), out.data.begin() + i * n);
  return push({.op = Op::kTileRows, .a = v, .out = std::move(out), .extent = m});
}

NodeId Graph::tile_cols(NodeId v, std::size_t n) {
  const Tensor& a = value(v);
  require_rank(a, 1, "tile_cols");
  const std::size_t m = a.shape[0];
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.data[i * n + j] = a.data[i];
  return push({.op = Op::kTileCols, .a = v, .out = std::move(out), .extent = n});
}

NodeId Graph::colsum(NodeId x) {
  const Tensor& a = value(x);
  require_rank(a, 2, "colsum");
  const std::size_t m = a.rows(), n = a.cols();
  Tensor out({n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.data[j] += a.data[i * n + j];
  return push({.op = Op::kColSum, .a = x, .out = std::move(out)});
}

NodeId Graph::rowsum(NodeId x) {
  const Tensor& a = value(x);
  require_rank(a, 2, "rowsum");
  const std::size_t m = a.rows(), n = a.cols();
  Tensor out({m});
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += a.data[i * n + j];
    out.data[i] = s;
  }
  return push({.op = Op::kRowSum, .a = x, .out = std::move(out)});
}

NodeId Graph::sum(NodeId x) {
  const Tensor& a = value(x);
  double s = 0.0;
  for (double v : a.data) s += v;
  return push({.op = Op::kSum, .a = x, .out = Tensor::scalar(s)});
}

NodeId Graph::spread(NodeId s, Shape shape) {
  const Tensor& a = value(s);
  if (a.numel() != 1) throw ShapeError("spread: source must be scalar, got " + shape_str(a.shape));
  Tensor out = Tensor::filled(shape, a.data[0]);
  return push({.op = Op::kSpread, .a = s, .out = std::move(out), .target_shape = std::move(shape)});
}

NodeId Graph::scale(NodeId x, double c) {
  Tensor out = value(x);
  for (double& v : out.data) v *= c;
  return push({.op = Op::kScale, .a = x, .out = std::move(out), .c0 = c});
}

NodeId Graph::square(NodeId x) {
  Tensor out = value(x);
  for (double& v : out.data) v *= v;
  return push({.op = Op::kSquare, .a = x, .out = std::move(out)});
}

NodeId Graph::sigmoid(NodeId x) {
  Tensor out = value(x);
  for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
  return push({.op = Op::kSigmoid, .a = x, .out = std::move(out)});
}

NodeId Graph::tanh_op(NodeId x) {
  Tensor out = value(x);
  for (double& v : out.data) v = std::tanh(v);
  return push({.op = Op::kTanh, .a = x, .out = std::move(out)});
}

NodeId Graph::exp_op(NodeId x) {
  Tensor out = value(x);
  for (double& v : out.data) v = std::exp(v);
  return push({.op = Op::kExp, .a = x, .out = std::move(out)});
}

NodeId Graph::row_lse(NodeId z) {
  const Tensor& a = value(z);
  require_rank(a, 2, "row_lse");
  const std::size_t m = a.rows(), n = a.cols();
  Tensor out({m});
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = &a.data[i * n];
    double mx = row[0];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += std::exp(row[j] - mx);
    out.data[i] = mx + std::log(s);
  }
  return push({.op = Op::kRowLse, .a = z, .out = std::move(out)});
}

NodeId Graph::pick_cols(NodeId z, std::vector<int> labels) {
  const Tensor& a = value(z);
  require_rank(a, 2, "pick_cols");
  const std::size_t m = a.rows(), n = a.cols();
  if (labels.size() != m)
    throw ShapeError("pick_cols: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(m) + " rows");
  Tensor out({m});
  for (std::size_t i = 0; i < m; ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= n)
      throw std::out_of_range("label " + std::to_string(y) + " out of range [0, " +
                              std::to_string(n) + ")");
    out.data[i] = a.data[i * n + static_cast<std::size_t>(y)];
  }
  return push({.op = Op::kPickCols, .a = z, .out = std::move(out), .labels = std::move(labels)});
}

NodeId Graph::scatter_cols(NodeId v, std::vector<int> labels, std::size_t n) {
  const Tensor& a = value(v);
  require_rank(a, 1, "scatter_cols");
  const std::size_t m = a.shape[0];
  if (labels.size() != m)
    throw ShapeError("scatter_cols: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(m) + " rows");
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= n)
      throw std::out_of_range("label " + std::to_string(y) + " out of range [0, " +
                              std::to_string(n) + ")");
    out.data[i * n + static_cast<std::size_t>(y)] = a.data[i];
  }
  return push({.op = Op::kScatterCols,
               .a = v,
               .out = std::move(out),
               .labels = std::move(labels),
               .extent = n});
}

NodeId Graph::clamp(NodeId x, double lo, double hi) {
  Tensor out = value(x);
  for (double& v : out.data) v = std::min(std::max(v, lo), hi);
  return push({.op = Op::kClamp, .a = x, .out = std::move(out), .c0 = lo, .c1 = hi});
}

// 1 strictly inside (lo, hi), else 0; the boundary takes subgradient 0.
NodeId Graph::clamp_mask(NodeId x, double lo, double hi) {
  Tensor out = value(x);
  for (double& v : out.data) v = (v > lo && v < hi) ? 1.0 : 0.0;
  return push({.op = Op::kClampMask, .a = x, .out = std::move(out), .c0 = lo, .c1 = hi});
}

NodeId Graph::reshape(NodeId x, Shape shape) {
  const Tensor& a = value(x);
  if (shape_numel(shape) != a.numel())
    throw ShapeError("reshape: " + shape_str(a.shape) + " to " + shape_str(shape));
  Tensor out(shape, a.data);
  return push(
      {.op = Op::kReshape, .a = x, .out = std::move(out), .target_shape = std::move(shape)});
}

namespace {
inline std::size_t idx4(std::size_t i, std::size_t c, std::size_t h, std::size_t w,
                        std::size_t C, std::size_t H, std::size_t W) {
  return ((i * C + c) * H + h) * W + w;
}
}  // namespace

NodeId Graph::conv2d(NodeId x, NodeId k) {
  const Tensor &xa = value(x), &ka = value(k);
  require_rank(xa, 4, "conv2d input");
  require_rank(ka, 4, "conv2d kernel");
  const std::size_t N = xa.shape[0], C = xa.shape[1], H = xa.shape[2], W = xa.shape[3];
  const std::size_t OC = ka.shape[0], KC = ka.shape[1], KH = ka.shape[2], KW = ka.shape[3];
  if (C != KC || KH > H || KW > W)
    throw ShapeError("conv2d: shapes " + shape_str(xa.shape) + " vs " + shape_str(ka.shape));
  const std::size_t OH = H - KH + 1, OW = W - KW + 1;
  Tensor out({N, OC, OH, OW});
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t o = 0; o < OC; ++o)
      for (std::size_t p = 0; p < OH; ++p)
        for (std::size_t q = 0; q < OW; ++q) {
          double s = 0.0;
          for (std::size_t c = 0; c < C; ++c)
            for (std::size_t r = 0; r < KH; ++r)
              for (std::size_t t = 0; t < KW; ++t)
                s += xa.data[idx4(i, c, p + r, q + t, C, H, W)] *
                     ka.data[idx4(o, c, r, t, KC, KH, KW)];
          out.data[idx4(i, o, p, q, OC, OH, OW)] = s;
        }
  return push({.op = Op::kConv2d, .a = x, .b = k, .out = std::move(out)});
}

NodeId Graph::conv2d_dx(NodeId u, NodeId k, Shape x_shape) {
  const Tensor &ua = value(u), &ka = value(k);
  const std::size_t N = x_shape[0], C = x_shape[1], H = x_shape[2], W = x_shape[3];
  const std::size_t OC = ka.shape[0], KH = ka.shape[2], KW = ka.shape[3];
  const std::size_t OH = ua.shape[2], OW = ua.shape[3];
  Tensor out(x_shape);
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t o = 0; o < OC; ++o)
      for (std::size_t p = 0; p < OH; ++p)
        for (std::size_t q = 0; q < OW; ++q) {
          const double uv = ua.data[idx4(i, o, p, q, OC, OH, OW)];
          for (std::size_t c = 0; c < C; ++c)
            for (std::size_t r = 0; r < KH; ++r)
              for (std::size_t t = 0; t < KW; ++t)
                out.data[idx4(i, c, p + r, q + t, C, H, W)] +=
                    uv * ka.data[idx4(o, c, r, t, C, KH, KW)];
        }
  return push({.op = Op::kConv2dDx,
               .a = u,
               .b = k,
               .out = std::move(out),
               .target_shape = std::move(x_shape)});
}

NodeId Graph::conv2d_dw(NodeId x, NodeId u, Shape k_shape) {
  const Tensor &xa = value(x), &ua = value(u);
  const std::size_t N = xa.shape[0], C = xa.shape[1], H = xa.shape[2], W = xa.shape[3];
  const std::size_t OC = k_shape[0], KH = k_shape[2], KW = k_shape[3];
  const std::size_t OH = ua.shape[2], OW = ua.shape[3];
  Tensor out(k_shape);
  for (std::size_t o = 0; o < OC; ++o)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t r = 0; r < KH; ++r)
        for (std::size_t t = 0; t < KW; ++t) {
          double s = 0.0;
          for (std::size_t i = 0; i < N; ++i)
            for (std::size_t p = 0; p < OH; ++p)
              for (std::size_t q = 0; q < OW; ++q)
                s += xa.data[idx4(i, c, p + r, q + t, C, H, W)] *
                     ua.data[idx4(i, o, p, q, OC, OH, OW)];
          out.data[idx4(o, c, r, t, C, KH, KW)] = s;
        }
  return push({.op = Op::kConv2dDw,
               .a = x,
               .b = u,
               .out = std::move(out),
               .target_shape = std::move(k_shape)});
}

NodeId Graph::avg_pool(NodeId x, std::size_t window) {
  const Tensor& xa = value(x);
  require_rank(xa, 4, "avg_pool");
  const std::size_t N = xa.shape[0], C = xa.shape[1], H = xa.shape[2], W = xa.shape[3];
  if (window == 0 || H % window != 0 || W % window != 0)
    throw ShapeError("avg_pool: window " + std::to_string(window) + " does not divide " +
                     shape_str(xa.shape));
  const std::size_t OH = H / window, OW = W / window;
  const double inv = 1.0 / static_cast<double>(window * window);
  Tensor out({N, C, OH, OW});
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t p = 0; p < OH; ++p)
        for (std::size_t q = 0; q < OW; ++q) {
          double s = 0.0;
          for (std::size_t r = 0; r < window; ++r)
            for (std::size_t t = 0; t < window; ++t)
              s += xa.data[idx4(i, c, p * window + r, q * window + t, C, H, W)];
          out.data[idx4(i, c, p, q, C, OH, OW)] = s * inv;
        }
  return push({.op = Op::kAvgPool, .a = x, .out = std::move(out), .extent = window});
}

NodeId Graph::avg_unpool(NodeId v, std::size_t window, Shape x_shape) {
  const Tensor& va = value(v);
  const std::size_t N = x_shape[0], C = x_shape[1], H = x_shape[2], W = x_shape[3];
  const std::size_t OH = H / window, OW = W / window;
  const double inv = 1.0 / static_cast<double>(window * window);
  Tensor out(x_shape);
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t h = 0; h < H; ++h)
        for (std::size_t w = 0; w < W; ++w)
          out.data[idx4(i, c, h, w, C, H, W)] =
              va.data[idx4(i, c, h / window, w / window, C, OH, OW)] * inv;
  return push({.op = Op::kAvgUnpool,
               .a = v,
               .out = std::move(out),
               .target_shape = std::move(x_shape),
               .extent = window});
}

NodeId Graph::mean(NodeId x) {
  return scale(sum(x), 1.0 / static_cast<double>(value(x).numel()));
}

NodeId Graph::bias_add(NodeId x, NodeId b) {
  const Tensor& xa = value(x);
  require_rank(xa, 2, "bias_add input");
  return add(x, tile_rows(b, xa.rows()));
}

NodeId Graph::softmax_cross_entropy(NodeId logits, const std::vector<int>& labels) {
  const std::size_t m = value(logits).rows();
  NodeId per_sample = sub(row_lse(logits), pick_cols(logits, labels));
  return scale(sum(per_sample), 1.0 / static_cast<double>(m));
}

NodeId Graph::soft_cross_entropy(NodeId logits, NodeId label_logits) {
  const Tensor& za = value(logits);
  require_same_shape(za, value(label_logits), "soft_cross_entropy");
  const std::size_t m = za.rows();
  NodeId probs = softmax_rows(label_logits);
  // With rows of `probs` summing to 1, -sum_j p_j log softmax(z)_j reduces
  // to lse(z) - sum_j p_j z_j per sample.
  NodeId per_sample = sub(row_lse(logits), rowsum(mul(probs, logits)));
  return scale(sum(per_sample), 1.0 / static_cast<double>(m));
}

NodeId Graph::softmax_rows(NodeId z) {
  const std::size_t n = value(z).cols();
  return exp_op(sub(z, tile_cols(row_lse(z), n)));
}

void Graph::accumulate(std::vector<NodeId>& adjoint, NodeId target, NodeId contribution) {
  if (target < 0) return;
  if (nodes_[target].op == Op::kConstant) return;  // gradients of constants are never read
  adjoint[target] = adjoint[target] < 0 ? contribution : add(adjoint[target], contribution);
}

std::vector<NodeId> Graph::grad(NodeId loss, std::span<const NodeId> wrt) {
  if (value(loss).numel() != 1)
    throw ShapeError("grad: loss must be scalar, got " + shape_str(value(loss).shape));
  for (NodeId w : wrt)
    if (node(w).op != Op::kLeaf)
      throw std::invalid_argument("grad: wrt node " + std::to_string(w) + " is not a leaf");

  std::vector<NodeId> adjoint(static_cast<std::size_t>(loss) + 1, -1);
  adjoint[loss] = constant(Tensor::ones(value(loss).shape));

  for (NodeId id = loss; id >= 0; --id) {
    const NodeId u = adjoint[id];
    if (u < 0) continue;
    // nodes_ may reallocate while emitting adjoint nodes; copy what we need.
    const Op op = nodes_[id].op;
    const NodeId a = nodes_[id].a, b = nodes_[id].b;
    switch (op) {
      case Op::kLeaf:
      case Op::kConstant:
      case Op::kClampMask:
        break;
      case Op::kAdd:
        accumulate(adjoint, a, u);
        accumulate(adjoint, b, u);
        break;
      case Op::kSub:
        accumulate(adjoint, a, u);
        accumulate(adjoint, b, neg(u));
        break;
      case Op::kMul:
        accumulate(adjoint, a, mul(u, b));
        accumulate(adjoint, b, mul(u, a));
        break;
      case Op::kMatMul:
        accumulate(adjoint, a, matmul(u, transpose(b)));
        accumulate(adjoint, b, matmul(transpose(a), u));
        break;
      case Op::kTranspose:
        accumulate(adjoint, a, transpose(u));
        break;
      case Op::kTileRows:
        accumulate(adjoint, a, colsum(u));
        break;
      case Op::kTileCols:
        accumulate(adjoint, a, rowsum(u));
        break;
      case Op::kColSum:
        accumulate(adjoint, a, tile_rows(u, value(a).rows()));
        break;
      case Op::kRowSum:
        accumulate(adjoint, a, tile_cols(u, value(a).cols()));
        break;
      case Op::kSum:
        accumulate(adjoint, a, spread(u, value(a).shape));
        break;
      case Op::kSpread:
        accumulate(adjoint, a, sum(u));
        break;
      case Op::kScale:
        accumulate(adjoint, a, scale(u, nodes_[id].c0));
        break;
      case Op::kSquare:
        accumulate(adjoint, a, scale(mul(u, a), 2.0));
        break;
      case Op::kSigmoid: {
        NodeId one = constant(Tensor::ones(value(id).shape));
        accumulate(adjoint, a, mul(u, mul(id, sub(one, id))));
        break;
      }
      case Op::kTanh: {
        NodeId one = constant(Tensor::ones(value(id).shape));
        accumulate(adjoint, a, mul(u, sub(one, square(id))));
        break;
      }
      case Op::kExp:
        accumulate(adjoint, a, mul(u, id));
        break;
      case Op::kRowLse: {
        const std::size_t n = value(a).cols();
        NodeId softmax = exp_op(sub(a, tile_cols(id, n)));
        accumulate(adjoint, a, mul(softmax, tile_cols(u, n)));
        break;
      }
      case Op::kPickCols:
        accumulate(adjoint, a, scatter_cols(u, nodes_[id].labels, value(a).cols()));
        break;
      case Op::kScatterCols:
        accumulate(adjoint, a, pick_cols(u, nodes_[id].labels));
        break;
      case Op::kClamp:
        accumulate(adjoint, a, mul(u, clamp_mask(a, nodes_[id].c0, nodes_[id].c1)));
        break;
      case Op::kReshape:
        accumulate(adjoint, a, reshape(u, value(a).shape));
        break;
      case Op::kConv2d:
        accumulate(adjoint, a, conv2d_dx(u, b, value(a).shape));
        accumulate(adjoint, b, conv2d_dw(a, u, value(b).shape));
        break;
      case Op::kConv2dDx:
      case Op::kConv2dDw:
        throw std::runtime_error("second-order differentiation through conv2d is not supported");
      case Op::kAvgPool:
        accumulate(adjoint, a, avg_unpool(u, nodes_[id].extent, value(a).shape));
        break;
      case Op::kAvgUnpool:
        accumulate(adjoint, a, avg_pool(u, nodes_[id].extent));
        break;
    }
  }

  std::vector<NodeId> result;
  result.reserve(wrt.size());
  for (NodeId w : wrt) {
    if (adjoint[w] >= 0)
      result.push_back(adjoint[w]);
    else
      result.push_back(constant(Tensor::zeros(value(w).shape)));
  }
  return result;
}

double grad_check(const GraphBuilder& f, const std::vector<Tensor>& point, double eps) {
  if (eps <= 0) throw std::invalid_argument("grad_check: eps must be positive");

  const auto eval = [&](const std::vector<Tensor>& at) {
    Graph g;
    std::vector<NodeId> leaves;
    leaves.reserve(at.size());
    for (const Tensor& t : at) leaves.push_back(g.leaf(t));
    return g.value(f(g, leaves)).item();
  };

  // Analytic gradients at the base point.
  Graph g;
  std::vector<NodeId> leaves;
  leaves.reserve(point.size());
  for (const Tensor& t : point) leaves.push_back(g.leaf(t));
  NodeId loss = f(g, leaves);
  std::vector<NodeId> grads = g.grad(loss, leaves);

  double worst = 0.0;
  for (std::size_t li = 0; li < point.size(); ++li) {
    const Tensor& analytic = g.value(grads[li]);
    for (std::size_t j = 0; j < point[li].numel(); ++j) {
      std::vector<Tensor> probe = point;
      probe[li].data[j] += eps;
      const double up = eval(probe);
      probe[li].data[j] -= 2 * eps;
      const double down = eval(probe);
      const double cd = (up - down) / (2 * eps);
      const double err = std::fabs(analytic.data[j] - cd) / std::max(1.0, std::fabs(cd));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace fedem
