#include "fedem/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "fedem/rng.hpp"

namespace fedem {

namespace {

const char* act_name(Activation a) { return a == Activation::kSigmoid ? "sigmoid" : "tanh"; }

std::vector<std::size_t> dense_chain(const ModelSpec& s) {
  std::vector<std::size_t> widths;
  if (s.kind == ModelSpec::Kind::kMlp) {
    widths.push_back(s.input_dim());
  } else {
    const std::size_t oh = (s.height - s.kernel + 1) / s.pool;
    const std::size_t ow = (s.width - s.kernel + 1) / s.pool;
    widths.push_back(s.conv_channels * oh * ow);
  }
  widths.insert(widths.end(), s.hidden.begin(), s.hidden.end());
  widths.push_back(s.classes);
  return widths;
}

}  // namespace

void ModelSpec::validate() const {
  if (channels == 0 || height == 0 || width == 0 || classes == 0)
    throw std::invalid_argument("model: input shape and class count must be positive");
  for (std::size_t w : hidden)
    if (w == 0) throw std::invalid_argument("model: hidden widths must be positive");
  if (kind == Kind::kCnn) {
    if (conv_channels == 0 || kernel == 0 || pool == 0)
      throw std::invalid_argument("model: conv geometry must be positive");
    if (kernel > height || kernel > width)
      throw std::invalid_argument("model: kernel exceeds input size");
    const std::size_t oh = height - kernel + 1, ow = width - kernel + 1;
    if (oh % pool != 0 || ow % pool != 0)
      throw std::invalid_argument("model: pool window must divide the conv output");
  }
}

std::vector<std::pair<std::string, Shape>> ModelSpec::parameter_shapes() const {
  validate();
  std::vector<std::pair<std::string, Shape>> out;
  if (kind == Kind::kCnn)
    out.emplace_back("conv", Shape{conv_channels, channels, kernel, kernel});
  const auto widths = dense_chain(*this);
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    out.emplace_back("w" + std::to_string(i + 1), Shape{widths[i], widths[i + 1]});
    out.emplace_back("b" + std::to_string(i + 1), Shape{widths[i + 1]});
  }
  return out;
}

std::size_t ModelSpec::flat_size() const {
  std::size_t n = 0;
  for (const auto& [name, shape] : parameter_shapes()) n += shape_numel(shape);
  return n;
}

std::string ModelSpec::to_string() const {
  std::ostringstream os;
  os << (kind == Kind::kMlp ? "mlp" : "cnn") << ':' << act_name(activation) << ':' << channels
     << 'x' << height << 'x' << width << ':';
  for (std::size_t i = 0; i < hidden.size(); ++i) os << (i ? "-" : "") << hidden[i];
  if (hidden.empty()) os << "none";
  os << ':' << classes;
  if (kind == Kind::kCnn) os << ":c" << conv_channels << "k" << kernel << "p" << pool;
  return os.str();
}

ModelSpec ModelSpec::from_string(const std::string& s) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == ':') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(cur);
  if (parts.size() < 5) throw std::invalid_argument("bad model spec string: " + s);

  ModelSpec spec;
  if (parts[0] == "mlp")
    spec.kind = Kind::kMlp;
  else if (parts[0] == "cnn")
    spec.kind = Kind::kCnn;
  else
    throw std::invalid_argument("bad model kind: " + parts[0]);
  if (parts[1] == "sigmoid")
    spec.activation = Activation::kSigmoid;
  else if (parts[1] == "tanh")
    spec.activation = Activation::kTanh;
  else
    throw std::invalid_argument("bad activation: " + parts[1]);

  if (std::sscanf(parts[2].c_str(), "%zux%zux%zu", &spec.channels, &spec.height, &spec.width) != 3)
    throw std::invalid_argument("bad input shape: " + parts[2]);

  spec.hidden.clear();
  if (parts[3] != "none") {
    std::istringstream hs(parts[3]);
    std::string tok;
    while (std::getline(hs, tok, '-')) spec.hidden.push_back(std::stoul(tok));
  }
  spec.classes = std::stoul(parts[4]);
  if (spec.kind == Kind::kCnn) {
    if (parts.size() < 6 ||
        std::sscanf(parts[5].c_str(), "c%zuk%zup%zu", &spec.conv_channels, &spec.kernel,
                    &spec.pool) != 3)
      throw std::invalid_argument("bad conv geometry in model spec: " + s);
  }
  spec.validate();
  return spec;
}

std::size_t ParameterSet::flat_size() const {
  std::size_t n = 0;
  for (const auto& t : values) n += t.numel();
  return n;
}

std::vector<double> ParameterSet::flatten() const {
  std::vector<double> out;
  out.reserve(flat_size());
  for (const auto& t : values) out.insert(out.end(), t.data.begin(), t.data.end());
  return out;
}

void ParameterSet::assign_flat(std::span<const double> flat) {
  if (flat.size() != flat_size())
    throw std::invalid_argument("assign_flat: length " + std::to_string(flat.size()) +
                                " does not match parameter count " + std::to_string(flat_size()));
  std::size_t pos = 0;
  for (auto& t : values) {
    std::copy_n(flat.begin() + pos, t.numel(), t.data.begin());
    pos += t.numel();
  }
}

void ParameterSet::step(std::span<const double> grad, double eta) {
  if (grad.size() != flat_size())
    throw std::invalid_argument("step: gradient length " + std::to_string(grad.size()) +
                                " does not match parameter count " + std::to_string(flat_size()));
  std::size_t pos = 0;
  for (auto& t : values) {
    for (double& v : t.data) v -= eta * grad[pos++];
  }
}

ParameterSet init_params(const ModelSpec& spec, std::uint64_t seed) {
  ParameterSet p;
  p.spec = spec;
  Rng rng(seed);
  for (const auto& [name, shape] : spec.parameter_shapes()) {
    Tensor t(shape);
    const bool is_bias = shape.size() == 1;
    if (!is_bias) {
      // fan_in: leading extent for dense [in, out]; all non-output extents
      // for conv kernels [oc, c, kh, kw].
      std::size_t fan_in = shape.size() == 2 ? shape[0] : shape_numel(shape) / shape[0];
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (double& v : t.data) v = rng.uniform(-bound, bound);
    }
    p.values.push_back(std::move(t));
  }
  return p;
}

std::vector<NodeId> make_param_leaves(Graph& g, const ParameterSet& p) {
  std::vector<NodeId> ids;
  ids.reserve(p.values.size());
  for (const auto& t : p.values) ids.push_back(g.leaf(t));
  return ids;
}

NodeId model_logits(Graph& g, const ModelSpec& spec, std::span<const NodeId> params, NodeId x,
                    NodeId* penultimate) {
  const std::size_t m = g.value(x).rows();
  std::size_t pi = 0;
  NodeId h = x;
  if (spec.kind == ModelSpec::Kind::kCnn) {
    NodeId img = g.reshape(x, {m, spec.channels, spec.height, spec.width});
    NodeId conv = g.conv2d(img, params[pi++]);
    NodeId act = spec.activation == Activation::kSigmoid ? g.sigmoid(conv) : g.tanh_op(conv);
    NodeId pooled = g.avg_pool(act, spec.pool);
    const auto& ps = g.value(pooled).shape;
    h = g.reshape(pooled, {m, ps[1] * ps[2] * ps[3]});
  }
  const std::size_t layers = spec.hidden.size() + 1;
  NodeId last_hidden = h;
  for (std::size_t l = 0; l < layers; ++l) {
    NodeId z = g.bias_add(g.matmul(h, params[pi]), params[pi + 1]);
    pi += 2;
    if (l + 1 < layers) {
      h = spec.activation == Activation::kSigmoid ? g.sigmoid(z) : g.tanh_op(z);
      last_hidden = h;
    } else {
      h = z;
    }
  }
  if (penultimate) *penultimate = last_hidden;
  return h;
}

std::vector<double> flatten_nodes(const Graph& g, std::span<const NodeId> ids) {
  std::vector<double> out;
  for (NodeId id : ids) {
    const Tensor& t = g.value(id);
    out.insert(out.end(), t.data.begin(), t.data.end());
  }
  return out;
}

Tensor logits_eager(const ParameterSet& p, const Tensor& x) {
  Graph g;
  auto params = make_param_leaves(g, p);
  return g.value(model_logits(g, p.spec, params, g.constant(x)));
}

Tensor penultimate_features(const ParameterSet& p, const Tensor& x) {
  Graph g;
  auto params = make_param_leaves(g, p);
  NodeId features = -1;
  model_logits(g, p.spec, params, g.constant(x), &features);
  return g.value(features);
}

double batch_loss(const ParameterSet& p, const Tensor& x, const std::vector<int>& y) {
  Graph g;
  auto params = make_param_leaves(g, p);
  NodeId logits = model_logits(g, p.spec, params, g.constant(x));
  return g.value(g.softmax_cross_entropy(logits, y)).item();
}

void save_params(const std::string& path, const ParameterSet& p) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  const auto flat = p.flatten();
  f << p.spec.to_string() << '\n' << flat.size() << '\n';
  static_assert(std::endian::native == std::endian::little,
                "checkpoint scalars are written little-endian");
  f.write(reinterpret_cast<const char*>(flat.data()),
          static_cast<std::streamsize>(flat.size() * sizeof(double)));
  if (!f) throw std::runtime_error("short write to " + path);
}

ParameterSet load_params(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::string spec_line, count_line;
  if (!std::getline(f, spec_line) || !std::getline(f, count_line))
    throw std::runtime_error("truncated checkpoint header in " + path);
  ModelSpec spec = ModelSpec::from_string(spec_line);
  const std::size_t count = std::stoul(count_line);
  if (count != spec.flat_size())
    throw std::runtime_error("checkpoint scalar count " + count_line + " does not match spec " +
                             spec_line);
  std::vector<double> flat(count);
  f.read(reinterpret_cast<char*>(flat.data()), static_cast<std::streamsize>(count * sizeof(double)));
  if (static_cast<std::size_t>(f.gcount()) != count * sizeof(double))
    throw std::runtime_error("truncated checkpoint payload in " + path);

  ParameterSet p;
  p.spec = spec;
  for (const auto& [name, shape] : spec.parameter_shapes()) p.values.emplace_back(shape);
  p.assign_flat(flat);
  return p;
}

}  // namespace fedem
