#include "fedem/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace fedem {

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << 'x';
    os << s[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (auto e : s) n *= e;
  return n;
}

Tensor::Tensor(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
  if (shape.empty()) throw ShapeError("tensor shape must have at least one extent");
  for (auto e : shape)
    if (e == 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
  if (shape_numel(shape) != data.size())
    throw ShapeError("shape " + shape_str(shape) + " does not match data length " +
                     std::to_string(data.size()));
}

Tensor::Tensor(Shape s) : shape(std::move(s)) {
  if (shape.empty()) throw ShapeError("tensor shape must have at least one extent");
  for (auto e : shape)
    if (e == 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
  data.assign(shape_numel(shape), 0.0);
}

Tensor Tensor::ones(Shape s) { return filled(std::move(s), 1.0); }

Tensor Tensor::filled(Shape s, double v) {
  Tensor t(std::move(s));
  std::fill(t.data.begin(), t.data.end(), v);
  return t;
}

std::size_t Tensor::rows() const {
  if (rank() != 2) throw ShapeError("rows() on non-matrix " + shape_str(shape));
  return shape[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw ShapeError("cols() on non-matrix " + shape_str(shape));
  return shape[1];
}

double& Tensor::at(std::size_t i, std::size_t j) { return data[i * cols() + j]; }
double Tensor::at(std::size_t i, std::size_t j) const { return data[i * cols() + j]; }

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor " + shape_str(shape));
  return data[0];
}

void Tensor::check_finite(const std::string& context) const {
  for (double v : data)
    if (!std::isfinite(v)) throw NumericsError("non-finite value in " + context);
}

double linf_norm(const Tensor& t) {
  double m = 0.0;
  for (double v : t.data) m = std::max(m, std::fabs(v));
  return m;
}

double l2_norm(const Tensor& t) {
  double s = 0.0;
  for (double v : t.data) s += v * v;
  return std::sqrt(s);
}

double dot(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b))
    throw ShapeError("dot: shapes " + shape_str(a.shape) + " vs " + shape_str(b.shape));
  double s = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
  return s;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b))
    throw ShapeError("add: shapes " + shape_str(a.shape) + " vs " + shape_str(b.shape));
  Tensor r = a;
  for (std::size_t i = 0; i < r.data.size(); ++i) r.data[i] += b.data[i];
  return r;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b))
    throw ShapeError("sub: shapes " + shape_str(a.shape) + " vs " + shape_str(b.shape));
  Tensor r = a;
  for (std::size_t i = 0; i < r.data.size(); ++i) r.data[i] -= b.data[i];
  return r;
}

Tensor scale(const Tensor& a, double c) {
  Tensor r = a;
  for (double& v : r.data) v *= c;
  return r;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b))
    throw ShapeError("max_abs_diff: shapes " + shape_str(a.shape) + " vs " + shape_str(b.shape));
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    m = std::max(m, std::fabs(a.data[i] - b.data[i]));
  return m;
}

}  // namespace fedem
