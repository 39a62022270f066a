#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace fedem {

/// Error carrying the two offending shapes (or one shape and a description).
struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Raised when a tensor holds NaN/Inf; NaN is an error state, never a value.
struct NumericsError : std::runtime_error {
  explicit NumericsError(const std::string& msg) : std::runtime_error(msg) {}
};

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);

/// Dense n-dimensional array of 64-bit reals, row-major.
struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(Shape s, std::vector<double> d);
  explicit Tensor(Shape s);  // zero-filled

  static Tensor scalar(double v) { return Tensor({1}, {v}); }
  static Tensor zeros(Shape s) { return Tensor(std::move(s)); }
  static Tensor ones(Shape s);
  static Tensor filled(Shape s, double v);

  std::size_t numel() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  // 2-D accessors; rows()/cols() require rank 2
  std::size_t rows() const;
  std::size_t cols() const;
  double& at(std::size_t i, std::size_t j);
  double at(std::size_t i, std::size_t j) const;

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  double item() const;  // requires numel()==1

  /// Throws NumericsError if any element is NaN or Inf.
  void check_finite(const std::string& context) const;
};

std::size_t shape_numel(const Shape& s);

// Elementwise helpers used outside the graph (metrics, projections, ...).
double linf_norm(const Tensor& t);
double l2_norm(const Tensor& t);
double dot(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace fedem
