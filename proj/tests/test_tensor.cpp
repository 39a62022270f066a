#include <doctest.h>

#include <cmath>

#include "fedem/tensor.hpp"

using namespace fedem;

TEST_CASE("construction and element access") {
  Tensor t({2, 3});
  CHECK(t.numel() == 6);
  CHECK(t.rank() == 2);
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  for (double v : t.data) CHECK(v == 0.0);
  t.at(1, 2) = 5.0;
  CHECK(t.data[5] == 5.0);
  CHECK(t.at(1, 2) == 5.0);

  Tensor s = Tensor::scalar(3.5);
  CHECK(s.item() == 3.5);
  CHECK_THROWS_AS(t.item(), ShapeError);

  CHECK(Tensor::ones({2, 2}).data == std::vector<double>{1, 1, 1, 1});
  CHECK(Tensor::filled({3}, 2.5).data == std::vector<double>{2.5, 2.5, 2.5});
}

TEST_CASE("mismatched payload is rejected") {
  CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0}), ShapeError);
}

TEST_CASE("shape_str formats dimensions") {
  CHECK(shape_str({2, 3}) == "[2x3]");
  CHECK(shape_str({7}) == "[7]");
}

TEST_CASE("norms and elementwise helpers") {
  Tensor a({2}, {3.0, -4.0});
  CHECK(l2_norm(a) == 5.0);
  CHECK(linf_norm(a) == 4.0);
  Tensor b({2}, {1.0, 1.0});
  CHECK(dot(a, b) == -1.0);
  CHECK(add(a, b).data == std::vector<double>{4.0, -3.0});
  CHECK(sub(a, b).data == std::vector<double>{2.0, -5.0});
  CHECK(scale(a, 2.0).data == std::vector<double>{6.0, -8.0});
  CHECK(max_abs_diff(a, b) == 5.0);
  Tensor c({3}, {0, 0, 0});
  CHECK_THROWS_AS(add(a, c), ShapeError);
}

TEST_CASE("check_finite flags NaN and Inf with context") {
  Tensor t({2}, {1.0, std::nan("")});
  CHECK_THROWS_AS(t.check_finite("unit"), NumericsError);
  Tensor u({1}, {INFINITY});
  CHECK_THROWS_AS(u.check_finite("unit"), NumericsError);
  Tensor ok({2}, {1.0, -2.0});
  CHECK_NOTHROW(ok.check_finite("unit"));
}
