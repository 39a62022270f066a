#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "fedem/model.hpp"
#include "fedem/perturb.hpp"
#include "fedem/rng.hpp"

using namespace fedem;

namespace {

ModelSpec mlp_spec(std::size_t d, std::size_t classes, std::vector<std::size_t> hidden) {
  ModelSpec s;
  s.channels = 1;
  s.height = 1;
  s.width = d;
  s.classes = classes;
  s.hidden = std::move(hidden);
  return s;
}

ModelSpec tiny_cnn() {
  ModelSpec s;
  s.kind = ModelSpec::Kind::kCnn;
  s.channels = 1;
  s.height = 6;
  s.width = 6;
  s.classes = 3;
  s.hidden = {5};
  s.conv_channels = 2;
  s.kernel = 3;
  s.pool = 2;
  return s;
}

}  // namespace

TEST_CASE("parameter shapes follow the dense chain") {
  ModelSpec s = mlp_spec(784, 10, {128});
  auto shapes = s.parameter_shapes();
  REQUIRE(shapes.size() == 4);
  CHECK(shapes[0].first == "w1");
  CHECK(shapes[0].second == Shape{784, 128});
  CHECK(shapes[1].first == "b1");
  CHECK(shapes[1].second == Shape{128});
  CHECK(shapes[2].second == Shape{128, 10});
  CHECK(shapes[3].second == Shape{10});
  CHECK(s.flat_size() == 101770);

  ModelSpec c = tiny_cnn();
  auto cs = c.parameter_shapes();
  REQUIRE(cs.size() == 5);
  CHECK(cs[0].first == "conv");
  CHECK(cs[0].second == Shape{2, 1, 3, 3});
  // conv output 4x4, pooled 2x2, two channels -> 8 dense inputs
  CHECK(cs[1].second == Shape{8, 5});
  CHECK(c.flat_size() == 2 * 9 + 8 * 5 + 5 + 5 * 3 + 3);
}

TEST_CASE("spec validation rejects impossible geometry") {
  CHECK_THROWS_AS(mlp_spec(0, 10, {4}).validate(), std::invalid_argument);
  CHECK_THROWS_AS(mlp_spec(4, 0, {4}).validate(), std::invalid_argument);
  CHECK_THROWS_AS(mlp_spec(4, 2, {0}).validate(), std::invalid_argument);
  ModelSpec big_kernel = tiny_cnn();
  big_kernel.kernel = 7;
  CHECK_THROWS_AS(big_kernel.validate(), std::invalid_argument);
  ModelSpec bad_pool = tiny_cnn();
  bad_pool.pool = 3;  // conv output 4x4 not divisible by 3
  CHECK_THROWS_AS(bad_pool.validate(), std::invalid_argument);
  CHECK_NOTHROW(tiny_cnn().validate());
}

TEST_CASE("spec strings roundtrip") {
  ModelSpec s = mlp_spec(12, 4, {8, 6});
  s.activation = Activation::kTanh;
  CHECK(s.to_string() == "mlp:tanh:1x1x12:8-6:4");
  ModelSpec back = ModelSpec::from_string(s.to_string());
  CHECK(back.to_string() == s.to_string());
  CHECK(back.hidden == s.hidden);

  ModelSpec c = tiny_cnn();
  CHECK(c.to_string() == "cnn:sigmoid:1x6x6:5:3:c2k3p2");
  ModelSpec cback = ModelSpec::from_string(c.to_string());
  CHECK(cback.to_string() == c.to_string());
  CHECK(cback.conv_channels == 2);
  CHECK(cback.pool == 2);

  ModelSpec flat = mlp_spec(5, 2, {});
  CHECK(flat.to_string() == "mlp:sigmoid:1x1x5:none:2");
  CHECK(ModelSpec::from_string(flat.to_string()).hidden.empty());

  CHECK_THROWS_AS(ModelSpec::from_string("rnn:tanh:1x1x5:none:2"), std::invalid_argument);
  CHECK_THROWS_AS(ModelSpec::from_string("mlp:tanh"), std::invalid_argument);
  CHECK_THROWS_AS(ModelSpec::from_string("cnn:tanh:1x6x6:none:2"), std::invalid_argument);
}

TEST_CASE("initialization is seeded, bounded, and zero-biased") {
  ModelSpec s = mlp_spec(9, 3, {7});
  ParameterSet a = init_params(s, 123), b = init_params(s, 123), c = init_params(s, 124);
  CHECK(a.flatten() == b.flatten());
  CHECK(a.flatten() != c.flatten());

  for (double v : a.values[1].data) CHECK(v == 0.0);  // b1
  for (double v : a.values[3].data) CHECK(v == 0.0);  // b2
  const double bound1 = 1.0 / std::sqrt(9.0), bound2 = 1.0 / std::sqrt(7.0);
  for (double v : a.values[0].data) CHECK(std::fabs(v) <= bound1);
  for (double v : a.values[2].data) CHECK(std::fabs(v) <= bound2);
  bool any_nonzero = false;
  for (double v : a.values[0].data) any_nonzero = any_nonzero || v != 0.0;
  CHECK(any_nonzero);
}

TEST_CASE("flatten, assign, and step agree on the canonical order") {
  ParameterSet p = init_params(mlp_spec(3, 2, {2}), 7);
  auto flat = p.flatten();
  REQUIRE(flat.size() == p.flat_size());
  CHECK(flat.size() == 3 * 2 + 2 + 2 * 2 + 2);

  std::vector<double> grad(flat.size());
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = static_cast<double>(i);
  ParameterSet q = p;
  q.step(grad, 0.5);
  auto stepped = q.flatten();
  for (std::size_t i = 0; i < flat.size(); ++i)
    CHECK(stepped[i] == doctest::Approx(flat[i] - 0.5 * i).epsilon(1e-15));

  ParameterSet r = p;
  r.assign_flat(stepped);
  CHECK(r.flatten() == stepped);
  CHECK_THROWS_AS(r.assign_flat(std::vector<double>(3)), std::invalid_argument);
  CHECK_THROWS_AS(r.step(std::vector<double>(3), 1.0), std::invalid_argument);
}

TEST_CASE("zero parameters give the uniform-prediction loss") {
  for (std::size_t classes : {2u, 5u, 10u}) {
    ModelSpec s = mlp_spec(6, classes, {4});
    ParameterSet p;
    p.spec = s;
    for (const auto& [name, shape] : s.parameter_shapes()) p.values.emplace_back(shape);
    Tensor x({3, 6});
    Rng rng(1);
    for (double& v : x.data) v = rng.uniform01();
    CHECK(batch_loss(p, x, {0, 1, 0}) ==
          doctest::Approx(std::log(static_cast<double>(classes))).epsilon(1e-12));
  }
}

TEST_CASE("checkpoints roundtrip bit for bit") {
  namespace fs = std::filesystem;
  fs::path path = fs::temp_directory_path() / "fedem-test-ckpt.bin";
  ParameterSet p = init_params(mlp_spec(5, 3, {4}), 99);
  p.values[0].data[0] = 1.0 / 3.0;  // a value %g could not reproduce
  p.values[0].data[1] = 1e-308;
  save_params(path.string(), p);
  ParameterSet q = load_params(path.string());
  CHECK(q.spec.to_string() == p.spec.to_string());
  CHECK(q.flatten() == p.flatten());

  ParameterSet c = init_params(tiny_cnn(), 5);
  save_params(path.string(), c);
  CHECK(load_params(path.string()).flatten() == c.flatten());

  CHECK_THROWS(load_params((fs::temp_directory_path() / "fedem-no-such.bin").string()));
  fs::remove(path);
}

TEST_CASE("cnn forward pass produces logits and features of the right shape") {
  ModelSpec s = tiny_cnn();
  ParameterSet p = init_params(s, 8);
  Tensor x({2, 36});
  Rng rng(3);
  for (double& v : x.data) v = rng.uniform01();
  Tensor logits = logits_eager(p, x);
  CHECK(logits.shape == Shape{2, 3});
  logits.check_finite("cnn logits");
  Tensor feats = penultimate_features(p, x);
  CHECK(feats.shape == Shape{2, 5});
}

TEST_CASE("cnn batch gradient matches finite differences") {
  ModelSpec s = tiny_cnn();
  ParameterSet p = init_params(s, 21);
  Tensor x({2, 36});
  std::vector<int> y = {0, 2};
  Rng rng(4);
  for (double& v : x.data) v = rng.uniform01();

  std::vector<double> g = client_gradient(p, x, y, {});
  REQUIRE(g.size() == p.flat_size());
  auto flat = p.flatten();
  const double h = 1e-5;
  Rng pick(9);
  for (int t = 0; t < 25; ++t) {
    std::size_t i = pick.uniform_int(flat.size());
    ParameterSet up = p, dn = p;
    auto fu = flat, fd = flat;
    fu[i] += h;
    fd[i] -= h;
    up.assign_flat(fu);
    dn.assign_flat(fd);
    const double fd_grad = (batch_loss(up, x, y) - batch_loss(dn, x, y)) / (2 * h);
    CHECK(g[i] == doctest::Approx(fd_grad).epsilon(1e-5).scale(1.0));
  }
}
