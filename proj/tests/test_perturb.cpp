#include <doctest.h>

#include <cmath>

#include "fedem/model.hpp"
#include "fedem/perturb.hpp"
#include "fedem/rng.hpp"

using namespace fedem;

namespace {

PerturbationConfig radii(double rho_max, double rho_min) {
  PerturbationConfig cfg;
  cfg.rho_max = rho_max;
  cfg.rho_min = rho_min;
  return cfg;
}

ModelSpec small_spec() {
  ModelSpec s;
  s.channels = 1;
  s.height = 1;
  s.width = 6;
  s.classes = 3;
  s.hidden = {4};
  return s;
}

}  // namespace

TEST_CASE("annulus projection clamps to the outer radius") {
  Tensor d = project_annulus(Tensor({2}, {16.0, -4.0}), radii(8, 0));
  CHECK(d.data == std::vector<double>{8.0, -4.0});
  Tensor inside = project_annulus(Tensor({3}, {1.0, -2.0, 0.5}), radii(8, 0));
  CHECK(inside.data == std::vector<double>{1.0, -2.0, 0.5});  // rho_min 0: pure clamp
}

TEST_CASE("annulus projection rescales onto the inner shell") {
  Tensor d = project_annulus(Tensor({2}, {1.0, 0.5}), radii(8, 2));
  CHECK(d.data[0] == 2.0);  // peak pinned exactly
  CHECK(d.data[1] == doctest::Approx(1.0).epsilon(1e-15));

  Tensor neg = project_annulus(Tensor({2}, {-1.0, 0.5}), radii(8, 2));
  CHECK(neg.data[0] == -2.0);  // sign survives the pin
  CHECK(neg.data[1] == doctest::Approx(1.0).epsilon(1e-15));

  Tensor pass = project_annulus(Tensor({1}, {3.0}), radii(8, 2));
  CHECK(pass.data[0] == 3.0);  // already inside the annulus

  Tensor zero = project_annulus(Tensor({3}), radii(8, 2));
  CHECK(zero.data == std::vector<double>{2.0, 0.0, 0.0});  // escape hatch for the origin

  // Clamping can pull the vector under rho_min; the rescale runs after.
  Tensor shrunk = project_annulus(Tensor({2}, {50.0, 0.0}), radii(1, 1));
  CHECK(shrunk.data == std::vector<double>{1.0, 0.0});
}

TEST_CASE("annulus projection invariant holds for random vectors") {
  Rng rng(404);
  for (int trial = 0; trial < 1000; ++trial) {
    const double rho_max = 0.5 + 8 * rng.uniform01();
    const double rho_min = rho_max * rng.uniform01();
    PerturbationConfig cfg = radii(rho_max, rho_min);
    Tensor d({6});
    for (double& v : d.data) v = rng.uniform(-2 * rho_max, 2 * rho_max);
    Tensor p = project_annulus(d, cfg);
    CHECK(linf_norm(p) >= rho_min);
    CHECK(linf_norm(p) <= rho_max);
  }
}

TEST_CASE("perturbation config validation") {
  CHECK_NOTHROW(radii(8, 0).validate());
  CHECK_THROWS_AS(radii(8, -1).validate(), std::invalid_argument);
  CHECK_THROWS_AS(radii(1, 2).validate(), std::invalid_argument);
  PerturbationConfig bad_alpha = radii(8, 0);
  bad_alpha.alpha = -0.1;
  CHECK_THROWS_AS(bad_alpha.validate(), std::invalid_argument);
  PerturbationConfig bad_iter = radii(8, 0);
  bad_iter.iterations = 0;
  CHECK_THROWS_AS(bad_iter.validate(), std::invalid_argument);
  PerturbationConfig bad_scale = radii(8, 0);
  bad_scale.loss_scale = 0;
  CHECK_THROWS_AS(bad_scale.validate(), std::invalid_argument);
}

TEST_CASE("initial perturbations are seeded and live in the annulus") {
  PerturbationConfig cfg = radii(8, 3);
  Rng a(5), b(5), c(6);
  Tensor da = init_delta({2, 6}, cfg, a);
  Tensor db = init_delta({2, 6}, cfg, b);
  Tensor dc = init_delta({2, 6}, cfg, c);
  CHECK(da.data == db.data);
  CHECK(da.data != dc.data);
  CHECK(linf_norm(da) <= 8.0);
  CHECK(linf_norm(da) >= 3.0);

  // A zero outer radius means a zero perturbation, not a degenerate draw.
  Rng z(5);
  Tensor dz = init_delta({1, 4}, radii(0, 0), z);
  for (double v : dz.data) {
    CHECK(v == 0.0);
    CHECK_FALSE(std::signbit(v));
  }
}

TEST_CASE("perturbed batch equals the input plus the scaled perturbation") {
  ParameterSet theta = init_params(small_spec(), 17);
  Tensor x({2, 6});
  Rng rng(2);
  for (double& v : x.data) v = rng.uniform01();
  PerturbationConfig cfg = radii(8, 0);
  cfg.iterations = 2;
  Rng prng(33);
  PerturbationResult r = generate_perturbation(theta, x, {0, 1}, cfg, {}, prng);
  REQUIRE(r.delta.shape == x.shape);
  for (std::size_t i = 0; i < x.numel(); ++i)
    CHECK(r.x_perturbed_raw.data[i] == x.data[i] + r.delta.data[i] / 255.0);
  CHECK(linf_norm(r.delta) <= 8.0);
}

TEST_CASE("perturbation generation is deterministic in the stream") {
  ParameterSet theta = init_params(small_spec(), 17);
  Tensor x({2, 6});
  Rng rng(2);
  for (double& v : x.data) v = rng.uniform01();
  PerturbationConfig cfg = radii(8, 1);
  Rng a(7), b(7);
  Tensor da = generate_perturbation(theta, x, {0, 1}, cfg, {}, a).delta;
  Tensor db = generate_perturbation(theta, x, {0, 1}, cfg, {}, b).delta;
  CHECK(da.data == db.data);
}

TEST_CASE("sign steps ignore a positive rescaling of the loss") {
  ParameterSet theta = init_params(small_spec(), 17);
  Tensor x({2, 6});
  Rng rng(2);
  for (double& v : x.data) v = rng.uniform01();

  PerturbationConfig cfg = radii(8, 0);
  cfg.eta_u = 0.0;  // keep the surrogate frozen so only sign steps act
  PerturbationConfig scaled = cfg;
  scaled.loss_scale = 7.5;

  Rng a(9), b(9);
  Tensor da = generate_perturbation(theta, x, {0, 1}, cfg, {}, a).delta;
  Tensor db = generate_perturbation(theta, x, {0, 1}, scaled, {}, b).delta;
  CHECK(da.data == db.data);
}

TEST_CASE("the input model is never modified") {
  ParameterSet theta = init_params(small_spec(), 17);
  auto before = theta.flatten();
  Tensor x({2, 6});
  Rng rng(2);
  for (double& v : x.data) v = rng.uniform01();
  PerturbationConfig cfg = radii(8, 0);
  cfg.eta_u = 0.05;  // surrogate updates must not leak back
  Rng prng(3);
  generate_perturbation(theta, x, {0, 1}, cfg, {}, prng);
  CHECK(theta.flatten() == before);
}

TEST_CASE("perturbation lowers the training loss it minimizes") {
  ParameterSet theta = init_params(small_spec(), 40);
  Tensor x({4, 6});
  std::vector<int> y = {0, 1, 2, 0};
  Rng rng(8);
  for (double& v : x.data) v = rng.uniform01();

  PerturbationConfig cfg = radii(64, 0);
  cfg.alpha = 16;
  cfg.iterations = 4;
  cfg.eta_u = 0.0;  // surrogate == global model, so the target is unambiguous
  Rng prng(12);
  PerturbationResult r = generate_perturbation(theta, x, y, cfg, {}, prng);

  const double clean = batch_loss(theta, x, y);
  const double perturbed = batch_loss(theta, r.x_perturbed_raw, y);
  CHECK(perturbed < clean);
}

TEST_CASE("client gradients match finite differences through normalization") {
  ModelSpec spec = small_spec();
  ParameterSet theta = init_params(spec, 23);
  NormalizationTransform t{{0.4}, {0.3}};
  Tensor x({3, 6});
  std::vector<int> y = {2, 0, 1};
  Rng rng(6);
  for (double& v : x.data) v = rng.uniform01();

  std::vector<double> g = client_gradient(theta, x, y, t);
  REQUIRE(g.size() == theta.flat_size());
  Tensor xn = normalize_eager(t, x, 1, 6);
  auto flat = theta.flatten();
  const double h = 1e-6;
  Rng pick(77);
  for (int k = 0; k < 30; ++k) {
    std::size_t i = pick.uniform_int(flat.size());
    ParameterSet up = theta, dn = theta;
    auto fu = flat, fd = flat;
    fu[i] += h;
    fd[i] -= h;
    up.assign_flat(fu);
    dn.assign_flat(fd);
    const double want = (batch_loss(up, xn, y) - batch_loss(dn, xn, y)) / (2 * h);
    CHECK(g[i] == doctest::Approx(want).epsilon(1e-6).scale(1.0));
  }
}
