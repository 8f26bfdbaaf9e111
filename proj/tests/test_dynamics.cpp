#include "doctest.h"
#include "helpers.hpp"

#include "qprobe/parallel.hpp"

#include <atomic>
#include <numbers>

using namespace qprobe;
using namespace qprobe::dynamics;
using model::basis_state;
using model::superposition;

TEST_CASE("free probe: stationary eigenstate and precession") {
  const CMat v = CMat::Zero(4, 4);
  const CMat rho = CMat::Identity(2, 2) / 2.0;
  for (double lambda : {0.3, 2.0, 17.0})
    for (double tau : {0.0, 0.4, 3.1}) {
      CHECK(transition_probability(v, rho, {lambda, 0, 0}, {lambda, tau, basis_state(0), basis_state(0)}) ==
            doctest::Approx(1).epsilon(1e-12));
      const auto plus = superposition(1, 1);
      const double c = std::cos(lambda * tau / 2);
      CHECK(transition_probability(v, rho, {lambda, 0.8, 1.1}, {lambda, tau, plus, plus}) ==
            doctest::Approx(c * c).epsilon(1e-12));
    }
}

TEST_CASE("exact probability matches brute-force density evolution") {
  std::mt19937_64 g(30);
  const CMat v = th::random_hermitian(6, g);
  const CMat rho = th::random_density(3, g);
  const model::ProbeControl ctl{3.0, 0.6, 1.7};
  const auto prep = superposition(cplx(0.3, 0.2), 0.9), meas = superposition(0.5, cplx(0, -0.7));
  const double tau = 1.3;
  const auto basis = model::control_eigenbasis(ctl.theta, ctl.phi);
  const Eigen::Vector2cd a = model::to_vector(prep, basis), b = model::to_vector(meas, basis);
  const CMat u = th::expm(model::total_hamiltonian(v, ctl), tau);
  const CMat r0 = linalg::tensor_product(Eigen::Matrix2cd(a * a.adjoint()), rho);
  const CMat pr = linalg::tensor_product(Eigen::Matrix2cd(b * b.adjoint()), CMat::Identity(3, 3));
  const double want = (pr * u * r0 * u.adjoint()).trace().real();
  CHECK(transition_probability(v, rho, ctl, {ctl.lambda, tau, prep, meas}) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("completeness: p(beta) + p(beta_perp) = 1") {
  std::mt19937_64 g(31);
  const CMat v = th::random_hermitian(8, g);
  const CMat rho = th::random_density(4, g);
  const auto prep = superposition(0.4, cplx(0.1, 0.8));
  const auto meas = superposition(cplx(0.6, 0.2), 0.3);
  // orthogonal complement: vector (c0, c1) -> (-c1*, c0*)
  const auto perp = superposition(-meas.a1, meas.a0);
  for (double tau : {0.1, 0.9, 4.0}) {
    const double p1 = transition_probability(v, rho, {5, 0.3, 0.2}, {5, tau, prep, meas});
    const double p2 = transition_probability(v, rho, {5, 0.3, 0.2}, {5, tau, prep, perp});
    CHECK(p1 + p2 == doctest::Approx(1).epsilon(1e-12));
    CHECK(p1 >= 0);
    CHECK(p1 <= 1);
  }
}

TEST_CASE("input validation") {
  std::mt19937_64 g(32);
  const CMat v = th::random_hermitian(4, g);
  CHECK_THROWS_AS(transition_probability(v, th::random_density(3, g), {1, 0, 0}, {1, 1, basis_state(0), basis_state(0)}),
                  linalg::dimension_error);
  CHECK_THROWS(transition_probability(v, th::random_density(2, g), {1, 0, 0}, {1, -1, basis_state(0), basis_state(0)}));
  CHECK_THROWS_AS(clamp_probability(1.1), numerical_error);
  CHECK(clamp_probability(1 + 1e-12) == 1.0);
  CHECK(clamp_probability(-1e-12) == 0.0);
}

TEST_CASE("sample_shots") {
  CHECK(sample_shots(0, 100, 1) == 0);
  CHECK(sample_shots(1, 100, 1) == 100);
  CHECK(sample_shots(0.3, 1000, 7) == sample_shots(0.3, 1000, 7));
  const long long c = sample_shots(0.5, 1000000, 42);
  CHECK(std::abs(double(c) - 500000) < 5 * 500);
  double mean = 0;
  for (int s = 0; s < 100; ++s) mean += double(sample_shots(0.5, 1000000, derive_seed(9, s))) / 100;
  CHECK(std::abs(mean - 500000) < 3 * 500 / 10.0);
  CHECK_THROWS(sample_shots(1.5, 10, 1));
  CHECK_THROWS(sample_shots(0.5, -1, 1));
}

TEST_CASE("run_sweep determinism across worker counts") {
  std::mt19937_64 g(33);
  SweepModel m{th::random_hermitian(4, g), th::random_density(2, g), 0, 0, basis_state(0), basis_state(0)};
  std::vector<GridPoint> grid;
  for (int i = 0; i < 12; ++i)
    for (int k = 0; k < 5; ++k) grid.push_back({10.0 + i, 0.5 * (k + 1)});
  const auto a = run_sweep(m, grid, 10000, 5, 1);
  const auto b = run_sweep(m, grid, 10000, 5, 8);
  REQUIRE(a.points.size() == grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CHECK(a.points[i].count == b.points[i].count);
    CHECK(a.points[i].p_exact == b.points[i].p_exact);
    CHECK(a.points[i].lambda == grid[i].lambda);
  }
  const auto exact = run_sweep(m, {{3, 1}}, 0, 5);
  CHECK_FALSE(exact.points[0].p_sampled.has_value());
  CHECK_THROWS(run_sweep(m, {}, 0, 1));
}

TEST_CASE("parallel_for runs each index once and propagates errors") {
  std::vector<std::atomic<int>> hits(200);
  parallel_for(hits.size(), 6, [&](std::size_t i) { hits[i]++; });
  for (auto& h : hits) CHECK(h.load() == 1);
  CHECK_THROWS_AS(parallel_for(50, 4, [](std::size_t i) { if (i == 17) throw std::runtime_error("x"); }),
                  std::runtime_error);
  CHECK(derive_seed(1, 2) != derive_seed(1, 3));
  CHECK(derive_seed(1, 2) == derive_seed(1, 2));
}
