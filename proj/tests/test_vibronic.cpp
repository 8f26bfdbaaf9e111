#include "doctest.h"
#include "helpers.hpp"

#include "qprobe/parallel.hpp"
#include "qprobe/vibronic.hpp"

#include <numbers>

using namespace qprobe;
using namespace qprobe::vibronic;

namespace {

VibronicModel two_mode() {
  VibronicModel m;
  m.omega = RVec(2);
  m.omega << 1.2, 2.4;
  m.gamma_d = RVec(2);
  m.gamma_d << 0.6, 0.6;
  m.gamma_a = RVec(2);
  m.gamma_a << 0.12, -0.36;
  m.T = 15;
  m.lambda = 100;
  m.V = 1;
  return m;
}

VibronicModel one_mode(double omega, double gd, double ga, double T) {
  VibronicModel m;
  m.omega = RVec::Constant(1, omega);
  m.gamma_d = RVec::Constant(1, gd);
  m.gamma_a = RVec::Constant(1, ga);
  m.T = T;
  return m;
}

struct Grid {
  std::vector<double> lambdas, taus;
  Eigen::MatrixXd p;
};

// modes on bins 10 and 20 of a 64-point record
Grid round_trip_grid(const VibronicModel& m) {
  Grid g;
  const int n = 64;
  const double dtau = 2 * std::numbers::pi * kHbar / 0.12 / n;
  for (int k = 0; k < n; ++k) g.taus.push_back((k + 1) * dtau);
  const double span = 1.1 * 2 * std::numbers::pi * kHbar / dtau;
  for (int i = 0; i < 100; ++i) g.lambdas.push_back(m.lambda - span / 2 + span * (i + 0.5) / 100);
  g.p.resize(100, n);
  for (int i = 0; i < 100; ++i) {
    VibronicModel mi = m;
    mi.lambda = g.lambdas[i];
    for (int k = 0; k < n; ++k) g.p(i, k) = analytic_probability(mi, g.taus[k]);
  }
  return g;
}

}  // namespace

TEST_CASE("polaron quantities") {
  const auto m = two_mode();
  const auto pol = polaron(m);
  CHECK(pol.xi()(0) == doctest::Approx(0.4));
  CHECK(pol.xi()(1) == doctest::Approx(0.4));
  CHECK(pol.reorganization == doctest::Approx(0.384));
  CHECK(thermal_factor(1.0, 0) == 1.0);
  CHECK(thermal_factor(1e4, 300) == doctest::Approx(1.0));
  CHECK(check_model(m).empty());
  VibronicModel w = m;
  w.lambda = 5;
  CHECK_FALSE(check_model(w).empty());
  w.omega(0) = -1;
  CHECK_THROWS(check_model(w));
}

TEST_CASE("f(tau)") {
  const auto m = two_mode();
  CHECK(f_tau(m, 0) == 0.0);
  const auto z = one_mode(1.5, 0.9, 0.3, 0);
  const double u = 0.4;
  for (double t : {0.3, 1.7, 5.0})
    CHECK(f_tau(z, t) == doctest::Approx(-u * u * (1 - std::cos(1.5 * t / kHbar))).epsilon(1e-14));
  // independent term-by-term summation
  for (double t : {0.2, 2.2, 9.1}) {
    double want = 0;
    for (int k = 0; k < 2; ++k) {
      const double xi = (m.gamma_d(k) - m.gamma_a(k)) / m.omega(k);
      const double c = std::cosh(m.omega(k) / (2 * kBoltzmann * m.T)) / std::sinh(m.omega(k) / (2 * kBoltzmann * m.T));
      want += -xi * xi * c * (1 - std::cos(m.omega(k) * t / kHbar));
    }
    CHECK(std::abs(f_tau(m, t) - want) <= 1e-14 * std::max(1.0, std::abs(want)));
  }
}

TEST_CASE("analytic probability") {
  auto m = two_mode();
  const double er = polaron(m).reorganization;
  CHECK(analytic_probability(m, 0, Formula::uncorrected) == doctest::Approx(1e-4));
  CHECK(analytic_probability(m, 0) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(tau_max(m) == doctest::Approx(10 * kHbar));
  for (double t : {0.5, 3.0}) {
    const double p = analytic_probability(m, t);
    CHECK(p >= 0);
    CHECK(p <= 4 / std::pow(m.lambda - er, 2) + 1e-15);
  }
}

TEST_CASE("displacement matrix elements against a truncated exponential") {
  const int n = 40;
  CMat a = CMat::Zero(n, n);
  for (int k = 1; k < n; ++k) a(k - 1, k) = std::sqrt(double(k));
  const cplx xi(0.5, -0.3);
  const CMat gen = xi * a.adjoint() - std::conj(xi) * a;
  const CMat d = gen.exp();
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) CHECK(std::abs(displacement_matrix_element(i, j, xi) - d(i, j)) < 1e-10);
  CHECK(std::abs(displacement_matrix_element(0, 0, 0.7) - std::exp(-0.245)) < 1e-15);
  CHECK_THROWS(displacement_matrix_element(-1, 0, 0.1));
  CHECK(displacement_bound(two_mode(), 4) <= 1.0);
}

TEST_CASE("analytic formula against the truncated-Fock oracle") {
  const auto m = two_mode();
  const double tm = tau_max(m);
  std::vector<double> ts;
  for (int i = 0; i <= 40; ++i) ts.push_back(tm * i / 40);
  const auto ex = fock_probability(m, ts, 12);
  const auto ex2 = fock_probability(m, ts, 14);
  double n = 0, dc = 0, dt = 0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    n += ex[i] * ex[i];
    dc += std::pow(analytic_probability(m, ts[i]) - ex[i], 2);
    dt += std::pow(ex2[i] - ex[i], 2);
  }
  CHECK(std::sqrt(dt / n) < 1e-3);
  CHECK(std::sqrt(dc / n) < 0.05);
}

TEST_CASE("noise-free reconstruction and spectral round trip") {
  const auto m = two_mode();
  const auto g = round_trip_grid(m);
  ReconstructOptions o;
  o.T = m.T;
  const auto r = reconstruct_f_and_Er(g.lambdas, g.taus, g.p, m.V, o);
  CHECK(r.reorganization == doctest::Approx(0.384).epsilon(1e-8));
  for (std::size_t k = 0; k < g.taus.size(); ++k) CHECK(std::abs(r.f(Index(k)) - f_tau(m, g.taus[k])) < 1e-8);

  const auto s = spectral_density(g.taus, r.f, m.T);
  const std::vector<double> want_w{1.2, 2.4}, want_j{0.2304, 0.9216};
  for (int k = 0; k < 2; ++k) {
    Index bin = 0;
    (s.omega.array() - want_w[std::size_t(k)]).abs().minCoeff(&bin);
    CHECK(std::abs(s.omega(bin) - want_w[std::size_t(k)]) <= s.resolution);
    CHECK(s.J(bin) == doctest::Approx(want_j[std::size_t(k)]).epsilon(0.05));
  }
  const auto th = thermometry(s, want_w, want_j);
  REQUIRE(th.ok);
  CHECK(th.T == doctest::Approx(15).epsilon(0.05));
}

TEST_CASE("single mode without reorganization has zero phase slope") {
  // gamma_d^2 = gamma_a^2 so E_r = 0
  auto m = one_mode(1.2, 0.3, -0.3, 0);
  m.lambda = 100;
  const auto g = round_trip_grid(m);
  const auto r = reconstruct_f_and_Er(g.lambdas, g.taus, g.p, m.V, {m.T, 60, 3});
  CHECK(std::abs(r.reorganization) < 1e-8);
}

TEST_CASE("thermometry behaviour") {
  SpectralEstimate s;
  s.omega = RVec::LinSpaced(10, 0.5, 5.0);
  s.resolution = 0.5;
  const double w0 = s.omega(3), j0 = 0.8;
  double last = 0;
  for (double T : {10.0, 50.0, 300.0}) {
    s.f_tilde = RVec::Zero(10);
    s.f_tilde(3) = j0 / (w0 * w0) * thermal_factor(w0, T);
    const auto th = thermometry(s, {w0}, {j0});
    REQUIRE(th.ok);
    CHECK(th.T == doctest::Approx(T).epsilon(1e-6));
    CHECK(th.T > last);
    last = th.T;
  }
  s.f_tilde = RVec::Zero(10);
  CHECK_FALSE(thermometry(s, {w0}, {j0}).ok);
  CHECK_FALSE(thermometry(s, {}, {}).ok);
  // high frequency: coth -> 1 so f~ -> J / omega^2
  CHECK(thermal_factor(500.0, 300) == doctest::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("spectral density of a single on-bin mode") {
  const int n = 64;
  const double dtau = 2 * std::numbers::pi * kHbar / 0.12 / n;
  std::vector<double> ts;
  const auto m = one_mode(1.2, 0.6, 0.12, 40);
  RVec f(n);
  for (int k = 0; k < n; ++k) {
    ts.push_back((k + 1) * dtau);
    f(k) = f_tau(m, ts.back());
  }
  const auto s = spectral_density(ts, f, m.T);
  Index bin = 0;
  s.J.maxCoeff(&bin);
  CHECK(s.omega(bin) == doctest::Approx(1.2).epsilon(1e-9));
  CHECK(s.J(bin) == doctest::Approx(std::pow(0.6 - 0.12, 2)).epsilon(1e-9));
}

TEST_CASE("shot-noise reconstruction stays within its error bars") {
  const auto m = two_mode();
  auto g = round_trip_grid(m);
  for (Index i = 0; i < g.p.rows(); ++i)
    for (Index k = 0; k < g.p.cols(); ++k)
      g.p(i, k) = double(dynamics::sample_shots(g.p(i, k), 1000000, derive_seed(77, std::uint64_t(i * 1000 + k)))) / 1e6;
  const auto r = reconstruct_f_and_Er(g.lambdas, g.taus, g.p, m.V, {m.T, 60, 3});
  CHECK(std::abs(r.reorganization - 0.384) <= 3 * r.reorganization_stderr + 1e-12);
  double chi = 0;
  int used = 0;
  for (std::size_t k = 0; k < g.taus.size(); ++k)
    if (r.resolved[k]) {
      chi += std::pow((r.f(Index(k)) - f_tau(m, g.taus[k])) / r.f_stderr(Index(k)), 2);
      ++used;
    }
  REQUIRE(used > 10);
  CHECK(chi / used < 4.0);
}
