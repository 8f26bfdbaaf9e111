#include "doctest.h"
#include "helpers.hpp"

#include "qprobe/estimation.hpp"
#include "qprobe/parallel.hpp"

#include <numbers>

using namespace qprobe;
using namespace qprobe::estimation;

namespace {

std::vector<double> grid(double lo, double hi, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = lo + (hi - lo) * i / (n - 1);
  return v;
}

}  // namespace

TEST_CASE("noise-free recovery") {
  const double tau = 1.7, eta = 0.5, D = 0.1, phi = 1.0;
  const auto lam = grid(50, 50 + 2.2 * std::numbers::pi / tau, 40);
  std::vector<double> p;
  for (double l : lam) p.push_back(0.2 + eta + D * std::cos(l * tau + phi));
  FitOptions o;
  o.q_offset = 0.2;
  const auto f = fit_oscillation(lam, p, {}, tau, o);
  CHECK(f.eta == doctest::Approx(eta).epsilon(1e-10));
  CHECK(f.D == doctest::Approx(D).epsilon(1e-10));
  CHECK(f.phi == doctest::Approx(phi).epsilon(1e-10));
  CHECK(f.residual_rms < 1e-12);
  CHECK(f.model(lam[3]) + 0.2 == doctest::Approx(p[3]).epsilon(1e-12));
}

TEST_CASE("envelope fit recovers a power-law amplitude") {
  const double tau = 0.9, D = 0.3, phi = -2.0, lref = 40;
  const auto lam = grid(30, 30 + 3 * std::numbers::pi / tau * 2, 60);
  std::vector<double> p;
  for (double l : lam) p.push_back(std::pow(lref / l, 2) * (0.05 + D * std::cos(l * tau + phi)));
  FitOptions o;
  o.envelope_order = 2;
  o.lambda_ref = lref;
  const auto f = fit_oscillation(lam, p, {}, tau, o);
  CHECK(f.D == doctest::Approx(D).epsilon(1e-10));
  CHECK(f.phi == doctest::Approx(phi).epsilon(1e-10));
  CHECK(f.eta == doctest::Approx(0.05).epsilon(1e-10));
}

TEST_CASE("constant samples give zero amplitude") {
  const auto lam = grid(10, 20, 30);
  const std::vector<double> p(30, 0.37);
  const auto f = fit_oscillation(lam, p, {}, 1.0);
  CHECK(f.eta == doctest::Approx(0.37).epsilon(1e-12));
  CHECK(f.D < 1e-12);
}

TEST_CASE("coverage and input errors") {
  const auto lam = grid(10, 11, 30);
  const std::vector<double> p(30, 0.5);
  CHECK_THROWS_AS(fit_oscillation(lam, p, {}, 1.0), numerical_error);
  CHECK_THROWS_AS(fit_oscillation(lam, p, {}, 0.0), numerical_error);
  CHECK_THROWS_AS(fit_oscillation(std::vector<double>(3, 1.0), std::vector<double>(3, 1.0), {}, 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(fit_oscillation(lam, std::vector<double>(29, 0.5), {}, 10.0), std::invalid_argument);
}

TEST_CASE("shot-noise coverage of the reported standard errors") {
  const double tau = 2.0, eta = 0.3, D = 0.05, phi = 0.4, q = 0.4;
  const auto lam = grid(100, 100 + 2 * std::numbers::pi / tau * 1.05, 100);
  const long long shots = 1000000;
  int ok_D = 0, ok_eta = 0, ok_phi = 0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    std::vector<double> p;
    for (std::size_t i = 0; i < lam.size(); ++i) {
      const double pe = q + eta + D * std::cos(lam[i] * tau + phi);
      p.push_back(double(dynamics::sample_shots(pe, shots, derive_seed(t, i))) / double(shots));
    }
    FitOptions o;
    o.q_offset = q;
    const auto f = fit_oscillation(lam, p, {}, tau, o);
    ok_D += std::abs(f.D - D) <= 3 * f.stderr_D;
    ok_eta += std::abs(f.eta - eta) <= 3 * f.stderr_eta;
    ok_phi += std::abs(std::remainder(f.phi - phi, 2 * std::numbers::pi)) <= 3 * f.stderr_phi;
  }
  CHECK(ok_D >= 0.95 * trials);
  CHECK(ok_eta >= 0.95 * trials);
  CHECK(ok_phi >= 0.95 * trials);
}

TEST_CASE("convergence check") {
  const double tau = 2 * std::numbers::pi;
  auto window_fit = [&](double lo, auto dfun) {
    const auto lam = grid(lo, lo + 1.2, 40);
    std::vector<double> p;
    for (double l : lam) p.push_back(0.1 + dfun(l) * std::cos(l * tau + 0.3));
    return fit_oscillation(lam, p, {}, tau);
  };
  auto profile = [](double l) { return 0.2 * (1 + 5 / l); };
  auto flat = [](double) { return 0.2; };

  const std::vector<OscillationFit> same{window_fit(10, flat), window_fit(20, flat), window_fit(30, flat)};
  CHECK(convergence_check(same).pass);

  const std::vector<OscillationFit> far{window_fit(1000, profile), window_fit(2000, profile),
                                        window_fit(4000, profile)};
  CHECK(convergence_check(far).pass);

  const std::vector<OscillationFit> straddle{window_fit(2, profile), window_fit(4, profile), window_fit(7, profile)};
  const auto rep = convergence_check(straddle);
  CHECK_FALSE(rep.pass);
  CHECK(rep.delta_D.size() == 2);

  CHECK_FALSE(convergence_check({same[0], same[1]}).pass);
  CHECK_FALSE(convergence_check({same[1], same[0], same[2]}).pass);
}

TEST_CASE("tau series") {
  RVec t1(1);
  t1 << 0.5;
  CVec v1(1);
  v1 << cplx(1, 1);
  CHECK(make_tau_series(t1, v1).size() == 1);

  const int n = 50;
  RVec tau(n);
  CVec val(n);
  for (int k = 0; k < n; ++k) {
    tau(k) = 0.1 * (k + 1);
    val(k) = std::polar(2.0, 1.3 * tau(k));
  }
  const auto s = make_tau_series(tau, val, "x");
  CHECK(s.phase_unwrapped(n - 1) == doctest::Approx(1.3 * tau(n - 1)).epsilon(1e-12));
  CHECK_FALSE(s.phase_jump);
  CHECK(s.dtau() == doctest::Approx(0.1));

  RVec bad = tau;
  bad(7) += 0.01;
  CHECK_THROWS_AS(make_tau_series(bad, val), std::invalid_argument);

  std::vector<OscillationFit> fits(3);
  for (int k = 0; k < 3; ++k) {
    fits[k].tau = k + 1.0;
    fits[k].D = 0.5;
    fits[k].phi = 0.1 * k;
    fits[k].eta = 0.2;
  }
  const auto b = build_tau_series(fits, "q", cplx(0, 2));
  CHECK(std::abs(b.values(2) - cplx(0, 2) * std::polar(0.5, 0.2)) < 1e-15);
  CHECK(b.eta(1) == 0.2);
}
