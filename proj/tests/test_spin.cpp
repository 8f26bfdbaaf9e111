#include "doctest.h"
#include "helpers.hpp"

#include "qprobe/spin.hpp"

using namespace qprobe;
using namespace qprobe::spin;

namespace {

SpinGeometry two_spins(double r, double mu = 2.7928) {
  SpinGeometry g;
  g.positions = {Vec3(0, 0, 0), Vec3(0, 0, r)};
  g.moments = {mu, mu};
  g.b0 = Vec3::Zero();
  return g;
}

}  // namespace

TEST_CASE("Zeeman splitting of one spin") {
  SpinGeometry g;
  g.positions = {Vec3(0, 0, 0)};
  g.moments = {2.7928};
  g.b0 = Vec3(0, 0, 1e-3);
  const RVec e = build_spin_hamiltonian(g).eig().values;
  CHECK(e(1) - e(0) == doctest::Approx(2.7928 * kNuclearMagneton * 1e-3).epsilon(1e-12));
  g.b0 = Vec3(0.6e-3, 0, 0.8e-3);
  const RVec e2 = build_spin_hamiltonian(g).eig().values;
  CHECK(e2(1) - e2(0) == doctest::Approx(2.7928 * kNuclearMagneton * 1e-3).epsilon(1e-12));
}

TEST_CASE("two-spin dipolar spectrum") {
  const double r = 0.2;
  const auto g = two_spins(r);
  const double j = kDipolarPrefactor * std::pow(2.7928 * kNuclearMagneton, 2) / (r * r * r);
  const RVec e = build_spin_hamiltonian(g).eig().values;
  CHECK(e(0) == doctest::Approx(-j / 2).epsilon(1e-10));
  CHECK(e(1) == doctest::Approx(-j / 2).epsilon(1e-10));
  CHECK(std::abs(e(2)) < 1e-10 * j);
  CHECK(e(3) == doctest::Approx(j).epsilon(1e-10));
  // nuclear spins a couple of angstrom apart split by tens of peV
  CHECK(e(3) - e(0) > 1);
  CHECK(e(3) - e(0) < 100);
}

TEST_CASE("dipolar spectrum scales as r^-3") {
  const RVec a = build_spin_hamiltonian(two_spins(0.3)).eig().values;
  const RVec b = build_spin_hamiltonian(two_spins(0.6)).eig().values;
  CHECK(linalg::max_abs(RVec(a / 8.0 - b)) < 1e-12 * linalg::max_abs(a));
}

TEST_CASE("probe coupling") {
  SpinGeometry g;
  g.positions = {Vec3(0, 0, 0)};
  g.moments = {2.7928};
  g.probe_position = Vec3(0, 0, 4.0);
  g.probe_axis = Vec3(1, 0, 0);
  g.probe_moment = 0.3;
  const CMat b = build_probe_operator(g);
  const double j = kDipolarPrefactor * 0.3 * kPeVPerMeV * 2.7928 * kNuclearMagneton / 64.0;
  // axis perpendicular to the separation leaves only S_x
  CHECK(linalg::max_abs(CMat(b - j * CMat(linalg::pauli_x()) / 2.0)) < 1e-12 * j);
  const CMat v = build_probe_coupling(g);
  CHECK(v.rows() == 4);
  CHECK(linalg::max_abs(CMat(v.topRightCorner(2, 2) - b)) == 0.0);

  g.probe_moment = 0;
  CHECK(linalg::max_abs(build_probe_coupling(g)) == 0.0);
}

TEST_CASE("geometry validation and random placement") {
  SpinGeometry g;
  CHECK_THROWS(check_geometry(g));
  g.positions = {Vec3(0, 0, 0), Vec3(0, 0, 0)};
  g.moments = {1, 1};
  CHECK_THROWS(check_geometry(g));
  g.positions[1] = Vec3(0, 0, 0.3);
  g.probe_axis = Vec3(1, 1, 0);
  CHECK_THROWS(check_geometry(g));

  const auto pos = random_spin_positions(4, 0.5, 0.3, 9);
  REQUIRE(pos.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(pos[i].norm() <= 0.5);
    for (std::size_t k = i + 1; k < 4; ++k) CHECK((pos[i] - pos[k]).norm() >= 0.3);
  }
  CHECK(random_spin_positions(4, 0.5, 0.3, 9)[2] == pos[2]);
  const Vec3 p = random_probe_position(3.5, 5, 2);
  CHECK(p.norm() >= 3.5);
  CHECK(p.norm() <= 5);
  CHECK_THROWS(random_spin_positions(8, 0.1, 1.0, 1));
}

TEST_CASE("zero coupling gives a flat spectrum") {
  SpinGeometry g = two_spins(0.25);
  g.b0 = Vec3(0, 0, 1e-3);
  g.probe_moment = 0;
  NmrRunConfig cfg;
  cfg.budget = 3200;
  cfg.budgets = {3200};
  cfg.lambda_count = 20;
  cfg.shots = 0;
  const auto res = run_nmr_experiment(g, cfg);
  REQUIRE(res.reconstructed.size() == 1);
  CHECK(res.reconstructed[0].peaks.empty());
  CHECK(res.reference.empty());
}

TEST_CASE("noise-free measured series tracks the exact correlation") {
  SpinGeometry g = two_spins(0.25);
  g.b0 = Vec3(0, 0, 1e-3);
  g.probe_position = Vec3(3.0, 1.0, 0.5);
  NmrRunConfig cfg;
  cfg.budget = 6400;
  cfg.budgets = {3200, 6400};
  cfg.lambda_count = 30;
  cfg.shots = 0;
  const auto res = run_nmr_experiment(g, cfg);
  CHECK(res.validity.pass);
  CHECK(res.lambda0 > 0);
  const double scale = res.exact.values.cwiseAbs().maxCoeff();
  CHECK((res.measured.values - res.exact.values).cwiseAbs().maxCoeff() < 0.02 * scale);
  REQUIRE(res.perfect.size() == 2);
  CHECK(res.perfect[1].spectrum.resolution == doctest::Approx(res.perfect[0].spectrum.resolution / 2));

  cfg.jobs = 4;
  const auto again = run_nmr_experiment(g, cfg);
  CHECK((again.measured.values - res.measured.values).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("config validation") {
  NmrRunConfig c;
  CHECK_NOTHROW(check_config(c));
  c.budgets = {100};
  CHECK_THROWS(check_config(c));
  c = NmrRunConfig{};
  c.lambda_count = 3;
  CHECK_THROWS(check_config(c));
}
