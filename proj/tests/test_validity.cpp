#include "doctest.h"
#include "helpers.hpp"

#include "qprobe/perturbation.hpp"

using namespace qprobe;
using namespace qprobe::perturbation;

namespace {

model::CouplingBlocks make_blocks(const CMat& a0, const CMat& a1, const CMat& b) {
  return {HermitianOperator(a0), HermitianOperator(a1), b};
}

CMat diag(std::initializer_list<double> v) {
  RVec d(Index(v.size()));
  Index i = 0;
  for (double x : v) d(i++) = x;
  return d.cast<cplx>().asDiagonal();
}

}  // namespace

TEST_CASE("constraint kernel") {
  RVec e(3);
  e << 0.0, 2.0, 2.0;
  const auto k = constraint_kernel(e, 3.5);
  CHECK(k(0, 1) == doctest::Approx(0.5));
  CHECK(k(1, 0) == doctest::Approx(0.5));
  CHECK(k(1, 2) == 3.5);
  CHECK(k(0, 0) == 3.5);
}

TEST_CASE("B = 0 passes with infinite ratios") {
  std::mt19937_64 g(60);
  const auto blocks = make_blocks(th::random_hermitian(3, g), th::random_hermitian(3, g), CMat::Zero(3, 3));
  const CMat rho = th::random_density(3, g);
  for (int order : {0, 1, 2}) {
    const auto rep = validity_report(blocks, rho, 1.0, 2.0, order);
    CHECK(rep.pass);
    CHECK(rep.resonances.empty());
    for (const auto& c : rep.constraints) CHECK(std::isinf(c.ratio));
  }
}

TEST_CASE("resonance is flagged with the offending pair") {
  CMat b = CMat::Zero(2, 2);
  b(1, 0) = 0.05;
  const auto blocks = make_blocks(diag({0.0, 3.0}), diag({0.0, 1.0}), b);
  const CMat rho = CMat::Identity(2, 2) / 2.0;
  const auto rep = validity_report(blocks, rho, 3.0, 1.0, 2);
  CHECK_FALSE(rep.pass);
  REQUIRE(rep.resonances.size() == 1);
  CHECK(rep.resonances[0].j == 1);
  CHECK(rep.resonances[0].k == 0);
  CHECK(rep.resonances[0].gap == doctest::Approx(3.0));
  const auto off = validity_report(blocks, rho, 30.0, 1.0, 2);
  CHECK(off.resonances.empty());
  CHECK(off.pass);
}

TEST_CASE("unreachable states do not trigger the bound") {
  // rho supported on level 0 only; B couples levels 1 and 1 which the chain never reaches
  CMat b = CMat::Zero(3, 3);
  b(1, 1) = 5.0;
  const auto blocks = make_blocks(diag({0, 1, 2}), diag({0.5, 1.5, 2.5}), b);
  CMat rho = CMat::Zero(3, 3);
  rho(0, 0) = 1;
  const auto rep = validity_report(blocks, rho, 2.0, 1.0, 0);
  CHECK(rep.matrix_element_bound == 0.0);
}

TEST_CASE("matrix-element bound and margin") {
  std::mt19937_64 g(61);
  const CMat v = th::random_bounded_hermitian(4, g, 1.0);
  const auto blocks = model::decompose_coupling(v, model::control_eigenbasis(0, 0));
  const CMat rho = th::random_density(2, g);
  const auto low = validity_report(blocks, rho, 1.0, 1.0, 2);
  const auto high = validity_report(blocks, rho, 1e4, 1.0, 2);
  CHECK_FALSE(low.pass);
  CHECK(high.pass);
  CHECK(high.matrix_element_bound > 0);
  CHECK(high.matrix_element_bound <= std::sqrt(2.0) * 2);
  CHECK_THROWS(validity_report(blocks, rho, 1.0, 1.0, 3));
}
