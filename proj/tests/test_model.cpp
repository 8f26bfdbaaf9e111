#include "doctest.h"
#include "helpers.hpp"

#include <numbers>

using namespace qprobe;
using namespace qprobe::model;
using linalg::max_abs;
using linalg::tensor_product;

TEST_CASE("control_pauli special directions") {
  const double pi = std::numbers::pi;
  CHECK(max_abs(control_pauli(0, 0) - linalg::pauli_z()) < 1e-15);
  CHECK(max_abs(control_pauli(pi / 2, 0) - linalg::pauli_x()) < 1e-15);
  CHECK(max_abs(control_pauli(pi / 2, pi / 2) - linalg::pauli_y()) < 1e-15);
}

TEST_CASE("control_eigenbasis") {
  const auto z = control_eigenbasis(0, 0);
  CHECK((z.pi0 - Eigen::Vector2cd(1, 0)).norm() < 1e-15);
  CHECK((z.pi1 - Eigen::Vector2cd(0, 1)).norm() < 1e-15);

  const auto x = control_eigenbasis(std::numbers::pi / 2, 0);
  CHECK((x.pi0 - Eigen::Vector2cd(1, 1) / std::sqrt(2.0)).norm() < 1e-14);
  CHECK(std::abs(x.pi0.dot(x.pi1)) < 1e-14);

  const auto b = control_eigenbasis(0.7, 1.3);
  const Eigen::Matrix2cd s = control_pauli(0.7, 1.3);
  CHECK((s * b.pi0 - b.pi0).norm() < 1e-10);
  CHECK((s * b.pi1 + b.pi1).norm() < 1e-10);
}

TEST_CASE("decompose_coupling simple cases") {
  std::mt19937_64 g(20);
  const CMat c = th::random_hermitian(3, g);
  const auto basis = control_eigenbasis(0, 0);

  const auto bz = decompose_coupling(tensor_product(CMat(linalg::pauli_z()), c), basis);
  CHECK(max_abs(bz.a0.matrix() - c) < 1e-15);
  CHECK(max_abs(bz.a1.matrix() + c) < 1e-15);
  CHECK(max_abs(bz.b) == 0.0);

  const auto bx = decompose_coupling(tensor_product(CMat(linalg::pauli_x()), c), basis);
  CHECK(max_abs(bx.b - c) < 1e-15);
  CHECK(max_abs(bx.a0.matrix()) == 0.0);
  CHECK(max_abs(bx.a1.matrix()) == 0.0);
}

TEST_CASE("decompose then assemble is the identity") {
  std::mt19937_64 g(21);
  const CMat v = th::random_hermitian(8, g);
  const auto basis = control_eigenbasis(0.4, 2.1);
  const auto blocks = decompose_coupling(v, basis);
  CHECK(max_abs(assemble_coupling(blocks, basis) - v) < 1e-10);
  CHECK_THROWS_AS(decompose_coupling(th::random_matrix(4, 4, g), basis), std::invalid_argument);
  CHECK_THROWS_AS(decompose_coupling(th::random_hermitian(5, g), basis), linalg::dimension_error);
}

TEST_CASE("rotate_blocks matches decompose_coupling on a grid") {
  std::mt19937_64 g(22);
  const CMat v = th::random_hermitian(6, g);
  const auto bz = decompose_coupling(v, control_eigenbasis(0, 0));
  const auto same = rotate_blocks(bz, 0, 0);
  CHECK(max_abs(same.a0.matrix() - bz.a0.matrix()) < 1e-14);
  CHECK(max_abs(same.b - bz.b) < 1e-14);

  double worst = 0, worst_raw = 0;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) {
      const double theta = std::numbers::pi * i / 4, phi = 2 * std::numbers::pi * j / 5;
      const auto direct = decompose_coupling(v, control_eigenbasis(theta, phi));
      const auto rot = rotate_blocks(bz, theta, phi);
      worst = std::max({worst, max_abs(rot.a0.matrix() - direct.a0.matrix()),
                        max_abs(rot.a1.matrix() - direct.a1.matrix()), max_abs(rot.b - direct.b)});
      // raw blocks differ only by a phase on B
      const auto raw = rotate_blocks_raw(bz, theta, phi);
      worst_raw = std::max(worst_raw, std::abs(raw.b.norm() - direct.b.norm()));
    }
  CHECK(worst < 1e-10);
  CHECK(worst_raw < 1e-10);
}

TEST_CASE("probe states") {
  const auto b = control_eigenbasis(0.3, 0.9);
  const auto s = superposition(1, cplx(0, 1));
  CHECK_NOTHROW(check_state(s));
  CHECK(s.sigma() == doctest::Approx(0).epsilon(1e-15));
  const auto back = from_vector(to_vector(s, b), b);
  CHECK(std::abs(back.a0 - s.a0) < 1e-14);
  CHECK(std::abs(back.a1 - s.a1) < 1e-14);
  // a_k = <psi|pi_k>
  CHECK(std::abs(from_vector(b.pi0, b).a0 - 1.0) < 1e-14);
  CHECK(basis_state(1).sigma() == -1);
  CHECK_THROWS(basis_state(2));
  CHECK_THROWS(check_state(ProbePureState{1, 1}));
}

TEST_CASE("total_hamiltonian and control checks") {
  std::mt19937_64 g(23);
  const CMat v = th::random_hermitian(4, g);
  const CMat h = total_hamiltonian(v, {2.0, 0, 0});
  CHECK(max_abs(h - v - tensor_product(CMat(linalg::pauli_z()), CMat::Identity(2, 2))) < 1e-15);
  CHECK_THROWS(check_control({-1, 0, 0}));
  CHECK_THROWS(check_control({1, 4, 0}));
  CHECK_THROWS(check_control({1, 0, 7}));
  CHECK_NOTHROW(check_control({1, 1, 1}));
  const CMat hs = th::random_hermitian(2, g);
  CHECK(max_abs(combine_coupling(hs, v) - v - tensor_product(CMat(CMat::Identity(2, 2)), hs)) < 1e-15);
}
