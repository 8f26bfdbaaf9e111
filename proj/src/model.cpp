#include "qprobe/model.hpp"

#include <cmath>
#include <numbers>

namespace qprobe::model {

using linalg::max_abs;

void check_control(const ProbeControl& c) {
  if (!std::isfinite(c.lambda) || c.lambda < 0) throw std::invalid_argument("control: lambda must be finite and >= 0");
  if (!(c.theta >= 0 && c.theta <= std::numbers::pi)) throw std::invalid_argument("control: theta outside [0, pi]");
  if (!(c.phi >= 0 && c.phi < 2 * std::numbers::pi)) throw std::invalid_argument("control: phi outside [0, 2pi)");
}

ProbePureState basis_state(int k) {
  if (k == 0) return {1, 0};
  if (k == 1) return {0, 1};
  throw std::invalid_argument("basis_state: index must be 0 or 1");
}

ProbePureState superposition(cplx c0, cplx c1) {
  const double n = std::sqrt(std::norm(c0) + std::norm(c1));
  if (n == 0) throw std::invalid_argument("superposition: zero vector");
  return {std::conj(c0) / n, std::conj(c1) / n};
}

ProbePureState from_vector(const Eigen::Vector2cd& psi, const ControlBasis& basis) {
  const double n = psi.norm();
  if (n == 0) throw std::invalid_argument("from_vector: zero vector");
  return {psi.dot(basis.pi0) / n, psi.dot(basis.pi1) / n};
}

Eigen::Vector2cd to_vector(const ProbePureState& s, const ControlBasis& basis) {
  return std::conj(s.a0) * basis.pi0 + std::conj(s.a1) * basis.pi1;
}

void check_state(const ProbePureState& s, double tol) {
  if (std::abs(std::norm(s.a0) + std::norm(s.a1) - 1) > tol)
    throw std::invalid_argument("probe state: amplitudes not normalized");
}

Eigen::Matrix2cd control_pauli(double theta, double phi) {
  const double st = std::sin(theta);
  return st * std::cos(phi) * linalg::pauli_x() + st * std::sin(phi) * linalg::pauli_y() +
         std::cos(theta) * linalg::pauli_z();
}

ControlBasis control_eigenbasis(double theta, double phi) {
  const auto es = linalg::eig_hermitian(control_pauli(theta, phi));
  // eigenvalues ascending: column 1 is +1
  return {es.vectors.col(1), es.vectors.col(0)};
}

CMat combine_coupling(const CMat& h_s, const CMat& v) {
  if (v.rows() != 2 * h_s.rows() || v.cols() != v.rows())
    throw linalg::dimension_error("combine_coupling: V must be (2 dim_S) square");
  return linalg::tensor_product(Eigen::Matrix2cd::Identity(), h_s) + v;
}

namespace {

CMat sandwich(const CMat& v, const Eigen::Vector2cd& bra, const Eigen::Vector2cd& ket) {
  const Index d = v.rows() / 2;
  CMat out = CMat::Zero(d, d);
  for (Index i = 0; i < 2; ++i)
    for (Index j = 0; j < 2; ++j) {
      const cplx c = std::conj(bra(i)) * ket(j);
      if (c != cplx(0)) out += c * v.block(i * d, j * d, d, d);
    }
  return out;
}

}  // namespace

CouplingBlocks decompose_coupling(const CMat& v_ps, const ControlBasis& basis) {
  if (v_ps.rows() != v_ps.cols() || v_ps.rows() % 2 != 0)
    throw linalg::dimension_error("decompose_coupling: V_PS must be square with even dimension");
  if (!linalg::is_hermitian(v_ps)) throw std::invalid_argument("decompose_coupling: V_PS is not Hermitian");
  CMat a0 = sandwich(v_ps, basis.pi0, basis.pi0);
  CMat a1 = sandwich(v_ps, basis.pi1, basis.pi1);
  CMat b = sandwich(v_ps, basis.pi0, basis.pi1);
  return {HermitianOperator((a0 + a0.adjoint()) / 2.0), HermitianOperator((a1 + a1.adjoint()) / 2.0), b};
}

CMat assemble_coupling(const CouplingBlocks& blocks, const ControlBasis& basis) {
  const Eigen::Matrix2cd p00 = basis.pi0 * basis.pi0.adjoint();
  const Eigen::Matrix2cd p11 = basis.pi1 * basis.pi1.adjoint();
  const Eigen::Matrix2cd p01 = basis.pi0 * basis.pi1.adjoint();
  return linalg::tensor_product(p00, blocks.a0.matrix()) + linalg::tensor_product(p11, blocks.a1.matrix()) +
         linalg::tensor_product(p01, blocks.b) + linalg::tensor_product(Eigen::Matrix2cd(p01.adjoint()), CMat(blocks.b.adjoint()));
}

CouplingBlocks rotate_blocks_raw(const CouplingBlocks& z, double theta, double phi) {
  const double c = std::cos(theta / 2), s = std::sin(theta / 2);
  const cplx e = std::polar(1.0, phi);
  const CMat& a0 = z.a0.matrix();
  const CMat& a1 = z.a1.matrix();
  const CMat& b = z.b;
  const CMat bd = b.adjoint();
  CMat r0 = c * c * a0 + s * s * a1 + c * s * (e * b + std::conj(e) * bd);
  CMat r1 = s * s * a0 + c * c * a1 - c * s * (e * b + std::conj(e) * bd);
  CMat rb = std::conj(e) * (c * s * (a1 - a0) + c * c * e * b - s * s * std::conj(e) * bd);
  return {HermitianOperator((r0 + r0.adjoint()) / 2.0), HermitianOperator((r1 + r1.adjoint()) / 2.0), rb};
}

CouplingBlocks rotate_blocks(const CouplingBlocks& z, double theta, double phi) {
  CouplingBlocks raw = rotate_blocks_raw(z, theta, phi);
  const double c = std::cos(theta / 2), s = std::sin(theta / 2);
  const cplx e = std::polar(1.0, phi);
  const Eigen::Vector2cd r0(c, e * s), r1(-std::conj(e) * s, c);
  const ControlBasis canon = control_eigenbasis(theta, phi);
  // canonical pi_k = u_k * raw pi_k with |u_k| = 1
  const cplx u0 = r0.dot(canon.pi0), u1 = r1.dot(canon.pi1);
  raw.b *= std::conj(u0) * u1;
  return raw;
}

CMat total_hamiltonian(const CMat& v_ps, const ProbeControl& control) {
  const Index d = v_ps.rows() / 2;
  return linalg::tensor_product(Eigen::Matrix2cd(0.5 * control.lambda * control_pauli(control.theta, control.phi)),
                                CMat::Identity(d, d)) +
         v_ps;
}

}  // namespace qprobe::model
