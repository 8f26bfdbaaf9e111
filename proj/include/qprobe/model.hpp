#pragma once

#include "qprobe/linalg.hpp"

namespace qprobe::model {

struct ProbeControl {
  double lambda = 0;
  double theta = 0;
  double phi = 0;
};

void check_control(const ProbeControl& c);

struct ControlBasis {
  Eigen::Vector2cd pi0;
  Eigen::Vector2cd pi1;
};

// (A0, A1, B) blocks of V_PS in the control basis; A0, A1 carry cached eigensystems.
struct CouplingBlocks {
  HermitianOperator a0;
  HermitianOperator a1;
  CMat b;

  Index dim() const { return b.rows(); }
};

// Amplitudes a_k = <psi|pi_k> in the control basis.
struct ProbePureState {
  cplx a0 = 1;
  cplx a1 = 0;

  double sigma() const { return std::norm(a0) - std::norm(a1); }
};

ProbePureState basis_state(int k);
// State proportional to c0|pi0> + c1|pi1>.
ProbePureState superposition(cplx c0, cplx c1);
ProbePureState from_vector(const Eigen::Vector2cd& psi, const ControlBasis& basis);
Eigen::Vector2cd to_vector(const ProbePureState& s, const ControlBasis& basis);
void check_state(const ProbePureState& s, double tol = 1e-12);

Eigen::Matrix2cd control_pauli(double theta, double phi);
ControlBasis control_eigenbasis(double theta, double phi);

// V_PS = I⊗H_S + V.
CMat combine_coupling(const CMat& h_s, const CMat& v);

CouplingBlocks decompose_coupling(const CMat& v_ps, const ControlBasis& basis);
CMat assemble_coupling(const CouplingBlocks& blocks, const ControlBasis& basis);

// Blocks at (theta, phi) from the theta=0 blocks via the half-angle rotation formulas.
// B is returned in the phase convention of control_eigenbasis(theta, phi).
CouplingBlocks rotate_blocks(const CouplingBlocks& blocks_z, double theta, double phi);

// Raw rotation with pi0 = (c, e^{i phi} s), pi1 = (-e^{-i phi} s, c); differs from the
// canonical B by a global phase only.
CouplingBlocks rotate_blocks_raw(const CouplingBlocks& blocks_z, double theta, double phi);

// H_tot = (lambda/2) sigma_(theta,phi) ⊗ I + V_PS.
CMat total_hamiltonian(const CMat& v_ps, const ProbeControl& control);

}  // namespace qprobe::model
