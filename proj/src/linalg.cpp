#include "qprobe/linalg.hpp"

namespace qprobe::linalg {

void check_density(const CMat& m, double tol) {
  if (m.rows() != m.cols() || m.rows() == 0) throw std::invalid_argument("density operator: not square");
  if (!m.allFinite()) throw std::invalid_argument("density operator: non-finite entry");
  if (max_abs(m - m.adjoint()) > 1e-12 * std::max(1.0, max_abs(m)))
    throw std::invalid_argument("density operator: not Hermitian");
  const cplx tr = m.trace();
  if (std::abs(tr - 1.0) > tol)
    throw std::invalid_argument("density operator: trace " + std::to_string(tr.real()) + " differs from 1");
  Eigen::SelfAdjointEigenSolver<CMat> solver(m, Eigen::EigenvaluesOnly);
  if (solver.eigenvalues().minCoeff() < -tol)
    throw std::invalid_argument("density operator: negative eigenvalue " +
                                std::to_string(solver.eigenvalues().minCoeff()));
}

Eigen::Matrix2cd pauli_x() {
  Eigen::Matrix2cd m;
  m << 0, 1, 1, 0;
  return m;
}

Eigen::Matrix2cd pauli_y() {
  Eigen::Matrix2cd m;
  m << 0, cplx(0, -1), cplx(0, 1), 0;
  return m;
}

Eigen::Matrix2cd pauli_z() {
  Eigen::Matrix2cd m;
  m << 1, 0, 0, -1;
  return m;
}

}  // namespace qprobe::linalg
