#pragma once

#include <Eigen/Dense>

#include <complex>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>

namespace qprobe {

using cplx = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;
using Index = Eigen::Index;

// Raised when a computation produces results outside physical bounds.
class numerical_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <class Real>
using MatrixC = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, Eigen::Dynamic>;
template <class Real>
using VectorR = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

namespace linalg {

inline constexpr Index kMaxHilbertDim = 4096;

class dimension_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

template <class Derived>
typename Derived::RealScalar max_abs(const Eigen::MatrixBase<Derived>& m) {
  return m.size() == 0 ? typename Derived::RealScalar(0) : m.cwiseAbs().maxCoeff();
}

template <class Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

// Kronecker product, left factor outermost: (a⊗b)(i*rb+k, j*cb+l) = a(i,j) b(k,l).
template <class DA, class DB>
Eigen::Matrix<typename DA::Scalar, Eigen::Dynamic, Eigen::Dynamic> tensor_product(
    const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b,
    Index max_dim = kMaxHilbertDim) {
  if (!a.allFinite() || !b.allFinite()) throw std::invalid_argument("tensor_product: non-finite entry");
  const Index rows = a.rows() * b.rows(), cols = a.cols() * b.cols();
  if (rows > max_dim || cols > max_dim)
    throw dimension_error("tensor_product: dimension " + std::to_string(std::max(rows, cols)) +
                          " exceeds limit " + std::to_string(max_dim));
  Eigen::Matrix<typename DA::Scalar, Eigen::Dynamic, Eigen::Dynamic> out(rows, cols);
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b.template cast<typename DA::Scalar>();
  return out;
}

// Traces out the second (system) factor of a probe⊗system operator.
template <class Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> partial_trace_system(
    const Eigen::MatrixBase<Derived>& m, Index dim_probe, Index dim_sys) {
  if (m.rows() != dim_probe * dim_sys || m.cols() != dim_probe * dim_sys)
    throw dimension_error("partial_trace_system: expected square matrix of size " +
                          std::to_string(dim_probe * dim_sys));
  Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> out(dim_probe, dim_probe);
  for (Index i = 0; i < dim_probe; ++i)
    for (Index j = 0; j < dim_probe; ++j)
      out(i, j) = m.block(i * dim_sys, j * dim_sys, dim_sys, dim_sys).trace();
  return out;
}

// Traces out the first (probe) factor.
template <class Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> partial_trace_probe(
    const Eigen::MatrixBase<Derived>& m, Index dim_probe, Index dim_sys) {
  if (m.rows() != dim_probe * dim_sys || m.cols() != dim_probe * dim_sys)
    throw dimension_error("partial_trace_probe: dimension mismatch");
  Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> out =
      Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(dim_sys, dim_sys);
  for (Index i = 0; i < dim_probe; ++i) out += m.block(i * dim_sys, i * dim_sys, dim_sys, dim_sys);
  return out;
}

template <class Derived>
bool is_hermitian(const Eigen::MatrixBase<Derived>& m, double rel_tol = 1e-12) {
  if (m.rows() != m.cols()) return false;
  const double scale = max_abs(m);
  return max_abs(m - m.adjoint()) <= rel_tol * (scale > 0 ? scale : 1.0);
}

template <class Real>
struct EigenSystem {
  VectorR<Real> values;    // ascending
  MatrixC<Real> vectors;   // columns, phase-fixed
};

// Makes each column's largest-magnitude component real positive (ties: lowest index).
template <class Real>
void fix_phases(MatrixC<Real>& v) {
  for (Index c = 0; c < v.cols(); ++c) {
    Real best = 0;
    for (Index r = 0; r < v.rows(); ++r) best = std::max(best, std::abs(v(r, c)));
    if (best == 0) continue;
    Index pick = 0;
    for (Index r = 0; r < v.rows(); ++r)
      if (std::abs(v(r, c)) >= best * (1 - Real(1e-10))) {
        pick = r;
        break;
      }
    const std::complex<Real> z = v(pick, c);
    v.col(c) *= std::conj(z) / std::abs(z);
  }
}

template <class Real = double, class Derived>
EigenSystem<Real> eig_hermitian(const Eigen::MatrixBase<Derived>& h) {
  if (!is_hermitian(h)) throw std::invalid_argument("eig_hermitian: matrix is not Hermitian");
  Eigen::SelfAdjointEigenSolver<MatrixC<Real>> solver(h.template cast<std::complex<Real>>());
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("eig_hermitian: no convergence within " +
                             std::to_string(30 * h.rows()) + " QL iterations");
  EigenSystem<Real> es{solver.eigenvalues(), solver.eigenvectors()};
  fix_phases(es.vectors);
  return es;
}

template <class Real>
MatrixC<Real> evolve_unitary(const EigenSystem<Real>& es, Real t) {
  if (!std::isfinite(t)) throw std::invalid_argument("evolve_unitary: non-finite time");
  Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, 1> ph(es.values.size());
  for (Index k = 0; k < ph.size(); ++k) ph(k) = std::polar(Real(1), -es.values(k) * t);
  return es.vectors * ph.asDiagonal() * es.vectors.adjoint();
}

// e^{+iHt}.
template <class Real>
MatrixC<Real> exp_i(const EigenSystem<Real>& es, Real t) {
  return evolve_unitary(es, -t);
}

// Dense Hermitian operator with a write-once eigendecomposition cache.
template <class Real>
class BasicHermitian {
 public:
  BasicHermitian() : m_(MatrixC<Real>::Zero(0, 0)), cache_(std::make_shared<Cache>()) {}
  explicit BasicHermitian(MatrixC<Real> m, Real rel_tol = Real(1e-12))
      : m_(std::move(m)), cache_(std::make_shared<Cache>()) {
    if (!m_.allFinite()) throw std::invalid_argument("HermitianOperator: non-finite entry");
    if (!is_hermitian(m_, rel_tol)) throw std::invalid_argument("HermitianOperator: matrix is not Hermitian");
    m_ = (m_ + m_.adjoint()) / Real(2);
  }

  const MatrixC<Real>& matrix() const { return m_; }
  Index dim() const { return m_.rows(); }

  const EigenSystem<Real>& eig() const {
    std::call_once(cache_->once, [&] { cache_->es = eig_hermitian<Real>(m_); });
    return cache_->es;
  }

 private:
  struct Cache {
    std::once_flag once;
    EigenSystem<Real> es;
  };
  MatrixC<Real> m_;
  std::shared_ptr<Cache> cache_;
};

using HermitianOperator = BasicHermitian<double>;

template <class Real>
MatrixC<Real> evolve_unitary(const BasicHermitian<Real>& h, Real t) {
  return evolve_unitary(h.eig(), t);
}

// Throws unless m is a valid density operator.
void check_density(const CMat& m, double tol = 1e-10);

Eigen::Matrix2cd pauli_x();
Eigen::Matrix2cd pauli_y();
Eigen::Matrix2cd pauli_z();

}  // namespace linalg

using linalg::HermitianOperator;

}  // namespace qprobe
