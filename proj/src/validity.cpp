#include "qprobe/perturbation.hpp"

#include <cmath>
#include <limits>

namespace qprobe::perturbation {

Eigen::MatrixXd constraint_kernel(const RVec& e, double tau, double degeneracy_tol) {
  const Index n = e.size();
  const double scale = n ? std::max(1.0, e.cwiseAbs().maxCoeff()) : 1.0;
  Eigen::MatrixXd k(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      const double gap = std::abs(e(i) - e(j));
      k(i, j) = gap <= degeneracy_tol * scale ? tau : 1.0 / gap;
    }
  return k;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double safe_ratio(double num, double den) {
  if (den == 0) return kInf;
  return num / den;
}

// sum_jk kappa_jk |<j|X|k><k|Y|j>| in the eigenbasis (vectors) of the operator.
double kernel_sum(const Eigen::MatrixXd& kappa, const CMat& vecs, const CMat& x, const CMat& y) {
  const CMat xt = vecs.adjoint() * x * vecs;
  const CMat yt = vecs.adjoint() * y * vecs;
  double s = 0;
  for (Index j = 0; j < kappa.rows(); ++j)
    for (Index k = 0; k < kappa.cols(); ++k) s += kappa(j, k) * std::abs(xt(j, k) * yt(k, j));
  return s;
}

struct Reach {
  std::vector<bool> r0, r1;
};

Reach reachable(const CMat& bt, const CMat& rho0, const CMat& rho1, int steps, double cutoff) {
  const Index d = bt.rows();
  const double bmax = linalg::max_abs(bt);
  Reach r{std::vector<bool>(d, false), std::vector<bool>(d, false)};
  for (Index j = 0; j < d; ++j) {
    if (std::abs(rho0(j, j)) > cutoff) r.r0[j] = true;
    if (std::abs(rho1(j, j)) > cutoff) r.r1[j] = true;
  }
  if (bmax == 0) return r;
  for (int s = 0; s < steps; ++s) {
    Reach next = r;
    for (Index j = 0; j < d; ++j)
      for (Index k = 0; k < d; ++k) {
        if (std::abs(bt(j, k)) <= cutoff * bmax) continue;
        if (r.r0[j]) next.r1[k] = true;
        if (r.r1[k]) next.r0[j] = true;
      }
    r = std::move(next);
  }
  return r;
}

ConstraintCheck make_check(std::string name, double lhs, double rhs, double margin) {
  ConstraintCheck c{std::move(name), lhs, rhs, safe_ratio(lhs, rhs), false};
  if (lhs == 0 && rhs == 0) c.ratio = kInf;
  c.pass = c.ratio >= margin;
  return c;
}

}  // namespace

ValidityReport validity_report(const model::CouplingBlocks& blocks, const CMat& rho, double lambda, double tau,
                               int order, const ValidityOptions& opts) {
  if (order < 0 || order > 2) throw std::invalid_argument("validity_report: order must be 0, 1 or 2");
  ValidityReport rep;
  rep.lambda = lambda;
  rep.tau = tau;
  rep.order = order;
  rep.margin = opts.margin;

  const auto& e0 = blocks.a0.eig();
  const auto& e1 = blocks.a1.eig();
  const CMat& b = blocks.b;
  const CMat bd = b.adjoint();
  const CMat bt = e0.vectors.adjoint() * b * e1.vectors;  // <j0|B|k1>
  const CMat rho0 = e0.vectors.adjoint() * rho * e0.vectors;
  const CMat rho1 = e1.vectors.adjoint() * rho * e1.vectors;
  const Reach reach = reachable(bt, rho0, rho1, opts.reach, opts.support_cutoff);
  const double bmax = linalg::max_abs(bt);

  // (a) matrix-element bound and (b) resonances over reachable coupled pairs
  const double width = opts.resonance_width >= 0 ? opts.resonance_width : 1e-3 * lambda;
  double bound = 0;
  for (Index j = 0; j < bt.rows(); ++j)
    for (Index k = 0; k < bt.cols(); ++k) {
      if (!reach.r0[j] || !reach.r1[k]) continue;
      const double m = std::abs(bt(j, k));
      if (m <= opts.support_cutoff * bmax || bmax == 0) continue;
      bound = std::max(bound, m);
      const double gap = std::abs(e0.values(j) - e1.values(k));
      const double det = std::abs(lambda - gap);
      if (det < width) rep.resonances.push_back({j, k, gap, det});
    }
  rep.matrix_element_bound = bound;
  rep.constraints.push_back(make_check("matrix_element", lambda, bound, opts.margin));

  // (c) order-specific constraint, both index/dagger variants, worse ratio kept
  const Eigen::MatrixXd k0 = constraint_kernel(e0.values, tau);
  const Eigen::MatrixXd k1 = constraint_kernel(e1.values, tau);
  const double s0a = kernel_sum(k0, e0.vectors, bd * b, rho);
  const double s0b = kernel_sum(k1, e1.vectors, b * bd, rho);
  switch (order) {
    case 0:
      rep.constraints.push_back(make_check("order0", lambda, std::max(s0a, s0b), opts.margin));
      break;
    case 1: {
      const double tb = std::abs((b * rho).trace());
      auto c = make_check("order1", tb, std::max(s0a, s0b), opts.margin);
      rep.constraints.push_back(c);
      break;
    }
    case 2: {
      const CMat ra = bd * rho * b, rb = b * rho * bd;
      const double ta = std::abs(ra.trace()), tb = std::abs(rb.trace());
      const double na = kernel_sum(k0, e0.vectors, bd * b, ra);
      const double nb = kernel_sum(k1, e1.vectors, b * bd, rb);
      const double va = ta > 0 ? na / ta : (na > 0 ? kInf : 0.0);
      const double vb = tb > 0 ? nb / tb : (nb > 0 ? kInf : 0.0);
      rep.constraints.push_back(make_check("order2", lambda, std::max(va, vb), opts.margin));
      break;
    }
  }

  rep.pass = rep.resonances.empty();
  for (const auto& c : rep.constraints) rep.pass = rep.pass && c.pass;
  return rep;
}

}  // namespace qprobe::perturbation
