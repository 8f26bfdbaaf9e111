#include "qprobe/perturbation.hpp"

#include <cmath>

namespace qprobe::perturbation {

ExpansionFunctions expansion_functions(const model::CouplingBlocks& blocks, const CMat& rho, double lambda,
                                       double tau) {
  if (!(tau >= 0)) throw std::invalid_argument("expansion_functions: tau must be >= 0");
  if (rho.rows() != blocks.dim()) throw linalg::dimension_error("expansion_functions: rho_S dimension mismatch");
  const CMat u0 = linalg::exp_i(blocks.a0.eig(), tau);  // e^{i A0 tau}
  const CMat u1 = linalg::exp_i(blocks.a1.eig(), tau);
  const CMat u0d = u0.adjoint(), u1d = u1.adjoint();
  const CMat& b = blocks.b;
  const CMat bd = b.adjoint();
  const CMat bbd = b * bd, bdb = bd * b;
  auto ev = [&](const CMat& x) { return (x * rho).trace(); };

  const CMat u0u1d = u0 * u1d;
  ExpansionFunctions f;
  f.tau = tau;
  f.lambda = lambda;
  f.zeta0 = {0, ev(u0u1d)};
  f.zeta1 = {ev(b), -ev(u0 * b * u1d)};
  f.xi1_0 = {ev(u0 * bd * u0d), -ev(u0u1d * bd)};
  f.xi1_1 = {ev(u1 * bd * u1d), -ev(bd * u0u1d)};
  f.xi2_0 = {0.5 * (ev(bbd) + ev(u0 * bbd * u0d)), -ev(u0 * b * u1d * bd)};
  f.xi2_1 = {0.5 * (ev(bdb) + ev(u1 * bdb * u1d)), -ev(bd * u0 * b * u1d)};
  return f;
}

namespace {

int member_index(const model::ProbePureState& s, double tol) {
  const double m0 = std::abs(s.a0);
  if (std::abs(m0 - 1) <= tol) return 0;
  if (m0 <= tol) return 1;
  return -1;
}

bool near(const model::ProbePureState& s) {
  const double m0 = std::abs(s.a0);
  return m0 <= 1e-3 || std::abs(m0 - 1) <= 1e-3;
}

}  // namespace

LeadingOrderClass classify_leading_order(const model::ProbePureState& prep, const model::ProbePureState& meas,
                                         double tol) {
  model::check_state(prep, 1e-9);
  model::check_state(meas, 1e-9);
  LeadingOrderClass c;
  c.prep = prep;
  c.meas = meas;
  c.prep_k = member_index(prep, tol);
  c.meas_k = member_index(meas, tol);
  const bool pin = c.prep_k >= 0, min = c.meas_k >= 0;
  c.order = int(pin) + int(min);
  c.tag = pin && min ? CaseTag::both_in_basis
          : pin      ? CaseTag::prep_in_basis
          : min      ? CaseTag::meas_in_basis
                     : CaseTag::general;
  c.near_member = (!pin && near(prep)) || (!min && near(meas));
  c.equatorial_meas = c.order == 1 && std::abs(meas.sigma()) <= tol;
  return c;
}

double q_term(const model::ProbePureState& a, const model::ProbePureState& b) {
  return std::norm(a.a0 * b.a0) + std::norm(a.a1 * b.a1);
}

SplitFunction expansion_term(const ExpansionFunctions& f, const model::ProbePureState& a,
                             const model::ProbePureState& b, int k) {
  const double lam = f.lambda;
  const double sb = b.sigma();
  const double n0 = std::norm(a.a0), n1 = std::norm(a.a1);
  switch (k) {
    case 0:
      return (a.a0 * std::conj(a.a1) * std::conj(b.a0) * b.a1) * f.zeta0;
    case 1:
      return (1.0 / lam) * ((a.a0 * std::conj(a.a1) * sb) * f.zeta1 +
                            (std::conj(b.a0) * b.a1) * (cplx(n0) * f.xi1_0 + cplx(-n1) * f.xi1_1));
    case 2:
      return (-sb / (lam * lam)) * (cplx(n0) * f.xi2_0 + cplx(-n1) * f.xi2_1);
    default:
      throw std::invalid_argument("expansion_term: order must be 0, 1 or 2");
  }
}

int valid_order(const LeadingOrderClass& cls) { return cls.order; }

double perturbative_probability(const model::CouplingBlocks& blocks, const CMat& rho_s,
                                const model::ProbePureState& prep, const model::ProbePureState& meas,
                                double lambda, double tau, int order) {
  if (order < 0 || order > 2) throw std::invalid_argument("perturbative_probability: order must be 0, 1 or 2");
  const auto cls = classify_leading_order(prep, meas);
  const int top = std::min(order, valid_order(cls));
  const auto f = expansion_functions(blocks, rho_s, lambda, tau);
  SplitFunction x;
  for (int k = 0; k <= top; ++k) x += expansion_term(f, prep, meas, k);
  return q_term(prep, meas) + 2 * f.value(x).real();
}

SplitFunction leading_coefficient(const LeadingOrderClass& cls, const ExpansionFunctions& f) {
  return expansion_term(f, cls.prep, cls.meas, cls.order);
}

OscillationPrediction oscillation_model(const LeadingOrderClass& cls, const ExpansionFunctions& f) {
  const SplitFunction x = leading_coefficient(cls, f);
  OscillationPrediction p;
  p.order = cls.order;
  p.eta = 2 * x.constant.real();
  p.D = 2 * std::abs(x.oscillating);
  p.phi = p.D > 0 ? std::arg(x.oscillating) : 0.0;
  return p;
}

}  // namespace qprobe::perturbation
