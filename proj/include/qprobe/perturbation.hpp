#pragma once

#include "qprobe/model.hpp"

#include <string>
#include <vector>

namespace qprobe::perturbation {

// f(lambda) = constant + e^{i lambda tau} oscillating.
struct SplitFunction {
  cplx constant = 0;
  cplx oscillating = 0;

  cplx at(double lambda, double tau) const { return constant + std::polar(1.0, lambda * tau) * oscillating; }
  SplitFunction& operator+=(const SplitFunction& o) {
    constant += o.constant;
    oscillating += o.oscillating;
    return *this;
  }
  friend SplitFunction operator*(cplx c, const SplitFunction& f) { return {c * f.constant, c * f.oscillating}; }
  friend SplitFunction operator+(SplitFunction a, const SplitFunction& b) { return a += b; }
};

struct ExpansionFunctions {
  SplitFunction zeta0;
  SplitFunction zeta1;
  SplitFunction xi1_0;
  SplitFunction xi1_1;
  SplitFunction xi2_0;
  SplitFunction xi2_1;
  double tau = 0;
  double lambda = 0;

  cplx value(const SplitFunction& f) const { return f.at(lambda, tau); }
};

ExpansionFunctions expansion_functions(const model::CouplingBlocks& blocks, const CMat& rho_s, double lambda,
                                       double tau);

enum class CaseTag { general, prep_in_basis, meas_in_basis, both_in_basis };

struct LeadingOrderClass {
  int order = 0;
  CaseTag tag = CaseTag::general;
  int prep_k = -1;  // control-basis index when the preparation is a control eigenstate
  int meas_k = -1;
  bool near_member = false;       // an overlap is within 1e-3 of 0 or 1 without being a member
  bool equatorial_meas = false;   // <sigma>_beta = 0 in an order-1 class
  model::ProbePureState prep;
  model::ProbePureState meas;
};

LeadingOrderClass classify_leading_order(const model::ProbePureState& prep, const model::ProbePureState& meas,
                                         double tol = 1e-9);

// q_{beta:alpha} = |a0 b0|^2 + |a1 b1|^2.
double q_term(const model::ProbePureState& prep, const model::ProbePureState& meas);

// X_k of the master expansion (order k in 1/lambda) as lambda-split functions at functions.lambda.
SplitFunction expansion_term(const ExpansionFunctions& f, const model::ProbePureState& prep,
                             const model::ProbePureState& meas, int k);

// Highest order whose truncation is complete for the class (0 general, 1 mixed, 2 both in basis).
int valid_order(const LeadingOrderClass& cls);

// q + 2 Re sum_{k <= min(order, valid_order)} X_k.
double perturbative_probability(const model::CouplingBlocks& blocks, const CMat& rho_s,
                                const model::ProbePureState& prep, const model::ProbePureState& meas,
                                double lambda, double tau, int order);

// Leading coefficient X of the class at functions.lambda.
SplitFunction leading_coefficient(const LeadingOrderClass& cls, const ExpansionFunctions& f);

struct OscillationPrediction {
  double eta = 0;
  double D = 0;
  double phi = 0;
  int order = 0;
};

// 2 Re X = eta + D cos(lambda tau + phi) for the leading term, evaluated at functions.lambda.
OscillationPrediction oscillation_model(const LeadingOrderClass& cls, const ExpansionFunctions& f);

// kappa_jk = 1/|E_j - E_k|, or tau for degenerate pairs.
Eigen::MatrixXd constraint_kernel(const RVec& energies, double tau, double degeneracy_tol = 1e-12);

struct ValidityOptions {
  double margin = 10;
  double resonance_width = -1;  // < 0: 1e-3 * lambda
  int reach = 3;
  double support_cutoff = 1e-12;
};

struct ConstraintCheck {
  std::string name;
  double lhs = 0;
  double rhs = 0;
  double ratio = 0;
  bool pass = false;
};

struct Resonance {
  Index j = 0;  // A0 eigenstate
  Index k = 0;  // A1 eigenstate
  double gap = 0;       // |E_j^0 - E_k^1|
  double detuning = 0;  // |lambda - gap|
};

struct ValidityReport {
  std::vector<ConstraintCheck> constraints;
  std::vector<Resonance> resonances;
  double matrix_element_bound = 0;
  double lambda = 0;
  double tau = 0;
  int order = 0;
  double margin = 10;
  bool pass = false;
};

ValidityReport validity_report(const model::CouplingBlocks& blocks, const CMat& rho_s, double lambda, double tau,
                               int leading_order, const ValidityOptions& opts = {});

}  // namespace qprobe::perturbation
