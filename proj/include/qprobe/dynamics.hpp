#pragma once

#include "qprobe/model.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace qprobe::dynamics {

inline constexpr double kClampTolerance = 1e-10;

struct ExperimentPoint {
  double lambda = 0;
  double tau = 0;
  model::ProbePureState prep;
  model::ProbePureState meas;
  long long shots = 0;  // 0 = exact probability
};

// Clamps p into [0, 1] when within tolerance; larger violations throw numerical_error.
double clamp_probability(double p);

// p = tr[(|beta><beta| ⊗ I) U (|alpha><alpha| ⊗ rho_S) U†] with U = exp(-i H_tot tau).
double transition_probability(const CMat& v_ps, const CMat& rho_s, const model::ProbeControl& control,
                              const ExperimentPoint& point);

// Transition probability at fixed lambda for many tau; one diagonalization of H_tot.
class JointPropagator {
 public:
  JointPropagator(const CMat& v_ps, const CMat& rho_s, const model::ProbeControl& control,
                  const model::ProbePureState& prep, const model::ProbePureState& meas);

  double probability(double tau) const;
  const RVec& energies() const { return energies_; }

 private:
  RVec energies_;
  CMat kernel_;  // K_ab = P~_ba rho~_ab in the H_tot eigenbasis
};

long long sample_shots(double p, long long n, std::uint64_t seed);

struct GridPoint {
  double lambda = 0;
  double tau = 0;
};

struct SweepModel {
  CMat v_ps;
  CMat rho_s;
  double theta = 0;
  double phi = 0;
  model::ProbePureState prep;
  model::ProbePureState meas;
};

struct SweepPoint {
  double lambda = 0;
  double tau = 0;
  double p_exact = 0;
  std::optional<double> p_sampled;
  long long shots = 0;
  long long count = 0;
  double std_error = 0;
};

struct SweepResult {
  std::vector<SweepPoint> points;
};

SweepResult run_sweep(const SweepModel& model, const std::vector<GridPoint>& grid, long long shots,
                      std::uint64_t seed, int jobs = 1);

// Divided difference of z -> exp(-i z tau) over the nodes (order = nodes.size() - 1).
cplx exp_divided_difference(std::span<const double> nodes, double tau);

// x-th order Dyson term of exp(-i H_tot tau) with H_0 = block-diagonal part and W = B-blocks,
// in control-frame coordinates (probe index outermost, pi0 first).
CMat dyson_propagator_term(const model::CouplingBlocks& blocks, double lambda, double tau, int x);

// (x, y) contribution tr[(|beta><beta|⊗I) U^[x] (|alpha><alpha|⊗rho_S) U^[y]†]; summing all
// (x, y) gives the exact transition probability.
cplx dyson_term(const model::CouplingBlocks& blocks, const CMat& rho_s, const model::ProbePureState& prep,
                const model::ProbePureState& meas, double lambda, double tau, int x, int y, int cap = 4);

// Sum of Re dyson_term over x + y <= r.
double dyson_probability(const model::CouplingBlocks& blocks, const CMat& rho_s,
                         const model::ProbePureState& prep, const model::ProbePureState& meas, double lambda,
                         double tau, int r, int cap = 4);

}  // namespace qprobe::dynamics
