#include "qprobe/dynamics.hpp"

#include "qprobe/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

namespace qprobe::dynamics {

double clamp_probability(double p) {
  if (!std::isfinite(p) || p < -kClampTolerance || p > 1 + kClampTolerance)
    throw numerical_error("probability " + std::to_string(p) + " outside [0, 1]");
  return std::clamp(p, 0.0, 1.0);
}

namespace {

void check_inputs(const CMat& v_ps, const CMat& rho_s) {
  if (v_ps.rows() != 2 * rho_s.rows() || v_ps.cols() != v_ps.rows())
    throw linalg::dimension_error("V_PS dimension " + std::to_string(v_ps.rows()) +
                                  " does not match 2 x dim(rho_S) = " + std::to_string(2 * rho_s.rows()));
  linalg::check_density(rho_s);
}

}  // namespace

JointPropagator::JointPropagator(const CMat& v_ps, const CMat& rho_s, const model::ProbeControl& control,
                                 const model::ProbePureState& prep, const model::ProbePureState& meas) {
  check_inputs(v_ps, rho_s);
  model::check_control(control);
  model::check_state(prep, 1e-9);
  model::check_state(meas, 1e-9);
  const auto basis = model::control_eigenbasis(control.theta, control.phi);
  const Eigen::Vector2cd alpha = model::to_vector(prep, basis);
  const Eigen::Vector2cd beta = model::to_vector(meas, basis);
  const Index d = rho_s.rows();

  const auto es = linalg::eig_hermitian(model::total_hamiltonian(v_ps, control));
  energies_ = es.values;
  const CMat rho0 = linalg::tensor_product(Eigen::Matrix2cd(alpha * alpha.adjoint()), rho_s);
  const CMat proj = linalg::tensor_product(Eigen::Matrix2cd(beta * beta.adjoint()), CMat::Identity(d, d));
  const CMat rt = es.vectors.adjoint() * rho0 * es.vectors;
  const CMat pt = es.vectors.adjoint() * proj * es.vectors;
  kernel_ = pt.transpose().cwiseProduct(rt);
}

double JointPropagator::probability(double tau) const {
  if (!std::isfinite(tau) || tau < 0) throw std::invalid_argument("tau must be finite and >= 0");
  CVec ph(energies_.size());
  for (Index k = 0; k < ph.size(); ++k) ph(k) = std::polar(1.0, -energies_(k) * tau);
  const cplx p = ph.transpose() * kernel_ * ph.conjugate();
  return clamp_probability(p.real());
}

double transition_probability(const CMat& v_ps, const CMat& rho_s, const model::ProbeControl& control,
                              const ExperimentPoint& point) {
  model::ProbeControl c = control;
  c.lambda = point.lambda;
  return JointPropagator(v_ps, rho_s, c, point.prep, point.meas).probability(point.tau);
}

long long sample_shots(double p, long long n, std::uint64_t seed) {
  if (!(p >= 0 && p <= 1)) throw std::invalid_argument("sample_shots: p outside [0, 1]");
  if (n < 0) throw std::invalid_argument("sample_shots: negative shot count");
  if (n == 0 || p == 0) return 0;
  if (p == 1) return n;
  std::mt19937_64 rng(seed);
  std::binomial_distribution<long long> dist(n, p);
  return dist(rng);
}

SweepResult run_sweep(const SweepModel& m, const std::vector<GridPoint>& grid, long long shots,
                      std::uint64_t seed, int jobs) {
  if (grid.empty()) throw std::invalid_argument("run_sweep: empty grid");
  if (shots < 0) throw std::invalid_argument("run_sweep: negative shot count");
  check_inputs(m.v_ps, m.rho_s);

  std::map<double, std::vector<std::size_t>> by_lambda;
  for (std::size_t i = 0; i < grid.size(); ++i) by_lambda[grid[i].lambda].push_back(i);
  std::vector<std::pair<double, std::vector<std::size_t>>> groups(by_lambda.begin(), by_lambda.end());

  SweepResult out;
  out.points.resize(grid.size());
  parallel_for(groups.size(), jobs, [&](std::size_t g) {
    const auto& [lambda, idx] = groups[g];
    const JointPropagator prop(m.v_ps, m.rho_s, {lambda, m.theta, m.phi}, m.prep, m.meas);
    for (std::size_t i : idx) {
      SweepPoint& pt = out.points[i];
      pt.lambda = grid[i].lambda;
      pt.tau = grid[i].tau;
      pt.p_exact = prop.probability(pt.tau);
      pt.shots = shots;
      if (shots > 0) {
        pt.count = sample_shots(pt.p_exact, shots, derive_seed(seed, i));
        const double ph = double(pt.count) / double(shots);
        pt.p_sampled = ph;
        pt.std_error = std::sqrt(ph * (1 - ph) / double(shots));
      }
    }
  });
  return out;
}

}  // namespace qprobe::dynamics
