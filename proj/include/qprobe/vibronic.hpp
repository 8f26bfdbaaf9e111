#pragma once

#include "qprobe/estimation.hpp"
#include "qprobe/model.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace qprobe::vibronic {

// meV, ps, kelvin.
inline constexpr double kHbar = 0.6582119569;   // meV ps
inline constexpr double kBoltzmann = 0.08617333;  // meV / K

struct VibronicModel {
  RVec omega;    // mode frequencies
  RVec gamma_d;  // donor couplings
  RVec gamma_a;  // acceptor couplings
  double V = 1;
  double lambda = 100;
  double T = 300;
};

// Throws on invalid input; returns warnings (e.g. lambda not much larger than V).
std::vector<std::string> check_model(const VibronicModel& m);

struct PolaronModel {
  RVec u_d;
  RVec u_a;
  double reorganization = 0;  // E_r = sum omega (u_d^2 - u_a^2)

  RVec xi() const { return u_d - u_a; }
};

PolaronModel polaron(const VibronicModel& m);

// coth(omega / 2 k_B T); 1 at T = 0.
double thermal_factor(double omega, double T);

// f(tau) = -sum (u_d - u_a)^2 coth(omega/2kT) (1 - cos omega tau).
double f_tau(const VibronicModel& m, double tau);

// Phi(tau) = sum (u_d - u_a)^2 sin(omega tau).
double phase_tau(const VibronicModel& m, double tau);

enum class Formula {
  uncorrected,  // (V^2/lambda^2)[2 - cos((lambda - E_r) tau) e^f]
  corrected,  // (2V^2/lambda'^2)[1 - e^f cos(lambda' tau - Phi)], lambda' = lambda - E_r
};

double analytic_probability(const VibronicModel& m, double tau, Formula formula = Formula::corrected);

// tau_max = lambda / (margin V^2) in ps.
double tau_max(const VibronicModel& m, double margin = 10);

// <m|D(xi)|n>.
cplx displacement_matrix_element(int m, int n, cplx xi);

// V prod_k max_{m,n <= n_max} |<m|D(xi_k)|n>|, the matrix-element scale lambda must exceed.
double displacement_bound(const VibronicModel& m, int n_max);

// Truncated-Fock polaron-frame model: A0 = A1 = sum omega b+b, B = V prod D(xi_k), thermal rho.
struct FockModel {
  model::CouplingBlocks blocks;
  CMat rho;
  double lambda_eff = 0;
  int cutoff = 0;
};

FockModel fock_model(const VibronicModel& m, int cutoff);

// Exact p_{a:d}(tau) of the truncated model for each tau (ps).
std::vector<double> fock_probability(const VibronicModel& m, const std::vector<double>& taus, int cutoff);

struct Reconstruction {
  RVec tau;     // ps
  RVec D;       // at lambda_ref
  RVec phi;     // unwrapped
  RVec f;
  RVec f_stderr;
  std::vector<bool> resolved;  // D above its noise floor
  double reorganization = 0;
  double reorganization_stderr = 0;
  double lambda_ref = 0;
  int iterations = 0;
  std::vector<std::string> notes;
};

struct ReconstructOptions {
  std::optional<double> T;  // enables the Phi(tau) phase correction
  int max_iterations = 60;
  double noise_floor_sigma = 3;
};

// p(lambda_i, tau_k) in column k; lambdas in meV, taus (uniform) in ps.
Reconstruction reconstruct_f_and_Er(const std::vector<double>& lambdas, const std::vector<double>& taus,
                                    const Eigen::MatrixXd& p, double V, const ReconstructOptions& opts = {});

struct SpectralEstimate {
  RVec omega;    // meV, positive bins
  RVec f_tilde;  // cosine amplitude of f at each bin
  RVec J;        // empty unless T was given
  double resolution = 0;
};

// Cosine transform of f(tau) on a uniform grid; with T known, J = omega^2 f~ / coth.
SpectralEstimate spectral_density(const std::vector<double>& taus, const RVec& f, std::optional<double> T);

struct Thermometry {
  bool ok = false;
  double T = 0;
  double omega = 0;  // dominant mode used
  std::string message;
};

// T from f~ at the dominant known mode by bisection on coth(omega/2kT) = f~ omega^2 / J in (0.1 K, 1e4 K).
Thermometry thermometry(const SpectralEstimate& s, const std::vector<double>& omega_known,
                        const std::vector<double>& j_known);

// Phi(tau) predicted from a cosine spectrum and temperature.
double phase_from_spectrum(const SpectralEstimate& s, double T, double tau);

}  // namespace qprobe::vibronic
