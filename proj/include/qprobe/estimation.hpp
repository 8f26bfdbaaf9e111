#pragma once

#include "qprobe/linalg.hpp"

#include <span>
#include <string>
#include <vector>

namespace qprobe::estimation {

// p(lambda) - q = e(lambda) [eta + D cos(lambda tau + phi)],
// e(lambda) = ((lambda_ref - shift) / (lambda - shift))^order.
struct FitOptions {
  double q_offset = 0;
  double envelope_order = 0;
  double envelope_shift = 0;
  double lambda_ref = 0;  // 0: mean of the samples
  bool inverse_variance_weights = false;
};

struct OscillationFit {
  double tau = 0;
  double eta = 0;
  double D = 0;
  double phi = 0;  // (-pi, pi]
  double c = 0;    // cosine coefficient
  double s = 0;    // sine coefficient
  double residual_rms = 0;
  double lambda_ref = 0;
  double lambda_min = 0;
  double lambda_max = 0;
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();  // (eta, c, s)
  double stderr_eta = 0;
  double stderr_D = 0;
  double stderr_phi = 0;
  std::size_t samples = 0;

  cplx amplitude() const { return std::polar(D, phi); }
  // Model value at lambda (without q_offset).
  double model(double lambda, const FitOptions& opts = {}) const;
};

// Throws std::invalid_argument for malformed input and numerical_error("insufficient lambda coverage")
// when the samples do not span one period 2 pi / tau.
OscillationFit fit_oscillation(std::span<const double> lambdas, std::span<const double> p,
                               std::span<const double> weights, double tau, const FitOptions& opts = {});

struct ConvergenceReport {
  bool pass = false;
  std::vector<double> delta_D;
  std::vector<double> delta_eta;
  std::vector<double> tolerance_D;
  std::vector<double> tolerance_eta;
  std::string message;
};

// Successive windows (ascending lambda) agree on lambda^order-scaled D and eta within
// max(nsigma * combined stderr, rel_tol * max|D|).
ConvergenceReport convergence_check(const std::vector<OscillationFit>& windows, double order = 0,
                                    double rel_tol = 0.02, double nsigma = 3);

struct TauSeries {
  RVec tau;
  CVec values;           // D e^{i phi} times the series scale
  RVec eta;              // empty when built from raw values
  RVec phase_unwrapped;  // continuous arg(values)
  double max_phase_step = 0;
  bool phase_jump = false;  // some neighbour step exceeds pi/2
  std::string quantity;

  Index size() const { return tau.size(); }
  double dtau() const { return tau.size() > 1 ? (tau(tau.size() - 1) - tau(0)) / double(tau.size() - 1) : 0.0; }
};

// Throws std::invalid_argument on a non-uniform grid (1e-12 relative).
TauSeries make_tau_series(const RVec& tau, const CVec& values, std::string quantity = {});
TauSeries build_tau_series(const std::vector<OscillationFit>& fits, std::string quantity = {}, cplx scale = 1.0);

enum class Window { rectangular, hann };

struct SpectrumEstimate {
  RVec omega;   // signed, ascending
  CVec weights;
  double resolution = 0;  // 2 pi / (N dtau), N unpadded
  Window window = Window::rectangular;
  double omega_scale = 1;  // omega = omega_scale * angular frequency conjugate to tau
  RVec tau;                // source grid
  CVec values;             // source series
  CVec samples;            // windowed series divided by the window sum
};

// Multiplies omega and resolution by `factor` (e.g. hbar to express frequencies as energies).
void rescale_omega(SpectrumEstimate& spec, double factor);

// Transform at an arbitrary omega (same units as spec.omega).
cplx evaluate_spectrum(const SpectrumEstimate& spec, double omega);

// weights(w) = sum_n h_n c_n e^{-i w tau_n} / sum_n h_n, on a grid refined by pad_factor.
SpectrumEstimate fourier_spectrum(const TauSeries& series, Window window = Window::rectangular, int pad_factor = 1);

struct Peak {
  Index bin = 0;
  double omega = 0;
  cplx weight = 0;
  double magnitude = 0;
};

// Local maxima of |weights| above max(factor * median, rel_floor * max) that also clear twice the
// window sidelobe envelope of every stronger peak. Peak positions are refined by parabolic
// interpolation and weights re-evaluated there.
std::vector<Peak> find_peaks(const SpectrumEstimate& spec, double factor = 5, double rel_floor = 1e-6);

struct LineFitOptions {
  int max_iterations = 200;
  double max_shift_bins = 3;    // lines moving further are dropped
  double min_separation_bins = 0.25;  // closer pairs are merged before refinement
  int rounds = 4;               // residual-spectrum passes that may add lines
  double residual_floor = 1e-3;  // relative to the strongest line, for lines added from residuals
};

// Joint least-squares fit of c(tau) = sum_j a_j e^{i w_j tau} seeded by `peaks` (Levenberg-Marquardt
// over frequencies and complex amplitudes). Lines found in the residual spectrum are added and the fit
// repeated. Returns peaks with refined omega and weight = a_j.
std::vector<Peak> refine_lines(const SpectrumEstimate& spec, const std::vector<Peak>& peaks,
                               const LineFitOptions& opts = {});

// Full width at half maximum of the peak at `bin` by linear interpolation; infinity if unresolved.
double fwhm(const SpectrumEstimate& spec, Index bin);

struct LevelLadder {
  std::vector<double> levels;  // ascending, lowest = 0
  bool complete = false;       // every input gap is a level difference
  bool mirror_ambiguous = false;
  std::vector<std::string> diagnostics;
};

LevelLadder assemble_levels_from_triplets(std::vector<double> peak_frequencies, double tol);

struct StateDiagonal {
  RVec diag0;  // <n_0|rho|n_0>
  RVec diag1;  // <n_1|rho|n_1>
  bool no_coherence = false;
  bool ambiguous = false;
  std::vector<std::string> diagnostics;
};

// Groups zeta0-series peaks at E_m^0 - E_n^1 by level; sums give the diagonals of rho in each eigenbasis.
StateDiagonal extract_state_diagonal(const std::vector<Peak>& peaks, const RVec& e0, const RVec& e1, double tol);

double mean_energy(const RVec& diag0, const RVec& diag1, const RVec& e0, const RVec& e1);

// True when a same-operator (row 5 type) spectrum has weight away from zero frequency.
bool coherence_witness(const std::vector<Peak>& peaks, double tol);

}  // namespace qprobe::estimation
