#pragma once

#include "qprobe/estimation.hpp"
#include "qprobe/perturbation.hpp"

#include <cstdint>
#include <vector>

namespace qprobe::spin {

// peV, ns, tesla, nm.
inline constexpr double kHbar = 6.582119569e5;            // peV ns
inline constexpr double kNuclearMagneton = 31524.51258;   // peV / T
inline constexpr double kPeVPerMeV = 1e9;
// mu0/4pi * mu1 mu2 / r^3 in peV for moments in peV/T and r in nm.
inline constexpr double kDipolarPrefactor = 1e20 * 1.602176634e-31;

using Vec3 = Eigen::Vector3d;

struct SpinGeometry {
  std::vector<Vec3> positions;     // nm
  std::vector<double> moments;     // units of mu_N
  Vec3 b0 = Vec3(0, 0, 1e-3);      // T
  Vec3 probe_position = Vec3(5, 0, 0);  // nm
  Vec3 probe_axis = Vec3(1, 0, 0);
  double probe_moment = 0.3;       // meV / T
};

void check_geometry(const SpinGeometry& g);

// Zeeman plus dipole-dipole Hamiltonian in peV (spin 0 is the outermost tensor factor).
HermitianOperator build_spin_hamiltonian(const SpinGeometry& g);

// System operator multiplying sigma_x in the probe coupling, in peV.
CMat build_probe_operator(const SpinGeometry& g);

// sigma_x ⊗ build_probe_operator(g).
CMat build_probe_coupling(const SpinGeometry& g);

// Spins uniform in a sphere with a minimum pair separation (rejection sampling).
std::vector<Vec3> random_spin_positions(int n, double radius, double min_separation, std::uint64_t seed);
// Uniform direction, radius uniform in [r_min, r_max].
Vec3 random_probe_position(double r_min, double r_max, std::uint64_t seed);

struct NmrRunConfig {
  double budget = 2e6;                 // ns, longest budget
  std::vector<double> budgets = {8e4, 1.6e5, 2e6};
  double tau_step = 100;               // ns
  int lambda_count = 100;
  long long shots = 1000000;           // 0: exact probabilities
  std::uint64_t seed = 1;
  double lambda_margin = 1e3;          // times the largest reachable |<j|B|k>|
  double gap_margin = 20;              // times the largest coupled gap
  int pad_factor = 8;
  estimation::Window window = estimation::Window::rectangular;
  int jobs = 1;
};

void check_config(const NmrRunConfig& cfg);

struct Line {
  double omega = 0;  // peV
  cplx weight = 0;   // peV^2
};

struct BudgetSpectrum {
  double budget = 0;
  estimation::SpectrumEstimate spectrum;  // omega in peV, weights in peV^2
  std::vector<estimation::Peak> peaks;
};

struct NmrResult {
  double lambda0 = 0;             // peV
  std::vector<double> lambdas;    // peV
  estimation::TauSeries measured;  // correlation series in peV^2 (tau in ns)
  estimation::TauSeries exact;
  std::vector<BudgetSpectrum> reconstructed;
  std::vector<BudgetSpectrum> perfect;
  std::vector<Line> reference;
  perturbation::ValidityReport validity;
  std::vector<std::string> notes;
};

// Largest |<j|B|k>| between eigenstates of the spin Hamiltonian (peV) and the largest gap among
// pairs coupled above 1e-3 of that element.
struct CouplingScale {
  double max_element = 0;
  double max_gap = 0;
};
CouplingScale coupling_scale(const SpinGeometry& g);

// lambda0 = max(lambda_margin * max element, gap_margin * max gap), shifted off resonances.
double auto_lambda(const SpinGeometry& g, const NmrRunConfig& cfg);

// Direct diagonalization lines E_n - E_m with weights <n|B|m><m|B rho|n>, rho = I/d.
std::vector<Line> reference_lines(const SpinGeometry& g, double rel_cutoff = 1e-12);

NmrResult run_nmr_experiment(const SpinGeometry& g, const NmrRunConfig& cfg);

}  // namespace qprobe::spin
