#include "qprobe/vibronic.hpp"

#include "qprobe/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

namespace qprobe::vibronic {

std::vector<std::string> check_model(const VibronicModel& m) {
  const Index k = m.omega.size();
  if (k == 0) throw std::invalid_argument("vibronic model: need at least one mode");
  if (m.gamma_d.size() != k || m.gamma_a.size() != k) throw std::invalid_argument("vibronic model: coupling lengths");
  if (!m.omega.allFinite() || !m.gamma_d.allFinite() || !m.gamma_a.allFinite())
    throw std::invalid_argument("vibronic model: non-finite entry");
  if ((m.omega.array() <= 0).any()) throw std::invalid_argument("vibronic model: mode frequencies must be > 0");
  if (!(m.V > 0)) throw std::invalid_argument("vibronic model: V must be > 0");
  if (!(m.T >= 0) || !std::isfinite(m.T)) throw std::invalid_argument("vibronic model: T must be >= 0");
  if (!std::isfinite(m.lambda)) throw std::invalid_argument("vibronic model: lambda must be finite");
  std::vector<std::string> w;
  if (std::abs(m.lambda) < 10 * m.V) w.push_back("lambda is not much larger than V");
  return w;
}

PolaronModel polaron(const VibronicModel& m) {
  check_model(m);
  PolaronModel p;
  p.u_d = m.gamma_d.cwiseQuotient(m.omega);
  p.u_a = m.gamma_a.cwiseQuotient(m.omega);
  p.reorganization = (m.omega.array() * (p.u_d.array().square() - p.u_a.array().square())).sum();
  return p;
}

double thermal_factor(double omega, double T) {
  if (T <= 0) return 1.0;
  return 1.0 / std::tanh(omega / (2 * kBoltzmann * T));
}

double f_tau(const VibronicModel& m, double tau) {
  const RVec xi = polaron(m).xi();
  double f = 0;
  for (Index k = 0; k < xi.size(); ++k)
    f -= xi(k) * xi(k) * thermal_factor(m.omega(k), m.T) * (1 - std::cos(m.omega(k) * tau / kHbar));
  return f;
}

double phase_tau(const VibronicModel& m, double tau) {
  const RVec xi = polaron(m).xi();
  double s = 0;
  for (Index k = 0; k < xi.size(); ++k) s += xi(k) * xi(k) * std::sin(m.omega(k) * tau / kHbar);
  return s;
}

double analytic_probability(const VibronicModel& m, double tau, Formula formula) {
  if (!std::isfinite(tau) || tau < 0) throw std::invalid_argument("analytic_probability: tau must be >= 0");
  const double er = polaron(m).reorganization;
  const double ef = std::exp(f_tau(m, tau));
  if (formula == Formula::uncorrected) {
    const double v2 = m.V * m.V / (m.lambda * m.lambda);
    return v2 * (2 - std::cos((m.lambda - er) * tau / kHbar) * ef);
  }
  const double lp = m.lambda - er;
  return 2 * m.V * m.V / (lp * lp) * (1 - ef * std::cos(lp * tau / kHbar - phase_tau(m, tau)));
}

double tau_max(const VibronicModel& m, double margin) { return std::abs(m.lambda) / (margin * m.V * m.V) * kHbar; }

cplx displacement_matrix_element(int m, int n, cplx xi) {
  if (m < 0 || n < 0) throw std::invalid_argument("displacement_matrix_element: negative index");
  const double x = std::norm(xi);
  const double pre = std::exp(-x / 2);
  if (m >= n) {
    const double ratio = std::exp(0.5 * (std::lgamma(n + 1.0) - std::lgamma(m + 1.0)));
    return ratio * std::pow(xi, m - n) * pre * std::assoc_laguerre(unsigned(n), unsigned(m - n), x);
  }
  const double ratio = std::exp(0.5 * (std::lgamma(m + 1.0) - std::lgamma(n + 1.0)));
  return ratio * std::pow(-std::conj(xi), n - m) * pre * std::assoc_laguerre(unsigned(m), unsigned(n - m), x);
}

double displacement_bound(const VibronicModel& m, int n_max) {
  if (n_max < 0) throw std::invalid_argument("displacement_bound: n_max must be >= 0");
  const RVec xi = polaron(m).xi();
  double prod = m.V;
  for (Index k = 0; k < xi.size(); ++k) {
    double best = 0;
    for (int a = 0; a <= n_max; ++a)
      for (int b = 0; b <= n_max; ++b) best = std::max(best, std::abs(displacement_matrix_element(a, b, xi(k))));
    prod *= best;
  }
  return prod;
}

FockModel fock_model(const VibronicModel& m, int cutoff) {
  if (cutoff < 1) throw std::invalid_argument("fock_model: cutoff must be >= 1");
  const PolaronModel pol = polaron(m);
  const RVec xi = pol.xi();
  const Index levels = cutoff + 1;
  CMat a = CMat::Zero(1, 1), b = CMat::Identity(1, 1) * m.V, rho = CMat::Identity(1, 1);
  for (Index k = 0; k < xi.size(); ++k) {
    CMat num = CMat::Zero(levels, levels), disp(levels, levels), th = CMat::Zero(levels, levels);
    double z = 0;
    for (Index n = 0; n < levels; ++n) {
      num(n, n) = double(n);
      const double w = m.T > 0 ? std::exp(-m.omega(k) * double(n) / (kBoltzmann * m.T)) : (n == 0 ? 1.0 : 0.0);
      th(n, n) = w;
      z += w;
      for (Index j = 0; j < levels; ++j) disp(n, j) = displacement_matrix_element(int(n), int(j), xi(k));
    }
    th /= z;
    const CMat id = CMat::Identity(levels, levels);
    a = linalg::tensor_product(a, id) + linalg::tensor_product(CMat(CMat::Identity(a.rows(), a.rows())), CMat(m.omega(k) * num));
    b = linalg::tensor_product(b, disp);
    rho = linalg::tensor_product(rho, th);
  }
  const HermitianOperator h(a);
  return {{h, h, b}, rho, m.lambda - pol.reorganization, cutoff};
}

std::vector<double> fock_probability(const VibronicModel& m, const std::vector<double>& taus, int cutoff) {
  const FockModel fm = fock_model(m, cutoff);
  const CMat v_ps = model::assemble_coupling(fm.blocks, model::control_eigenbasis(0, 0));
  const dynamics::JointPropagator prop(v_ps, fm.rho, {fm.lambda_eff, 0, 0}, model::basis_state(0),
                                       model::basis_state(1));
  std::vector<double> out;
  out.reserve(taus.size());
  for (double t : taus) out.push_back(prop.probability(t / kHbar));
  return out;
}

SpectralEstimate spectral_density(const std::vector<double>& taus, const RVec& f, std::optional<double> T) {
  const Index n = Index(taus.size());
  if (f.size() != n) throw std::invalid_argument("spectral_density: length mismatch");
  RVec t(n);
  for (Index k = 0; k < n; ++k) t(k) = taus[std::size_t(k)] / kHbar;
  const auto series = estimation::make_tau_series(t, f.cast<cplx>(), "f");
  const auto spec = estimation::fourier_spectrum(series);
  SpectralEstimate out;
  out.resolution = spec.resolution;
  std::vector<double> om, ft;
  for (Index i = 0; i < spec.omega.size(); ++i) {
    // both signed bins carry half the cosine amplitude; the top bin at -pi/dtau has no partner
    if (spec.omega(i) <= spec.resolution / 2 || spec.omega(i) >= -spec.omega(0) - spec.resolution / 2) continue;
    om.push_back(spec.omega(i));
    ft.push_back(2 * spec.weights(i).real());
  }
  out.omega = Eigen::Map<RVec>(om.data(), Index(om.size()));
  out.f_tilde = Eigen::Map<RVec>(ft.data(), Index(ft.size()));
  if (T) {
    out.J.resize(out.omega.size());
    for (Index i = 0; i < out.omega.size(); ++i)
      out.J(i) = out.omega(i) * out.omega(i) * out.f_tilde(i) / thermal_factor(out.omega(i), *T);
  }
  return out;
}

double phase_from_spectrum(const SpectralEstimate& s, double T, double tau) {
  double phi = 0;
  for (Index i = 0; i < s.omega.size(); ++i)
    phi += s.f_tilde(i) / thermal_factor(s.omega(i), T) * std::sin(s.omega(i) * tau / kHbar);
  return phi;
}

Thermometry thermometry(const SpectralEstimate& s, const std::vector<double>& omega_known,
                        const std::vector<double>& j_known) {
  Thermometry out;
  if (omega_known.empty() || omega_known.size() != j_known.size()) {
    out.message = "known spectral density must list matching frequencies and weights";
    return out;
  }
  const auto it = std::max_element(j_known.begin(), j_known.end());
  const std::size_t dom = std::size_t(it - j_known.begin());
  const double om = omega_known[dom], j = *it;
  out.omega = om;
  if (!(j > 0) || s.omega.size() == 0) {
    out.message = "no dominant mode";
    return out;
  }
  Index bin = 0;
  (s.omega.array() - om).abs().minCoeff(&bin);
  if (std::abs(s.omega(bin) - om) > s.resolution) {
    out.message = "dominant mode outside the resolved band";
    return out;
  }
  const double a = s.f_tilde(bin);
  const double left = bin > 0 ? s.f_tilde(bin - 1) : 0.0;
  const double right = bin + 1 < s.f_tilde.size() ? s.f_tilde(bin + 1) : 0.0;
  if (!(a > 0) || a < left || a < right) {
    out.message = "no dominant peak at the known mode";
    return out;
  }
  const double target = a * om * om / j;
  auto g = [&](double t) { return thermal_factor(om, t) - target; };
  double lo = 0.1, hi = 1e4;
  if (g(lo) > 0 || g(hi) < 0) {
    out.message = "temperature outside (0.1 K, 1e4 K)";
    return out;
  }
  for (int it2 = 0; it2 < 200 && hi - lo > 1e-12 * hi; ++it2) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) > 0 ? hi : lo) = mid;
  }
  out.ok = true;
  out.T = 0.5 * (lo + hi);
  out.message = "ok";
  return out;
}

Reconstruction reconstruct_f_and_Er(const std::vector<double>& lambdas, const std::vector<double>& taus,
                                    const Eigen::MatrixXd& p, double V, const ReconstructOptions& opts) {
  const Index nl = Index(lambdas.size()), nt = Index(taus.size());
  if (p.rows() != nl || p.cols() != nt) throw std::invalid_argument("reconstruct: p must be lambdas x taus");
  if (!(V > 0)) throw std::invalid_argument("reconstruct: V must be > 0");
  if (nt < 2) throw std::invalid_argument("reconstruct: need at least 2 tau values");

  Reconstruction r;
  r.tau = Eigen::Map<const RVec>(taus.data(), nt);
  r.lambda_ref = std::accumulate(lambdas.begin(), lambdas.end(), 0.0) / double(nl);
  std::vector<double> lam_scaled(lambdas.begin(), lambdas.end());
  r.D.resize(nt);
  r.phi.resize(nt);
  r.f.resize(nt);
  r.f_stderr.resize(nt);
  r.resolved.assign(std::size_t(nt), true);
  RVec sd(nt);

  const bool use_phi = opts.T.has_value() && nt >= 8;
  if (opts.T && !use_phi) r.notes.push_back("fewer than 8 tau values; phase correction disabled");
  if (!opts.T) r.notes.push_back("temperature unknown; phase correction Phi(tau) omitted");

  double er = 0;
  RVec phi_corr = RVec::Zero(nt);
  for (int it = 0; it < opts.max_iterations; ++it) {
    estimation::FitOptions fo;
    fo.envelope_order = 2;
    fo.envelope_shift = er;
    fo.lambda_ref = r.lambda_ref;
    CVec amp(nt);
    for (Index k = 0; k < nt; ++k) {
      std::vector<double> col(p.col(k).data(), p.col(k).data() + nl);
      const auto fit = estimation::fit_oscillation(lam_scaled, col, {}, taus[std::size_t(k)] / kHbar, fo);
      r.D(k) = fit.D;
      sd(k) = fit.stderr_D;
      amp(k) = std::polar(1.0, fit.phi);
      r.resolved[std::size_t(k)] = fit.D > opts.noise_floor_sigma * fit.stderr_D;
    }
    const double lp = r.lambda_ref - er;
    for (Index k = 0; k < nt; ++k) {
      r.f(k) = std::log(std::max(r.D(k), 1e-300) * lp * lp / (2 * V * V));
      r.f_stderr(k) = r.D(k) > 0 ? sd(k) / r.D(k) : std::numeric_limits<double>::infinity();
    }
    if (use_phi) {
      const auto spec = spectral_density(taus, r.f, opts.T);
      for (Index k = 0; k < nt; ++k) phi_corr(k) = phase_from_spectrum(spec, *opts.T, taus[std::size_t(k)]);
    }
    const auto series = estimation::make_tau_series(r.tau, amp, "phase");
    r.phi = series.phase_unwrapped;

    // phi = pi - E_r tau - Phi(tau): regress phi + Phi on {1, tau}
    Eigen::MatrixXd a(nt, 2);
    RVec y(nt), w(nt);
    for (Index k = 0; k < nt; ++k) {
      a(k, 0) = 1;
      a(k, 1) = taus[std::size_t(k)] / kHbar;
      y(k) = r.phi(k) + phi_corr(k);
      w(k) = r.resolved[std::size_t(k)] ? 1.0 : 0.0;
    }
    if (w.sum() < 3) throw numerical_error("reconstruct: fewer than 3 tau points above the noise floor");
    const Eigen::MatrixXd aw = w.asDiagonal() * a;
    const RVec x = (aw.transpose() * a).ldlt().solve(aw.transpose() * y);
    const RVec res = w.asDiagonal() * (y - a * x);
    const double dof = std::max(1.0, w.sum() - 2);
    const Eigen::Matrix2d cov = (aw.transpose() * a).inverse() * (res.squaredNorm() / dof);
    const double er_new = -x(1);
    r.reorganization_stderr = std::sqrt(std::max(0.0, cov(1, 1)));
    r.iterations = it + 1;
    const bool done = std::abs(er_new - er) <= 1e-14 * std::max(1.0, std::abs(er_new));
    er = er_new;
    if (done) break;
  }
  r.reorganization = er;
  const double lp = r.lambda_ref - er;
  for (Index k = 0; k < nt; ++k) r.f(k) = std::log(std::max(r.D(k), 1e-300) * lp * lp / (2 * V * V));
  for (Index k = 0; k < nt; ++k)
    if (!r.resolved[std::size_t(k)]) {
      std::ostringstream m;
      m << "f unrecoverable at tau=" << taus[std::size_t(k)] << " (D below noise floor)";
      r.notes.push_back(m.str());
    }
  return r;
}

}  // namespace qprobe::vibronic
