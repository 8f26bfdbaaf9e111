#include "qprobe/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

namespace qprobe::estimation {

namespace {

double envelope(double lambda, const FitOptions& o, double ref) {
  if (o.envelope_order == 0) return 1.0;
  const double num = ref - o.envelope_shift, den = lambda - o.envelope_shift;
  if (den <= 0 || num <= 0) throw std::invalid_argument("fit_oscillation: envelope shift above lambda");
  return std::pow(num / den, o.envelope_order);
}

}  // namespace

double OscillationFit::model(double lambda, const FitOptions& opts) const {
  const double e = envelope(lambda, opts, lambda_ref);
  return e * (eta + c * std::cos(lambda * tau) + s * std::sin(lambda * tau));
}

OscillationFit fit_oscillation(std::span<const double> lambdas, std::span<const double> p,
                               std::span<const double> weights, double tau, const FitOptions& opts) {
  const std::size_t n = lambdas.size();
  if (p.size() != n) throw std::invalid_argument("fit_oscillation: lambda and p lengths differ");
  if (!weights.empty() && weights.size() != n) throw std::invalid_argument("fit_oscillation: weight length");
  if (n < 5) throw std::invalid_argument("fit_oscillation: need at least 5 samples");
  if (!std::isfinite(tau) || tau <= 0) throw numerical_error("fit_oscillation: insufficient lambda coverage (tau <= 0)");

  const auto [mn, mx] = std::minmax_element(lambdas.begin(), lambdas.end());
  const double span = (*mx - *mn) * double(n) / double(n - 1);
  if (span * tau < 2 * std::numbers::pi * (1 - 1e-9))
    throw numerical_error("fit_oscillation: insufficient lambda coverage (span below one period)");

  OscillationFit f;
  f.tau = tau;
  f.samples = n;
  f.lambda_min = *mn;
  f.lambda_max = *mx;
  f.lambda_ref = opts.lambda_ref > 0 ? opts.lambda_ref
                                     : std::accumulate(lambdas.begin(), lambdas.end(), 0.0) / double(n);

  Eigen::MatrixXd a(n, 3);
  Eigen::VectorXd y(n), w(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double e = envelope(lambdas[i], opts, f.lambda_ref);
    a(i, 0) = e;
    a(i, 1) = e * std::cos(lambdas[i] * tau);
    a(i, 2) = e * std::sin(lambdas[i] * tau);
    y(i) = p[i] - opts.q_offset;
    w(i) = weights.empty() ? 1.0 : weights[i];
    if (!(w(i) > 0) || !std::isfinite(w(i)) || !std::isfinite(y(i)))
      throw std::invalid_argument("fit_oscillation: weights must be positive and data finite");
  }
  const Eigen::VectorXd sw = w.cwiseSqrt();
  const Eigen::MatrixXd aw = sw.asDiagonal() * a;
  const Eigen::VectorXd yw = sw.cwiseProduct(y);

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(aw, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (sv(2) <= 1e-10 * sv(0)) throw numerical_error("fit_oscillation: insufficient lambda coverage (ill-conditioned)");
  const Eigen::Vector3d x = svd.solve(yw);
  f.eta = x(0);
  f.c = x(1);
  f.s = x(2);
  f.D = std::hypot(f.c, f.s);
  f.phi = f.D > 0 ? std::atan2(-f.s, f.c) : 0.0;
  if (f.phi <= -std::numbers::pi) f.phi = std::numbers::pi;

  const Eigen::VectorXd r = yw - aw * x;
  const double rss = r.squaredNorm();
  f.residual_rms = std::sqrt((y - a * x).squaredNorm() / double(n));
  const Eigen::Matrix3d v = svd.matrixV();
  const Eigen::Vector3d inv = sv.cwiseInverse().cwiseAbs2();
  Eigen::Matrix3d cov = v * inv.asDiagonal() * v.transpose();
  if (!opts.inverse_variance_weights) cov *= n > 3 ? rss / double(n - 3) : 0.0;
  f.covariance = cov;
  f.stderr_eta = std::sqrt(std::max(0.0, cov(0, 0)));
  if (f.D > 0) {
    const Eigen::Vector2d jd(f.c / f.D, f.s / f.D);
    const Eigen::Vector2d jp(f.s / (f.D * f.D), -f.c / (f.D * f.D));
    const Eigen::Matrix2d cs = cov.bottomRightCorner<2, 2>();
    f.stderr_D = std::sqrt(std::max(0.0, jd.dot(cs * jd)));
    f.stderr_phi = std::sqrt(std::max(0.0, jp.dot(cs * jp)));
  } else {
    f.stderr_D = std::sqrt(std::max(0.0, std::max(cov(1, 1), cov(2, 2))));
    f.stderr_phi = std::numbers::pi;
  }
  return f;
}

ConvergenceReport convergence_check(const std::vector<OscillationFit>& windows, double order, double rel_tol,
                                    double nsigma) {
  ConvergenceReport rep;
  if (windows.size() < 3) {
    rep.message = "need at least 3 lambda windows";
    return rep;
  }
  for (std::size_t i = 1; i < windows.size(); ++i)
    if (windows[i].lambda_min < windows[i - 1].lambda_max) {
      rep.message = "windows must be disjoint and ascending";
      return rep;
    }
  auto scale = [&](const OscillationFit& f) { return std::pow(f.lambda_ref, order); };
  double dmax = 0;
  for (const auto& w : windows) dmax = std::max(dmax, w.D * scale(w));
  rep.pass = true;
  std::ostringstream msg;
  for (std::size_t i = 1; i < windows.size(); ++i) {
    const auto& a = windows[i - 1];
    const auto& b = windows[i];
    const double sa = scale(a), sb = scale(b);
    const double dd = std::abs(b.D * sb - a.D * sa);
    const double de = std::abs(b.eta * sb - a.eta * sa);
    const double td = std::max(nsigma * std::hypot(a.stderr_D * sa, b.stderr_D * sb), rel_tol * dmax);
    const double te = std::max(nsigma * std::hypot(a.stderr_eta * sa, b.stderr_eta * sb), rel_tol * dmax);
    rep.delta_D.push_back(dd);
    rep.delta_eta.push_back(de);
    rep.tolerance_D.push_back(td);
    rep.tolerance_eta.push_back(te);
    if (!(dd <= td && de <= te)) {
      rep.pass = false;
      msg << "windows " << i - 1 << "->" << i << " differ (dD=" << dd << ", deta=" << de << "); ";
    }
  }
  rep.message = rep.pass ? "converged" : msg.str();
  return rep;
}

TauSeries make_tau_series(const RVec& tau, const CVec& values, std::string quantity) {
  if (tau.size() != values.size()) throw std::invalid_argument("tau series: length mismatch");
  if (tau.size() == 0) throw std::invalid_argument("tau series: empty");
  const Index n = tau.size();
  if (n > 2) {
    const double h = (tau(n - 1) - tau(0)) / double(n - 1);
    if (!(h > 0)) throw std::invalid_argument("tau series: grid must ascend");
    const double scale = std::max(std::abs(tau(0)), std::abs(tau(n - 1)));
    for (Index k = 1; k < n; ++k)
      if (std::abs(tau(k) - tau(k - 1) - h) > 1e-12 * std::max(scale, h) * double(n))
        throw std::invalid_argument("tau series: non-uniform grid");
  } else if (n == 2 && !(tau(1) > tau(0))) {
    throw std::invalid_argument("tau series: grid must ascend");
  }
  TauSeries s;
  s.tau = tau;
  s.values = values;
  s.quantity = std::move(quantity);
  s.phase_unwrapped.resize(n);
  for (Index k = 0; k < n; ++k) {
    const double ph = std::arg(values(k));
    if (k == 0) {
      s.phase_unwrapped(k) = ph;
      continue;
    }
    double step = std::remainder(ph - s.phase_unwrapped(k - 1), 2 * std::numbers::pi);
    s.phase_unwrapped(k) = s.phase_unwrapped(k - 1) + step;
    s.max_phase_step = std::max(s.max_phase_step, std::abs(step));
  }
  s.phase_jump = s.max_phase_step > std::numbers::pi / 2;
  return s;
}

TauSeries build_tau_series(const std::vector<OscillationFit>& fits, std::string quantity, cplx scale) {
  const Index n = Index(fits.size());
  RVec tau(n), eta(n);
  CVec vals(n);
  for (Index k = 0; k < n; ++k) {
    tau(k) = fits[k].tau;
    vals(k) = scale * fits[k].amplitude();
    eta(k) = fits[k].eta;
  }
  TauSeries s = make_tau_series(tau, vals, std::move(quantity));
  s.eta = eta;
  return s;
}

}  // namespace qprobe::estimation
