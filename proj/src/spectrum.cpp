#include "qprobe/estimation.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace qprobe::estimation {

SpectrumEstimate fourier_spectrum(const TauSeries& series, Window window, int pad_factor) {
  const Index n = series.size();
  if (n < 8) throw std::invalid_argument("fourier_spectrum: need at least 8 points");
  if (pad_factor < 1) throw std::invalid_argument("fourier_spectrum: pad_factor must be >= 1");
  const double h = series.dtau();
  const Index m = n * pad_factor;

  std::vector<cplx> in(std::size_t(m), cplx(0)), out;
  double norm = 0;
  for (Index k = 0; k < n; ++k) {
    const double w = window == Window::hann ? 0.5 * (1 - std::cos(2 * std::numbers::pi * double(k) / double(n))) : 1.0;
    in[std::size_t(k)] = w * series.values(k);
    norm += w;
  }
  CVec samples(n);
  for (Index k = 0; k < n; ++k) samples(k) = in[std::size_t(k)] / norm;
  Eigen::FFT<double> fft;
  fft.fwd(out, in);

  SpectrumEstimate s;
  s.window = window;
  s.tau = series.tau;
  s.values = series.values;
  s.samples = std::move(samples);
  s.resolution = 2 * std::numbers::pi / (double(n) * h);
  s.omega.resize(m);
  s.weights.resize(m);
  const Index kmin = -(m / 2);
  const double t0 = series.tau(0);
  for (Index i = 0; i < m; ++i) {
    const Index k = kmin + i;
    const double om = 2 * std::numbers::pi * double(k) / (double(m) * h);
    const std::size_t src = std::size_t(k < 0 ? k + m : k);
    s.omega(i) = om;
    s.weights(i) = std::polar(1.0, -om * t0) * out[src] / norm;
  }
  return s;
}

void rescale_omega(SpectrumEstimate& spec, double factor) {
  if (!(factor > 0)) throw std::invalid_argument("rescale_omega: factor must be > 0");
  spec.omega *= factor;
  spec.resolution *= factor;
  spec.omega_scale *= factor;
}

cplx evaluate_spectrum(const SpectrumEstimate& spec, double omega) {
  const double w = omega / spec.omega_scale;
  cplx s = 0;
  for (Index k = 0; k < spec.samples.size(); ++k) s += spec.samples(k) * std::polar(1.0, -w * spec.tau(k));
  return s;
}

namespace {

// Bound on |W(d)| / |W(0)| at d unpadded bins from a line.
double sidelobe_envelope(Window w, double d) {
  if (w == Window::hann) {
    if (d < 2) return 1.0;
    return 1.0 / (std::numbers::pi * d * (d * d - 1));
  }
  if (d < 1) return 1.0;
  return 1.0 / (std::numbers::pi * d);
}

}  // namespace

std::vector<Peak> find_peaks(const SpectrumEstimate& spec, double factor, double rel_floor) {
  const Index m = spec.weights.size();
  std::vector<Peak> cand;
  if (m == 0) return cand;
  const Eigen::VectorXd mag = spec.weights.cwiseAbs();
  std::vector<double> sorted(mag.data(), mag.data() + m);
  std::nth_element(sorted.begin(), sorted.begin() + m / 2, sorted.end());
  const double median = sorted[std::size_t(m / 2)];
  const double thresh = std::max(factor * median, rel_floor * mag.maxCoeff());
  for (Index i = 0; i < m; ++i) {
    const double left = i > 0 ? mag(i - 1) : -1.0;
    const double right = i + 1 < m ? mag(i + 1) : -1.0;
    if (mag(i) > left && mag(i) >= right && mag(i) > thresh) cand.push_back({i, spec.omega(i), spec.weights(i), mag(i)});
  }
  const bool can_refine = spec.samples.size() > 0 && spec.resolution > 0;
  for (auto& p : cand) {
    if (!can_refine || p.bin == 0 || p.bin + 1 >= m) continue;
    const double a = mag(p.bin - 1), b = mag(p.bin), c = mag(p.bin + 1);
    const double den = a - 2 * b + c;
    const double off = den < 0 ? std::clamp(0.5 * (a - c) / den, -0.5, 0.5) : 0.0;
    p.omega = spec.omega(p.bin) + off * (spec.omega(p.bin + 1) - spec.omega(p.bin));
    p.weight = evaluate_spectrum(spec, p.omega);
    p.magnitude = std::abs(p.weight);
  }

  std::vector<std::size_t> order(cand.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) { return cand[x].magnitude > cand[y].magnitude; });
  std::vector<Peak> kept;
  for (auto i : order) {
    const auto& p = cand[i];
    double leak = 0;
    for (const auto& q : kept)
      leak += q.magnitude * sidelobe_envelope(spec.window, std::abs(p.omega - q.omega) / spec.resolution);
    if (p.magnitude > 2 * leak) kept.push_back(p);
  }
  std::sort(kept.begin(), kept.end(), [](const Peak& x, const Peak& y) { return x.bin < y.bin; });
  return kept;
}

namespace {

std::vector<Peak> fit_lines(const SpectrumEstimate& spec, const std::vector<Peak>& peaks, const LineFitOptions& opts,
                            CVec& resid) {
  std::vector<Peak> seed;
  {
    std::vector<Peak> sorted = peaks;
    std::sort(sorted.begin(), sorted.end(), [](const Peak& a, const Peak& b) { return a.magnitude > b.magnitude; });
    for (const auto& p : sorted) {
      bool near = false;
      for (const auto& q : seed) near = near || std::abs(p.omega - q.omega) < opts.min_separation_bins * spec.resolution;
      if (!near) seed.push_back(p);
    }
  }
  const Index m = Index(seed.size());
  if (m == 0) {
    resid = spec.values;
    return {};
  }
  const Index n = spec.tau.size();
  const RVec& tau = spec.tau;
  const CVec& c = spec.values;

  // x = [Re a, Im a, w] with w in the series' own angular units
  Eigen::VectorXd x(3 * m);
  for (Index j = 0; j < m; ++j) {
    x(j) = seed[std::size_t(j)].weight.real();
    x(m + j) = seed[std::size_t(j)].weight.imag();
    x(2 * m + j) = seed[std::size_t(j)].omega / spec.omega_scale;
  }
  auto residual = [&](const Eigen::VectorXd& v, CMat* e) {
    CMat ee(n, m);
    for (Index j = 0; j < m; ++j)
      for (Index k = 0; k < n; ++k) ee(k, j) = std::polar(1.0, v(2 * m + j) * tau(k));
    CVec a(m);
    for (Index j = 0; j < m; ++j) a(j) = cplx(v(j), v(m + j));
    CVec r = c - ee * a;
    if (e) *e = std::move(ee);
    return r;
  };

  CMat e;
  CVec r = residual(x, &e);
  double cost = r.squaredNorm();
  double mu = 1e-3;
  Eigen::MatrixXd jac(2 * n, 3 * m);
  for (int it = 0; it < opts.max_iterations; ++it) {
    for (Index j = 0; j < m; ++j) {
      const cplx a(x(j), x(m + j));
      for (Index k = 0; k < n; ++k) {
        const cplx dre = -e(k, j), dim = cplx(0, -1) * e(k, j), dw = cplx(0, -1) * tau(k) * a * e(k, j);
        jac(k, j) = dre.real();
        jac(n + k, j) = dre.imag();
        jac(k, m + j) = dim.real();
        jac(n + k, m + j) = dim.imag();
        jac(k, 2 * m + j) = dw.real();
        jac(n + k, 2 * m + j) = dw.imag();
      }
    }
    Eigen::VectorXd rr(2 * n);
    rr << r.real(), r.imag();
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd g = jac.transpose() * rr;
    bool improved = false;
    for (int tries = 0; tries < 20 && !improved; ++tries) {
      Eigen::MatrixXd a = jtj;
      a.diagonal() += mu * jtj.diagonal().cwiseMax(1e-300);
      const Eigen::VectorXd step = a.ldlt().solve(-g);
      const Eigen::VectorXd xn = x + step;
      CMat en;
      const CVec rn = residual(xn, &en);
      const double cn = rn.squaredNorm();
      if (std::isfinite(cn) && cn < cost) {
        const double gain = (cost - cn) / std::max(cost, 1e-300);
        x = xn;
        e = std::move(en);
        r = rn;
        cost = cn;
        mu = std::max(mu / 3, 1e-12);
        improved = true;
        if (gain < 1e-14) it = opts.max_iterations;
      } else {
        mu *= 4;
      }
    }
    if (!improved) break;
  }

  resid = r;
  std::vector<Peak> out;
  for (Index j = 0; j < m; ++j) {
    Peak p = seed[std::size_t(j)];
    const double w = x(2 * m + j) * spec.omega_scale;
    if (std::abs(w - p.omega) > opts.max_shift_bins * spec.resolution) continue;
    p.omega = w;
    p.weight = cplx(x(j), x(m + j));
    p.magnitude = std::abs(p.weight);
    Index bin = 0;
    (spec.omega.array() - w).abs().minCoeff(&bin);
    p.bin = bin;
    out.push_back(p);
  }
  std::sort(out.begin(), out.end(), [](const Peak& a, const Peak& b) { return a.omega < b.omega; });
  return out;
}

}  // namespace

std::vector<Peak> refine_lines(const SpectrumEstimate& spec, const std::vector<Peak>& peaks, const LineFitOptions& opts) {
  if (spec.values.size() == 0 || spec.tau.size() != spec.values.size())
    throw std::invalid_argument("refine_lines: spectrum carries no source series");
  const int pad = int(spec.omega.size() / spec.tau.size());
  CVec resid;
  std::vector<Peak> lines = fit_lines(spec, peaks, opts, resid);
  for (int round = 0; round < opts.rounds && !lines.empty(); ++round) {
    double top = 0;
    for (const auto& l : lines) top = std::max(top, l.magnitude);
    auto rs = fourier_spectrum(make_tau_series(spec.tau, resid), spec.window, std::max(pad, 1));
    rescale_omega(rs, spec.omega_scale);
    std::vector<Peak> seed = lines;
    bool added = false;
    for (const auto& p : find_peaks(rs)) {
      if (p.magnitude < opts.residual_floor * top) continue;
      bool near = false;
      for (const auto& l : lines) near = near || std::abs(p.omega - l.omega) < opts.min_separation_bins * spec.resolution;
      if (near) continue;
      seed.push_back(p);
      added = true;
    }
    if (!added) break;
    CVec r2;
    auto next = fit_lines(spec, seed, opts, r2);
    if (r2.squaredNorm() >= resid.squaredNorm()) break;
    lines = std::move(next);
    resid = std::move(r2);
  }
  double top = 0;
  for (const auto& l : lines) top = std::max(top, l.magnitude);
  std::erase_if(lines, [&](const Peak& l) { return l.magnitude < 0.1 * opts.residual_floor * top; });
  return lines;
}

double fwhm(const SpectrumEstimate& spec, Index bin) {
  const Index m = spec.weights.size();
  if (bin < 0 || bin >= m) throw std::out_of_range("fwhm: bin out of range");
  const double half = std::abs(spec.weights(bin)) / 2;
  auto cross = [&](int dir) {
    Index i = bin;
    while (true) {
      const Index j = i + dir;
      if (j < 0 || j >= m) return std::numeric_limits<double>::quiet_NaN();
      const double a = std::abs(spec.weights(i)), b = std::abs(spec.weights(j));
      if (b <= half) {
        const double t = (a - half) / (a - b);
        return spec.omega(i) + t * (spec.omega(j) - spec.omega(i));
      }
      i = j;
    }
  };
  const double lo = cross(-1), hi = cross(+1);
  if (std::isnan(lo) || std::isnan(hi)) return std::numeric_limits<double>::infinity();
  return hi - lo;
}

namespace {

bool has_gap(const std::vector<double>& gaps, double g, double tol) {
  for (double x : gaps)
    if (std::abs(x - g) <= tol) return true;
  return false;
}

bool consistent(const std::vector<double>& levels, double x, const std::vector<double>& gaps, double tol) {
  for (double l : levels)
    if (std::abs(l - x) <= tol || !has_gap(gaps, std::abs(l - x), tol)) return false;
  return true;
}

}  // namespace

LevelLadder assemble_levels_from_triplets(std::vector<double> peaks, double tol) {
  LevelLadder out;
  std::vector<double> gaps;
  for (double f : peaks) {
    f = std::abs(f);
    if (f <= tol) continue;
    if (!has_gap(gaps, f, tol)) gaps.push_back(f);
  }
  std::sort(gaps.begin(), gaps.end());
  if (gaps.empty()) {
    out.levels = {0.0};
    out.complete = true;
    return out;
  }
  const double top = gaps.back();
  out.levels = {0.0, top};

  // Candidate interior levels come in mirror pairs {x, top - x} closing a triplet with the top gap.
  std::vector<std::pair<double, double>> pairs;
  for (double f : gaps) {
    if (f >= top - tol) break;
    if (!has_gap(gaps, top - f, tol)) continue;
    const double lo = std::min(f, top - f), hi = std::max(f, top - f);
    bool seen = false;
    for (const auto& p : pairs) seen = seen || std::abs(p.first - lo) <= tol;
    if (!seen) pairs.emplace_back(lo, hi);
  }
  std::sort(pairs.begin(), pairs.end());

  bool first = true;
  for (const auto& [lo, hi] : pairs) {
    const bool ok_lo = consistent(out.levels, lo, gaps, tol);
    const bool ok_hi = std::abs(hi - lo) > tol && consistent(out.levels, hi, gaps, tol);
    if (ok_lo && ok_hi && !first) {
      std::ostringstream m;
      m << "level pair {" << lo << ", " << hi << "} fits both orientations; took " << lo;
      out.diagnostics.push_back(m.str());
    }
    if (ok_lo) {
      out.levels.push_back(lo);
      if (first && std::abs(hi - lo) > tol) out.mirror_ambiguous = true;
      first = false;
    } else if (ok_hi) {
      out.levels.push_back(hi);
      first = false;
    } else {
      std::ostringstream m;
      m << "candidate pair {" << lo << ", " << hi << "} inconsistent with ladder; dropped";
      out.diagnostics.push_back(m.str());
    }
    std::sort(out.levels.begin(), out.levels.end());
  }

  // Least-squares refinement of the levels against the matched gaps (lowest level fixed at 0).
  const std::size_t nl = out.levels.size();
  if (nl > 2) {
    std::vector<std::pair<std::size_t, std::size_t>> idx;
    std::vector<double> obs;
    for (std::size_t i = 0; i < nl; ++i)
      for (std::size_t j = i + 1; j < nl; ++j) {
        const double d = out.levels[j] - out.levels[i];
        double best = 0, err = std::numeric_limits<double>::infinity();
        for (double g : gaps)
          if (std::abs(g - d) < err) err = std::abs(g - d), best = g;
        idx.emplace_back(i, j);
        obs.push_back(best);
      }
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(Index(obs.size()), Index(nl - 1));
    Eigen::VectorXd y(Index(obs.size()));
    for (std::size_t r = 0; r < obs.size(); ++r) {
      if (idx[r].second > 0) a(Index(r), Index(idx[r].second - 1)) += 1;
      if (idx[r].first > 0) a(Index(r), Index(idx[r].first - 1)) -= 1;
      y(Index(r)) = obs[r];
    }
    const Eigen::VectorXd x = a.colPivHouseholderQr().solve(y);
    for (std::size_t i = 1; i < nl; ++i) out.levels[i] = x(Index(i - 1));
  }

  out.complete = true;
  for (double g : gaps) {
    bool found = false;
    for (std::size_t i = 0; i < nl && !found; ++i)
      for (std::size_t j = i + 1; j < nl && !found; ++j) found = std::abs(out.levels[j] - out.levels[i] - g) <= tol;
    if (!found) {
      out.complete = false;
      std::ostringstream m;
      m << "gap " << g << " not explained by the ladder";
      out.diagnostics.push_back(m.str());
    }
  }
  return out;
}

StateDiagonal extract_state_diagonal(const std::vector<Peak>& peaks, const RVec& e0, const RVec& e1, double tol) {
  StateDiagonal out;
  const Index n0 = e0.size(), n1 = e1.size();
  CVec d0 = CVec::Zero(n0), d1 = CVec::Zero(n1);
  bool any_off_zero = false;
  for (const auto& p : peaks) {
    if (std::abs(p.omega) > tol) any_off_zero = true;
    Index hits = 0, jm = -1, jn = -1;
    for (Index m = 0; m < n0; ++m)
      for (Index k = 0; k < n1; ++k)
        if (std::abs(e0(m) - e1(k) - p.omega) <= tol) {
          ++hits;
          jm = m;
          jn = k;
        }
    if (hits == 1) {
      d0(jm) += p.weight;
      d1(jn) += p.weight;
    } else if (hits > 1) {
      out.ambiguous = true;
      std::ostringstream m;
      m << "peak at " << p.omega << " matches " << hits << " level pairs; not assigned";
      out.diagnostics.push_back(m.str());
    } else {
      std::ostringstream m;
      m << "peak at " << p.omega << " matches no level pair";
      out.diagnostics.push_back(m.str());
    }
  }
  out.diag0 = d0.real();
  out.diag1 = d1.real();
  if (!any_off_zero) {
    out.no_coherence = true;
    out.diagnostics.push_back("all weight at zero frequency; diagonal not resolvable");
    out.diag0 = RVec::Constant(n0, n0 ? 1.0 / double(n0) : 0.0);
    out.diag1 = RVec::Constant(n1, n1 ? 1.0 / double(n1) : 0.0);
  }
  return out;
}

double mean_energy(const RVec& diag0, const RVec& diag1, const RVec& e0, const RVec& e1) {
  if (diag0.size() != e0.size() || diag1.size() != e1.size())
    throw std::invalid_argument("mean_energy: length mismatch");
  return diag0.dot(e0) + diag1.dot(e1);
}

bool coherence_witness(const std::vector<Peak>& peaks, double tol) {
  return std::any_of(peaks.begin(), peaks.end(), [&](const Peak& p) { return std::abs(p.omega) > tol; });
}

}  // namespace qprobe::estimation
