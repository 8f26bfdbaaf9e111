#include "qprobe/spin.hpp"

#include "qprobe/dynamics.hpp"
#include "qprobe/parallel.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <random>

namespace qprobe::spin {

namespace {

constexpr int kMaxSpins = 8;

// S^a_k = sigma_a / 2 on spin k.
std::vector<std::array<CMat, 3>> spin_operators(int n) {
  const std::array<Eigen::Matrix2cd, 3> pauli{linalg::pauli_x(), linalg::pauli_y(), linalg::pauli_z()};
  std::vector<std::array<CMat, 3>> ops(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k)
    for (int a = 0; a < 3; ++a) {
      CMat m = CMat::Identity(1, 1);
      for (int j = 0; j < n; ++j) {
        const CMat f = j == k ? CMat(pauli[std::size_t(a)] / 2.0) : CMat(CMat::Identity(2, 2));
        m = linalg::tensor_product(m, f);
      }
      ops[std::size_t(k)][std::size_t(a)] = std::move(m);
    }
  return ops;
}

CMat dot(const std::array<CMat, 3>& s, const Vec3& v) { return v(0) * s[0] + v(1) * s[1] + v(2) * s[2]; }

}  // namespace

void check_geometry(const SpinGeometry& g) {
  const std::size_t n = g.positions.size();
  if (n == 0 || n > kMaxSpins) throw std::invalid_argument("spin geometry: need 1 to 8 spins");
  if (g.moments.size() != n) throw std::invalid_argument("spin geometry: one moment per spin required");
  for (std::size_t i = 0; i < n; ++i) {
    if (!g.positions[i].allFinite() || !std::isfinite(g.moments[i]))
      throw std::invalid_argument("spin geometry: non-finite entry");
    for (std::size_t j = i + 1; j < n; ++j)
      if ((g.positions[i] - g.positions[j]).norm() <= 0)
        throw std::invalid_argument("spin geometry: coincident spins " + std::to_string(i) + ", " + std::to_string(j));
    if ((g.positions[i] - g.probe_position).norm() <= 0)
      throw std::invalid_argument("spin geometry: probe coincident with spin " + std::to_string(i));
  }
  if (std::abs(g.probe_axis.norm() - 1) > 1e-9) throw std::invalid_argument("spin geometry: probe axis not normalized");
  if (!g.b0.allFinite() || !std::isfinite(g.probe_moment)) throw std::invalid_argument("spin geometry: non-finite field");
}

HermitianOperator build_spin_hamiltonian(const SpinGeometry& g) {
  check_geometry(g);
  const int n = int(g.positions.size());
  const auto s = spin_operators(n);
  const Index d = Index(1) << n;
  CMat h = CMat::Zero(d, d);
  for (int k = 0; k < n; ++k) h -= g.moments[std::size_t(k)] * kNuclearMagneton * dot(s[std::size_t(k)], g.b0);
  for (int k = 0; k < n; ++k)
    for (int l = k + 1; l < n; ++l) {
      const Vec3 r = g.positions[std::size_t(k)] - g.positions[std::size_t(l)];
      const double rn = r.norm();
      const Vec3 u = r / rn;
      const double j = kDipolarPrefactor * g.moments[std::size_t(k)] * g.moments[std::size_t(l)] *
                       kNuclearMagneton * kNuclearMagneton / (rn * rn * rn);
      const auto& sk = s[std::size_t(k)];
      const auto& sl = s[std::size_t(l)];
      h += j * (sk[0] * sl[0] + sk[1] * sl[1] + sk[2] * sl[2] - 3.0 * dot(sk, u) * dot(sl, u));
    }
  return HermitianOperator(h, 1e-10);
}

CMat build_probe_operator(const SpinGeometry& g) {
  check_geometry(g);
  const int n = int(g.positions.size());
  const auto s = spin_operators(n);
  const Index d = Index(1) << n;
  CMat b = CMat::Zero(d, d);
  const double mp = g.probe_moment * kPeVPerMeV;
  for (int k = 0; k < n; ++k) {
    const Vec3 r = g.probe_position - g.positions[std::size_t(k)];
    const double rn = r.norm();
    const Vec3 u = r / rn;
    const double j = kDipolarPrefactor * mp * g.moments[std::size_t(k)] * kNuclearMagneton / (rn * rn * rn);
    const auto& sk = s[std::size_t(k)];
    b += j * (dot(sk, g.probe_axis) - 3.0 * g.probe_axis.dot(u) * dot(sk, u));
  }
  return (b + b.adjoint()) / 2.0;
}

CMat build_probe_coupling(const SpinGeometry& g) {
  return linalg::tensor_product(CMat(linalg::pauli_x()), build_probe_operator(g));
}

std::vector<Vec3> random_spin_positions(int n, double radius, double min_separation, std::uint64_t seed) {
  if (n < 1 || n > kMaxSpins) throw std::invalid_argument("random_spin_positions: need 1 to 8 spins");
  if (!(radius > 0) || min_separation < 0) throw std::invalid_argument("random_spin_positions: bad radius");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<Vec3> out;
  for (int attempt = 0; attempt < 100000 && int(out.size()) < n; ++attempt) {
    Vec3 p(u(rng), u(rng), u(rng));
    if (p.squaredNorm() > 1) continue;
    p *= radius;
    bool ok = true;
    for (const auto& q : out) ok = ok && (p - q).norm() >= min_separation;
    if (ok) out.push_back(p);
  }
  if (int(out.size()) < n) throw std::invalid_argument("random_spin_positions: separation not achievable");
  return out;
}

Vec3 random_probe_position(double r_min, double r_max, std::uint64_t seed) {
  if (!(r_min > 0) || r_max < r_min) throw std::invalid_argument("random_probe_position: bad radii");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud(r_min, r_max);
  Vec3 v(nd(rng), nd(rng), nd(rng));
  while (v.norm() == 0) v = Vec3(nd(rng), nd(rng), nd(rng));
  return v.normalized() * ud(rng);
}

void check_config(const NmrRunConfig& c) {
  if (!(c.tau_step > 0) || !(c.budget >= 8 * c.tau_step)) throw std::invalid_argument("nmr config: need budget >= 8 tau steps");
  if (c.lambda_count < 5) throw std::invalid_argument("nmr config: lambda_count must be >= 5");
  if (c.shots < 0) throw std::invalid_argument("nmr config: shots must be >= 0");
  if (c.pad_factor < 1) throw std::invalid_argument("nmr config: pad_factor must be >= 1");
  if (!(c.lambda_margin > 0) || c.gap_margin < 0) throw std::invalid_argument("nmr config: margins must be positive");
  for (double b : c.budgets)
    if (b < 8 * c.tau_step || b > c.budget * (1 + 1e-12))
      throw std::invalid_argument("nmr config: each budget must lie in [8 tau_step, budget]");
}

CouplingScale coupling_scale(const SpinGeometry& g) {
  const HermitianOperator h = build_spin_hamiltonian(g);
  const CMat b = build_probe_operator(g);
  const auto& es = h.eig();
  const CMat bt = es.vectors.adjoint() * b * es.vectors;
  CouplingScale cs;
  cs.max_element = linalg::max_abs(bt);
  for (Index j = 0; j < bt.rows(); ++j)
    for (Index k = 0; k < bt.cols(); ++k)
      if (std::abs(bt(j, k)) > 1e-3 * cs.max_element && cs.max_element > 0)
        cs.max_gap = std::max(cs.max_gap, std::abs(es.values(j) - es.values(k)));
  return cs;
}

namespace {

model::CouplingBlocks blocks_of(const HermitianOperator& h, const CMat& b) { return {h, h, b}; }

}  // namespace

double auto_lambda(const SpinGeometry& g, const NmrRunConfig& cfg) {
  const CouplingScale cs = coupling_scale(g);
  double l0 = std::max(cfg.lambda_margin * cs.max_element, cfg.gap_margin * cs.max_gap);
  if (l0 <= 0) {
    const HermitianOperator hs = build_spin_hamiltonian(g);
    const RVec& e = hs.eig().values;
    l0 = std::max(1.0, cfg.gap_margin * (e(e.size() - 1) - e(0)));
  }
  const HermitianOperator h(CMat(build_spin_hamiltonian(g).matrix() / kHbar));
  const auto blocks = blocks_of(h, build_probe_operator(g) / kHbar);
  const Index d = h.dim();
  const CMat rho = CMat::Identity(d, d) / double(d);
  for (int it = 0; it < 50; ++it) {
    const auto rep = perturbation::validity_report(blocks, rho, l0 / kHbar, cfg.budget, 2);
    if (rep.resonances.empty()) break;
    l0 *= 1.01;
  }
  return l0;
}

std::vector<Line> reference_lines(const SpinGeometry& g, double rel_cutoff) {
  const HermitianOperator h = build_spin_hamiltonian(g);
  const CMat b = build_probe_operator(g);
  const auto& es = h.eig();
  const CMat bt = es.vectors.adjoint() * b * es.vectors;
  const Index d = bt.rows();
  const double wmax = linalg::max_abs(bt) * linalg::max_abs(bt) / double(d);
  std::vector<Line> out;
  for (Index n = 0; n < d; ++n)
    for (Index m = 0; m < d; ++m) {
      const cplx w = bt(n, m) * bt(m, n) / double(d);
      if (std::abs(w) > rel_cutoff * wmax && wmax > 0) out.push_back({es.values(n) - es.values(m), w});
    }
  return out;
}

namespace {

std::vector<BudgetSpectrum> spectra(const estimation::TauSeries& s, const NmrRunConfig& cfg) {
  std::vector<BudgetSpectrum> out;
  for (double b : cfg.budgets) {
    const Index n = std::min<Index>(s.size(), Index(std::llround(b / cfg.tau_step)));
    const auto prefix = estimation::make_tau_series(s.tau.head(n), s.values.head(n), s.quantity);
    auto spec = estimation::fourier_spectrum(prefix, cfg.window, cfg.pad_factor);
    estimation::rescale_omega(spec, kHbar);
    auto peaks = estimation::find_peaks(spec);
    out.push_back({b, std::move(spec), std::move(peaks)});
  }
  return out;
}

}  // namespace

NmrResult run_nmr_experiment(const SpinGeometry& g, const NmrRunConfig& cfg) {
  check_geometry(g);
  check_config(cfg);
  NmrResult res;

  const HermitianOperator h_pev = build_spin_hamiltonian(g);
  const CMat b_pev = build_probe_operator(g);
  const Index d = h_pev.dim();
  const CMat hc = h_pev.matrix() / kHbar;
  const CMat bc = b_pev / kHbar;
  const CMat rho = CMat::Identity(d, d) / double(d);
  const CMat v_ps = model::combine_coupling(hc, linalg::tensor_product(CMat(linalg::pauli_x()), bc));

  res.lambda0 = auto_lambda(g, cfg);
  const Index nt = Index(std::llround(cfg.budget / cfg.tau_step));
  RVec tau(nt);
  for (Index k = 0; k < nt; ++k) tau(k) = double(k + 1) * cfg.tau_step;

  // One lambda set for every tau; span covers one period at the shortest tau.
  const int nl = cfg.lambda_count;
  const double span = 1.05 * 2 * std::numbers::pi / cfg.tau_step * kHbar;
  std::mt19937_64 rng(derive_seed(cfg.seed, 0xA11CE));
  std::uniform_real_distribution<double> u(0, 1);
  res.lambdas.resize(std::size_t(nl));
  for (int i = 0; i < nl; ++i) res.lambdas[std::size_t(i)] = res.lambda0 + span * (i + 0.5 + 0.4 * (u(rng) - 0.5)) / nl;

  Eigen::MatrixXd p(nl, nt);
  parallel_for(std::size_t(nl), cfg.jobs, [&](std::size_t i) {
    const dynamics::JointPropagator prop(v_ps, rho, {res.lambdas[i] / kHbar, 0, 0}, model::basis_state(0),
                                         model::basis_state(1));
    for (Index k = 0; k < nt; ++k) {
      const double pe = prop.probability(tau(k));
      if (cfg.shots > 0) {
        const auto c = dynamics::sample_shots(pe, cfg.shots, derive_seed(cfg.seed, std::uint64_t(i) * std::uint64_t(nt) + std::uint64_t(k)));
        p(Index(i), k) = double(c) / double(cfg.shots);
      } else {
        p(Index(i), k) = pe;
      }
    }
  });

  std::vector<double> lam(static_cast<std::size_t>(nl));
  for (int i = 0; i < nl; ++i) lam[std::size_t(i)] = res.lambdas[std::size_t(i)] / kHbar;
  const double lref = res.lambda0 / kHbar;
  estimation::FitOptions fo;
  fo.envelope_order = 2;
  fo.lambda_ref = lref;
  std::vector<estimation::OscillationFit> fits(static_cast<std::size_t>(nt));
  parallel_for(std::size_t(nt), cfg.jobs, [&](std::size_t k) {
    std::vector<double> col(static_cast<std::size_t>(nl));
    for (int i = 0; i < nl; ++i) col[std::size_t(i)] = p(i, Index(k));
    fits[k] = estimation::fit_oscillation(lam, col, {}, tau(Index(k)), fo);
  });
  // p = (2/lambda^2) Re[C - e^{i lambda tau} G]  =>  G = -lambda_ref^2 D e^{i phi} / 2, here in peV^2.
  res.measured = estimation::build_tau_series(fits, "xi2_0", -lref * lref * kHbar * kHbar / 2.0);

  const auto& es = h_pev.eig();
  const CMat bt = es.vectors.adjoint() * b_pev * es.vectors;
  CVec exact = CVec::Zero(nt);
  for (Index n = 0; n < d; ++n)
    for (Index m = 0; m < d; ++m) {
      const cplx w = bt(n, m) * bt(m, n) / double(d);
      if (w == 0.0) continue;
      const double om = (es.values(n) - es.values(m)) / kHbar;
      for (Index k = 0; k < nt; ++k) exact(k) += w * std::polar(1.0, om * tau(k));
    }
  res.exact = estimation::make_tau_series(tau, exact, "xi2_0");

  res.reconstructed = spectra(res.measured, cfg);
  res.perfect = spectra(res.exact, cfg);
  res.reference = reference_lines(g);

  const auto blocks = blocks_of(HermitianOperator(hc), bc);
  res.validity = perturbation::validity_report(blocks, rho, lref, cfg.budget, 2);
  if (!res.validity.pass) res.notes.push_back("validity report failed at lambda0; reconstruction may be biased");
  if (res.measured.phase_jump) res.notes.push_back("phase step above pi/2 between neighbouring tau");
  return res;
}

}  // namespace qprobe::spin
