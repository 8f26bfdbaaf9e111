#include "qprobe/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace qprobe::dynamics {

namespace {

// Nodes whose spread times tau is below this use the Taylor branch.
constexpr double kClusterSpread = 1.0;

// Taylor series of the divided difference around the node centre:
// f[z] = tau^k e^{-i c tau} sum_m (-i)^m/m! h_{m-k}(w), w_i = (z_i - c) tau.
cplx dd_cluster(std::span<const double> z, double tau) {
  const std::size_t k = z.size() - 1;
  const double c = 0.5 * (z.front() + z.back());
  std::vector<double> w(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) w[i] = (z[i] - c) * tau;

  constexpr int kMaxTerms = 60;
  std::vector<double> h(kMaxTerms, 0.0);
  h[0] = 1;
  for (double wi : w)
    for (int j = 1; j < kMaxTerms; ++j) h[j] += wi * h[j - 1];

  // (-i)^m / m! for m = k
  cplx coef(1, 0);
  for (std::size_t m = 1; m <= k; ++m) coef *= cplx(0, -1) / double(m);
  cplx sum = 0;
  for (int j = 0; j < kMaxTerms; ++j) {
    const cplx term = coef * h[j];
    sum += term;
    if (j > 4 && std::abs(term) <= 1e-20 * std::abs(sum)) break;
    coef *= cplx(0, -1) / double(k + j + 1);
  }
  return std::pow(tau, double(k)) * std::polar(1.0, -c * tau) * sum;
}

cplx dd_sorted(std::span<const double> z, double tau) {
  if (z.size() == 1) return std::polar(1.0, -z[0] * tau);
  const double spread = (z.back() - z.front()) * tau;
  if (spread <= kClusterSpread) return dd_cluster(z, tau);
  return (dd_sorted(z.subspan(1), tau) - dd_sorted(z.first(z.size() - 1), tau)) / (z.back() - z.front());
}

struct JointBasis {
  RVec energy;  // pi0 block first
  CMat w;       // coupling in the joint eigenbasis
  CMat t;       // columns: joint eigenvectors in control-frame coordinates
};

JointBasis joint_basis(const model::CouplingBlocks& blocks, double lambda) {
  const Index d = blocks.dim();
  const auto& e0 = blocks.a0.eig();
  const auto& e1 = blocks.a1.eig();
  JointBasis jb;
  jb.energy.resize(2 * d);
  jb.energy.head(d) = e0.values.array() + lambda / 2;
  jb.energy.tail(d) = e1.values.array() - lambda / 2;
  const CMat bt = e0.vectors.adjoint() * blocks.b * e1.vectors;
  jb.w = CMat::Zero(2 * d, 2 * d);
  jb.w.topRightCorner(d, d) = bt;
  jb.w.bottomLeftCorner(d, d) = bt.adjoint();
  jb.t = CMat::Zero(2 * d, 2 * d);
  jb.t.topLeftCorner(d, d) = e0.vectors;
  jb.t.bottomRightCorner(d, d) = e1.vectors;
  return jb;
}

void accumulate_paths(const JointBasis& jb, double tau, int x, Index a, std::vector<Index>& path, cplx weight,
                      CMat& out) {
  const Index n = jb.energy.size();
  if (int(path.size()) == x + 1) {
    std::vector<double> nodes(path.size());
    for (std::size_t i = 0; i < path.size(); ++i) nodes[i] = jb.energy(path[i]);
    out(a, path.back()) += weight * exp_divided_difference(nodes, tau);
    return;
  }
  const Index cur = path.back();
  for (Index c = 0; c < n; ++c) {
    const cplx wc = jb.w(cur, c);
    if (wc == cplx(0)) continue;
    path.push_back(c);
    accumulate_paths(jb, tau, x, a, path, weight * wc, out);
    path.pop_back();
  }
}

CMat propagator_term_eigen(const JointBasis& jb, double tau, int x) {
  const Index n = jb.energy.size();
  CMat out = CMat::Zero(n, n);
  std::vector<Index> path;
  path.reserve(x + 1);
  for (Index a = 0; a < n; ++a) {
    path.assign(1, a);
    accumulate_paths(jb, tau, x, a, path, 1.0, out);
  }
  return out;
}

// (<beta| ⊗ I) U (|alpha> ⊗ I) with U in control-frame coordinates.
CMat probe_sandwich(const CMat& u, const model::ProbePureState& prep, const model::ProbePureState& meas) {
  const Index d = u.rows() / 2;
  const cplx bra[2] = {meas.a0, meas.a1};
  const cplx ket[2] = {std::conj(prep.a0), std::conj(prep.a1)};
  CMat m = CMat::Zero(d, d);
  for (int k = 0; k < 2; ++k)
    for (int l = 0; l < 2; ++l) m += bra[k] * ket[l] * u.block(k * d, l * d, d, d);
  return m;
}

void check_dyson_args(const model::CouplingBlocks& blocks, const CMat& rho_s, int x, int y, int cap) {
  if (x < 0 || y < 0) throw std::invalid_argument("dyson_term: negative order");
  if (x + y > cap)
    throw std::invalid_argument("dyson_term: x + y = " + std::to_string(x + y) + " exceeds cap " +
                                std::to_string(cap));
  if (rho_s.rows() != blocks.dim()) throw linalg::dimension_error("dyson_term: rho_S dimension mismatch");
}

}  // namespace

cplx exp_divided_difference(std::span<const double> nodes, double tau) {
  if (nodes.empty()) throw std::invalid_argument("exp_divided_difference: no nodes");
  std::vector<double> z(nodes.begin(), nodes.end());
  std::sort(z.begin(), z.end());
  const cplx v = dd_sorted(z, std::abs(tau));
  return tau < 0 ? std::conj(v) : v;
}

CMat dyson_propagator_term(const model::CouplingBlocks& blocks, double lambda, double tau, int x) {
  if (x < 0) throw std::invalid_argument("dyson_propagator_term: negative order");
  const JointBasis jb = joint_basis(blocks, lambda);
  return jb.t * propagator_term_eigen(jb, tau, x) * jb.t.adjoint();
}

cplx dyson_term(const model::CouplingBlocks& blocks, const CMat& rho_s, const model::ProbePureState& prep,
                const model::ProbePureState& meas, double lambda, double tau, int x, int y, int cap) {
  check_dyson_args(blocks, rho_s, x, y, cap);
  const JointBasis jb = joint_basis(blocks, lambda);
  const CMat mx = probe_sandwich(jb.t * propagator_term_eigen(jb, tau, x) * jb.t.adjoint(), prep, meas);
  const CMat my =
      x == y ? mx : probe_sandwich(jb.t * propagator_term_eigen(jb, tau, y) * jb.t.adjoint(), prep, meas);
  return (mx * rho_s * my.adjoint()).trace();
}

double dyson_probability(const model::CouplingBlocks& blocks, const CMat& rho_s,
                         const model::ProbePureState& prep, const model::ProbePureState& meas, double lambda,
                         double tau, int r, int cap) {
  check_dyson_args(blocks, rho_s, r, 0, cap);
  const JointBasis jb = joint_basis(blocks, lambda);
  std::vector<CMat> m;
  for (int x = 0; x <= r; ++x)
    m.push_back(probe_sandwich(jb.t * propagator_term_eigen(jb, tau, x) * jb.t.adjoint(), prep, meas));
  double p = 0;
  for (int x = 0; x <= r; ++x)
    for (int y = 0; x + y <= r; ++y) p += (m[x] * rho_s * m[y].adjoint()).trace().real();
  return p;
}

}  // namespace qprobe::dynamics
