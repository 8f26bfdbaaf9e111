#pragma once

#include "qprobe/dynamics.hpp"
#include "qprobe/linalg.hpp"
#include "qprobe/model.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <random>
#include <vector>

namespace th {

using namespace qprobe;

inline CMat random_matrix(Index r, Index c, std::mt19937_64& g, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  CMat m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = cplx(n(g), n(g));
  return m;
}

inline CMat random_hermitian(Index n, std::mt19937_64& g, double scale = 1.0) {
  const CMat m = random_matrix(n, n, g, scale);
  return (m + m.adjoint()) / 2.0;
}

inline CMat random_density(Index n, std::mt19937_64& g) {
  const CMat m = random_matrix(n, n, g);
  CMat rho = m * m.adjoint();
  return rho / rho.trace().real();
}

// Hermitian with entries bounded by `bound` in magnitude.
inline CMat random_bounded_hermitian(Index n, std::mt19937_64& g, double bound) {
  std::uniform_real_distribution<double> u(-1, 1);
  CMat m(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = i; j < n; ++j) {
      cplx z;
      do z = cplx(u(g), u(g));
      while (std::abs(z) > 1);
      if (i == j) z = z.real();
      m(i, j) = bound * z;
      m(j, i) = std::conj(m(i, j));
    }
  return m;
}

// exp(-i h t) by scaling and squaring (independent of the eigendecomposition path).
inline CMat expm(const CMat& h, double t) {
  const CMat a = cplx(0, -t) * h;
  return a.exp();
}

inline double slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = double(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace th
