#pragma once

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "ldspin/exact.hpp"
#include "ldspin/ldp.hpp"
#include "ldspin/model.hpp"

namespace ldspin::testing {

inline std::mt19937_64 rng(std::uint64_t seed) { return std::mt19937_64(seed); }

inline OperatorMatrix random_complex(int n, std::mt19937_64& gen) {
  std::normal_distribution<double> dist(0.0, 1.0);
  OperatorMatrix m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = Complex(dist(gen), dist(gen));
  return m;
}

inline OperatorMatrix random_hermitian(int n, std::mt19937_64& gen) {
  const OperatorMatrix m = random_complex(n, gen);
  return ((m + m.adjoint()) / 2.0).eval();
}

inline OperatorMatrix random_unitary(int n, std::mt19937_64& gen) {
  const OperatorMatrix m = random_complex(n, gen);
  Eigen::HouseholderQR<OperatorMatrix> qr(m);
  OperatorMatrix q = qr.householderQ();
  return q;
}

// Positive definite with spectrum in [lo, hi].
inline OperatorMatrix random_pd(int n, std::mt19937_64& gen, double lo = 0.5,
                                double hi = 1.5) {
  const OperatorMatrix u = random_unitary(n, gen);
  std::uniform_real_distribution<double> dist(lo, hi);
  Eigen::VectorXcd d(n);
  for (int i = 0; i < n; ++i) d(i) = dist(gen);
  return u * d.asDiagonal() * u.adjoint();
}

// Coefficients l_1..l_K of log Z(beta) for Z = sum_n (-beta)^n mu_n / n!,
// mu_0 = 1: the standard power-series logarithm recursion.
inline std::vector<double> log_series_from_moments(
    const std::vector<double>& moments, int K) {
  std::vector<double> z(K + 1, 0.0);
  z[0] = 1.0;
  double fact = 1.0;
  for (int n = 1; n <= K; ++n) {
    fact *= n;
    z[n] = ((n % 2) ? -1.0 : 1.0) * moments[n] / fact;
  }
  std::vector<double> l(K + 1, 0.0);
  for (int n = 1; n <= K; ++n) {
    double s = z[n];
    for (int j = 1; j < n; ++j) s -= (static_cast<double>(j) / n) * l[j] * z[n - j];
    l[n] = s;
  }
  return l;  // l[0] unused
}

// Complex-moment variant.
inline std::vector<Complex> log_series_from_moments(
    const std::vector<Complex>& moments, int K) {
  std::vector<Complex> z(K + 1, Complex(0, 0));
  z[0] = 1.0;
  double fact = 1.0;
  for (int n = 1; n <= K; ++n) {
    fact *= n;
    z[n] = ((n % 2) ? -1.0 : 1.0) * moments[n] / fact;
  }
  std::vector<Complex> l(K + 1, Complex(0, 0));
  for (int n = 1; n <= K; ++n) {
    Complex s = z[n];
    for (int j = 1; j < n; ++j) s -= (static_cast<double>(j) / n) * l[j] * z[n - j];
    l[n] = s;
  }
  return l;
}

// beta-Taylor coefficients 1..K of log omega^t_box(e^{-beta H_box}) from
// exact moments omega^t(H^n): the independent oracle for the cluster series.
inline std::vector<Complex> taylor_log_oracle(const Model& model,
                                              const LatticeBox& box, Complex t,
                                              int K) {
  const SiteList volume = box.sites();
  const int n = static_cast<int>(volume.size());
  const int d = model.site_dim();
  long long dim = 1;
  for (int i = 0; i < n; ++i) dim *= d;

  const OperatorMatrix h = hamiltonian(model.potential, box);
  // Tilted product density e^{tX}/Tr e^{tX} per site.
  const auto x_eig = herm_eig(model.x);
  Eigen::VectorXcd w(d);
  Complex z(0, 0);
  for (int j = 0; j < d; ++j) {
    w(j) = std::exp(t * x_eig.eigenvalues(j));
    z += w(j);
  }
  const OperatorMatrix site =
      x_eig.eigenvectors * (w / z).asDiagonal() * x_eig.eigenvectors.adjoint();
  OperatorMatrix density = OperatorMatrix::Identity(1, 1);
  for (int i = 0; i < n; ++i) density = kron(density, site).eval();

  std::vector<Complex> moments(K + 1);
  OperatorMatrix pow = OperatorMatrix::Identity(dim, dim);
  for (int k = 0; k <= K; ++k) {
    moments[k] = (density.transpose().cwiseProduct(pow)).sum();
    if (k < K) pow = (pow * h).eval();
  }
  auto l = log_series_from_moments(moments, K);
  return std::vector<Complex>(l.begin() + 1, l.end());
}

// Free-boundary 1D classical Ising chain with per-site field:
// Z_n(t) = sum_s prod_i e^{t s_i} prod e^{coupling s_i s_{i+1}}.
inline double ising_chain_log_ratio(int n, double t, double coupling) {
  Eigen::Matrix2d transfer;
  transfer << std::exp(coupling), std::exp(-coupling), std::exp(-coupling),
      std::exp(coupling);
  Eigen::Matrix2d field = Eigen::Matrix2d::Zero();
  field(0, 0) = std::exp(t);
  field(1, 1) = std::exp(-t);
  Eigen::Matrix2d prod = field;
  for (int i = 1; i < n; ++i) prod = (prod * transfer * field).eval();
  const double z_t = prod.sum();
  Eigen::Matrix2d prod0 = Eigen::Matrix2d::Identity();
  for (int i = 1; i < n; ++i) prod0 = (prod0 * transfer).eval();
  const double z_0 = prod0.sum();
  return std::log(z_t / z_0);
}

inline double binary_entropy_conjugate(double x) {
  return 0.5 * (1.0 + x) * std::log1p(x) + 0.5 * (1.0 - x) * std::log1p(-x);
}

// sup_x (t x - I(x)) with I evaluated pointwise through the Legendre
// transform; golden-section over the attained-slope interval. Recovers F(t)
// on convex inputs.
inline double biconjugate(const GeneratingFunction& f, double t) {
  const std::size_t n = f.t_grid.size();
  const double lo =
      (f.values[1] - f.values[0]) / (f.t_grid[1] - f.t_grid[0]) + 1e-9;
  const double hi = (f.values[n - 1] - f.values[n - 2]) /
                        (f.t_grid[n - 1] - f.t_grid[n - 2]) -
                    1e-9;
  auto value = [&](double x) { return t * x - legendre(f, {x}).values[0]; };
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double c = b - gr * (b - a), d = a + gr * (b - a);
  double fc = value(c), fd = value(d);
  while (b - a > 1e-9) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = value(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = value(d);
    }
  }
  return std::max(fc, fd);
}

// Nearest-neighbor sigma_z x sigma_z chain with unit coupling.
inline Potential ising_pair_potential(double coupling = 1.0) {
  OperatorMatrix zz = kron(pauli_z(), pauli_z()) * coupling;
  return Potential(2, {BaseInteraction{{Site(0), Site(1)}, zz}});
}

inline Model ising_chain_model(double coupling = 1.0) {
  return Model{pauli_z(), ising_pair_potential(coupling)};
}

// 2D nearest-neighbor pair model (both bond orientations).
inline Model ising_2d_model(double coupling = 1.0) {
  OperatorMatrix zz = kron(pauli_z(), pauli_z()) * coupling;
  std::vector<BaseInteraction> terms;
  terms.push_back(BaseInteraction{{Site(0, 0), Site(1, 0)}, zz});
  terms.push_back(BaseInteraction{{Site(0, 0), Site(0, 1)}, zz});
  return Model{pauli_z(), Potential(2, std::move(terms))};
}

// Noncommuting single-site demo: X = sigma_x, Phi({i}) = sigma_z.
inline Model field_demo_model() {
  return Model{pauli_x(),
               Potential(2, {BaseInteraction{{Site(0)}, pauli_z()}})};
}

inline Model free_qubit_model() {
  return Model{pauli_z(), Potential(2, {})};
}

}  // namespace ldspin::testing
