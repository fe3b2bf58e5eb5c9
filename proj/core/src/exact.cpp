#include "ldspin/exact.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ldspin {

namespace {

long long ipow(long long base, int exp) {
  long long r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

double logsumexp(const RealVector& v) {
  const double m = v.maxCoeff();
  double s = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += std::exp(v(i) - m);
  return m + std::log(s);
}

// Tr(A B) without forming the product.
Complex trace_product(const OperatorMatrix& a, const OperatorMatrix& b) {
  return (a.transpose().cwiseProduct(b)).sum();
}

int digit_at(long long index, int pos, int n, int d) {
  // Slot 0 most significant.
  long long stride = 1;
  for (int k = 0; k < n - 1 - pos; ++k) stride *= d;
  return static_cast<int>((index / stride) % d);
}

}  // namespace

ExactEngine::ExactEngine(Model model, long long dim_cap)
    : model_(std::move(model)), dim_cap_(dim_cap) {
  require_hermitian(model_.x, "ExactEngine");
  x_eig_ = herm_eig(model_.x);
}

ExactEngine::BoxKey ExactEngine::key_of(const LatticeBox& box) {
  // The embedded Hamiltonian matrix is translation invariant, so the corner
  // is normalized away.
  return BoxKey{box.d, box.lengths, {0, 0, 0}};
}

void ExactEngine::check_cap(const LatticeBox& box, const char* where) const {
  long long dim = 1;
  for (long long i = 0; i < box.volume(); ++i) {
    dim *= model_.site_dim();
    if (dim > dim_cap_)
      throw CapError(std::string(where) +
                     ": site_dim^|volume| exceeds the dimension cap " +
                     std::to_string(dim_cap_));
  }
}

const SpectralDecomposition& ExactEngine::hamiltonian_eig(
    const LatticeBox& box) {
  const BoxKey key = key_of(box);
  {
    std::lock_guard<std::mutex> lock(cache_mutex_);
    auto it = eig_cache_.find(key);
    if (it != eig_cache_.end()) return *it->second;
  }
  auto dec = std::make_shared<SpectralDecomposition>(
      herm_eig(hamiltonian(model_.potential, box, dim_cap_)));
  std::lock_guard<std::mutex> lock(cache_mutex_);
  auto [it, inserted] = eig_cache_.emplace(key, std::move(dec));
  return *it->second;
}

OperatorMatrix ExactEngine::site_exp(Complex t) const {
  Eigen::VectorXcd d(x_eig_.eigenvalues.size());
  for (Eigen::Index i = 0; i < d.size(); ++i)
    d(i) = std::exp(t * x_eig_.eigenvalues(i));
  return x_eig_.eigenvectors * d.asDiagonal() * x_eig_.eigenvectors.adjoint();
}

OperatorMatrix ExactEngine::product_over(const SiteList& volume,
                                         const LatticeBox& inner,
                                         const OperatorMatrix& factor) const {
  OperatorMatrix acc = OperatorMatrix::Identity(1, 1);
  const OperatorMatrix id =
      OperatorMatrix::Identity(model_.site_dim(), model_.site_dim());
  for (const auto& s : volume)
    acc = kron(acc, inner.contains_site(s) ? factor : id).eval();
  return acc;
}

DensityState ExactEngine::gibbs_state(const LatticeBox& box, double beta) {
  check_cap(box, "gibbs_state");
  const long long dim =
      ipow(model_.site_dim(), static_cast<int>(box.volume()));
  if (beta == 0.0)
    return {OperatorMatrix::Identity(dim, dim) / static_cast<double>(dim)};
  const auto& dec = hamiltonian_eig(box);
  RealVector w(dec.eigenvalues.size());
  const double emin = dec.eigenvalues.minCoeff();
  for (Eigen::Index i = 0; i < w.size(); ++i)
    w(i) = std::exp(-beta * (dec.eigenvalues(i) - emin));
  w /= w.sum();
  return {dec.eigenvectors * w.cast<Complex>().asDiagonal() *
          dec.eigenvectors.adjoint()};
}

DiscreteMeasure ExactEngine::empirical_distribution(const LatticeBox& box,
                                                    double beta) {
  check_cap(box, "empirical_distribution");
  const SiteList volume = box.sites();
  const int n = static_cast<int>(volume.size());
  const long long dim = ipow(model_.site_dim(), n);
  OperatorMatrix avg = OperatorMatrix::Zero(dim, dim);
  for (int p = 0; p < n; ++p)
    add_embedded(avg, model_.x, {p}, model_.site_dim(), Complex(1.0 / n, 0));
  return spectral_distribution(avg, gibbs_state(box, beta).rho);
}

double ExactEngine::finite_F(const LatticeBox& box, double t, double beta) {
  check_cap(box, "finite_F");
  const int n = static_cast<int>(box.volume());
  if (beta == 0.0) {
    // The trace state factorizes site by site.
    RealVector tl = t * x_eig_.eigenvalues;
    return logsumexp(tl) - std::log(static_cast<double>(model_.site_dim()));
  }
  const auto& dec = hamiltonian_eig(box);
  const OperatorMatrix tilt = product_over(box.sites(), box, site_exp(t));
  return log_weighted_trace(tilt, dec, beta) / n;
}

double ExactEngine::finite_F_embedded(const LatticeBox& box,
                                      const LatticeBox& outer, double t,
                                      double beta) {
  if (!box.inside(outer))
    throw DomainError("finite_F_embedded: box not inside the outer volume");
  check_cap(outer, "finite_F_embedded");
  const int n = static_cast<int>(box.volume());
  if (beta == 0.0) {
    RealVector tl = t * x_eig_.eigenvalues;
    return logsumexp(tl) - std::log(static_cast<double>(model_.site_dim()));
  }
  const auto& dec = hamiltonian_eig(outer);
  const OperatorMatrix tilt = product_over(outer.sites(), box, site_exp(t));
  return log_weighted_trace(tilt, dec, beta) / n;
}

double ExactEngine::log_weighted_trace(const OperatorMatrix& op,
                                       const SpectralDecomposition& h,
                                       double beta) const {
  // log [ Tr(op e^{-beta H}) / Tr e^{-beta H} ] via the H eigenbasis.
  const double emin = h.eigenvalues.minCoeff();
  RealVector w(h.eigenvalues.size());
  for (Eigen::Index i = 0; i < w.size(); ++i)
    w(i) = std::exp(-beta * (h.eigenvalues(i) - emin));
  const OperatorMatrix ou = op * h.eigenvectors;
  double num = 0, den = 0;
  for (Eigen::Index k = 0; k < w.size(); ++k) {
    num += w(k) * std::real(h.eigenvectors.col(k).dot(ou.col(k)));
    den += w(k);
  }
  if (num <= 0)
    throw InvariantError("finite_F: nonpositive weighted trace");
  return std::log(num / den);
}

FiniteVolumeCurve ExactEngine::finite_F_curve(const LatticeBox& box,
                                              const std::vector<double>& t_grid,
                                              double beta) {
  FiniteVolumeCurve curve;
  curve.volume = box;
  curve.t_grid = t_grid;
  curve.values.resize(t_grid.size());
  for (std::size_t i = 0; i < t_grid.size(); ++i)
    curve.values[i] = finite_F(box, t_grid[i], beta);
  for (std::size_t i = 1; i + 1 < curve.values.size(); ++i) {
    const double hl = t_grid[i] - t_grid[i - 1];
    const double hr = t_grid[i + 1] - t_grid[i];
    const double second = 2.0 *
                          ((curve.values[i + 1] - curve.values[i]) / hr -
                           (curve.values[i] - curve.values[i - 1]) / hl) /
                          (hl + hr);
    if (second < -1e-9)
      throw InvariantError("finite_F_curve: convexity violated");
  }
  return curve;
}

double ExactEngine::tilted_pressure(const LatticeBox& box, double h,
                                    double beta) {
  check_cap(box, "tilted_pressure");
  const SiteList volume = box.sites();
  const int n = static_cast<int>(volume.size());
  if (beta == 0.0) {
    // The tilted trace factorizes per site.
    return logsumexp((-h * x_eig_.eigenvalues).eval());
  }
  if (h == 0.0) {
    const auto& dec = hamiltonian_eig(box);
    return logsumexp((-beta * dec.eigenvalues).eval()) / n;
  }
  const long long dim = ipow(model_.site_dim(), n);
  OperatorMatrix m = OperatorMatrix::Zero(dim, dim);
  if (beta != 0.0) m = -beta * hamiltonian(model_.potential, box, dim_cap_);
  for (int p = 0; p < n; ++p)
    add_embedded(m, model_.x, {p}, model_.site_dim(), Complex(-h, 0));
  const auto dec = herm_eig(m);
  return logsumexp(dec.eigenvalues) / n;
}

double ExactEngine::solve_tilt(double a, const LatticeBox& box, double beta) {
  check_cap(box, "solve_tilt");
  const SiteList volume = box.sites();
  const int n = static_cast<int>(volume.size());
  const long long dim = ipow(model_.site_dim(), n);

  const double lo_spec = x_eig_.eigenvalues.minCoeff();
  const double hi_spec = x_eig_.eigenvalues.maxCoeff();
  if (!(a > lo_spec && a < hi_spec))
    throw DomainError(
        "solve_tilt: target outside the open spectral interval of X");

  OperatorMatrix h0 = OperatorMatrix::Zero(dim, dim);
  if (beta != 0.0) h0 = -beta * hamiltonian(model_.potential, box, dim_cap_);
  OperatorMatrix xavg = OperatorMatrix::Zero(dim, dim);
  for (int p = 0; p < n; ++p)
    add_embedded(xavg, model_.x, {p}, model_.site_dim(),
                 Complex(1.0 / n, 0));

  auto tilted_mean = [&](double h) {
    if (beta == 0.0) {
      // Product state: the per-site tilted mean of X.
      const double emax = (-h * x_eig_.eigenvalues).maxCoeff();
      double num = 0, den = 0;
      for (Eigen::Index j = 0; j < x_eig_.eigenvalues.size(); ++j) {
        const double w = std::exp(-h * x_eig_.eigenvalues(j) - emax);
        num += w * x_eig_.eigenvalues(j);
        den += w;
      }
      return num / den;
    }
    OperatorMatrix m = h0;
    for (int p = 0; p < n; ++p)
      add_embedded(m, model_.x, {p}, model_.site_dim(), Complex(-h, 0));
    const auto dec = herm_eig(m);
    const double emax = dec.eigenvalues.maxCoeff();
    double num = 0, den = 0;
    const OperatorMatrix xu = xavg * dec.eigenvectors;
    for (Eigen::Index k = 0; k < dec.eigenvalues.size(); ++k) {
      const double w = std::exp(dec.eigenvalues(k) - emax);
      num += w * std::real(dec.eigenvectors.col(k).dot(xu.col(k)));
      den += w;
    }
    return num / den;
  };

  // The tilted expectation decreases in h; expand a bracket around 0.
  double lo = -1, hi = 1;
  double g_lo = tilted_mean(lo), g_hi = tilted_mean(hi);
  int guard = 0;
  while (g_lo < a && guard++ < 60) {
    lo *= 2;
    g_lo = tilted_mean(lo);
  }
  guard = 0;
  while (g_hi > a && guard++ < 60) {
    hi *= 2;
    g_hi = tilted_mean(hi);
  }
  if (g_lo < g_hi)
    throw InvariantError(
        "solve_tilt: tilted expectation not decreasing on the bracket "
        "(monotonicity assumption violated)");
  if (!(g_lo >= a && a >= g_hi))
    throw DomainError("solve_tilt: target not attainable at this volume");

  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    const double g = tilted_mean(mid);
    if (g > g_lo + 1e-9 || g < g_hi - 1e-9)
      throw InvariantError(
          "solve_tilt: bracket inversion detected (monotonicity violated)");
    if (g >= a) {
      lo = mid;
      g_lo = g;
    } else {
      hi = mid;
      g_hi = g;
    }
    if (std::abs(g - a) <= 1e-10 && hi - lo <= 1e-12) break;
  }
  return 0.5 * (lo + hi);
}

double ExactEngine::tilde_F(const LatticeBox& box, double t, double beta) {
  return tilted_pressure(box, -t, beta) - tilted_pressure(box, 0.0, beta);
}

GoldenThompsonGap ExactEngine::golden_thompson_gap(const LatticeBox& box,
                                                   double t, double beta) {
  GoldenThompsonGap g;
  g.tilde_f = tilde_F(box, t, beta);
  g.f = finite_F(box, t, beta);
  g.gap = g.f - g.tilde_f;
  return g;
}

Complex ExactEngine::clt_charfn(const LatticeBox& box, double t, double beta) {
  check_cap(box, "clt_charfn");
  const SiteList volume = box.sites();
  const int n = static_cast<int>(volume.size());
  const double sqrt_n = std::sqrt(static_cast<double>(n));
  const OperatorMatrix site_factor = site_exp(Complex(0, t / sqrt_n));
  const int d = model_.site_dim();

  if (beta == 0.0) {
    const Complex per_site = site_factor.trace() / static_cast<double>(d);
    const double mean = n * std::real(model_.x.trace()) / d;
    return std::exp(Complex(0, -t * mean / sqrt_n)) *
           std::pow(per_site, n);
  }
  const DensityState state = gibbs_state(box, beta);
  OperatorMatrix x_sum =
      OperatorMatrix::Zero(state.rho.rows(), state.rho.cols());
  for (int p = 0; p < n; ++p) add_embedded(x_sum, model_.x, {p}, d);
  const double mean = std::real(trace_product(state.rho, x_sum));
  const OperatorMatrix tilt = product_over(volume, box, site_factor);
  return std::exp(Complex(0, -t * mean / sqrt_n)) *
         trace_product(state.rho, tilt);
}

double ExactEngine::chi2(const LatticeBox& box, double beta) {
  check_cap(box, "chi2");
  const SiteList volume = box.sites();
  const int n = static_cast<int>(volume.size());
  const int d = model_.site_dim();
  const OperatorMatrix rho = gibbs_state(box, beta).rho;
  const long long dim = rho.rows();

  // Central site by position in lexicographic order.
  const int center = n / 2;

  // P = X_c rho, applying the single-site operator on the left.
  OperatorMatrix p = OperatorMatrix::Zero(dim, dim);
  for (long long col = 0; col < dim; ++col) {
    for (long long row = 0; row < dim; ++row) {
      const int dig = digit_at(row, center, n, d);
      Complex acc = 0;
      long long stride = 1;
      for (int k = 0; k < n - 1 - center; ++k) stride *= d;
      const long long base = row - static_cast<long long>(dig) * stride;
      for (int b = 0; b < d; ++b)
        acc += model_.x(dig, b) * rho(base + b * stride, col);
      p(row, col) = acc;
    }
  }

  auto trace_site_op = [&](const OperatorMatrix& m, int pos) {
    // Tr(M X_pos) for the single-site observable at `pos`.
    Complex acc = 0;
    long long stride = 1;
    for (int k = 0; k < n - 1 - pos; ++k) stride *= d;
    for (long long i = 0; i < dim; ++i) {
      const int dig = digit_at(i, pos, n, d);
      const long long base = i - static_cast<long long>(dig) * stride;
      for (int b = 0; b < d; ++b)
        acc += m(i, base + b * stride) * model_.x(b, dig);
    }
    return acc;
  };

  const double mean_c = std::real(trace_site_op(rho, center));
  double sum = 0;
  for (int i = 0; i < n; ++i) {
    // omega(X_i X_c) = Tr(X_c rho X_i) = Tr(P X_i).
    const double cross = std::real(trace_site_op(p, i));
    const double mean_i = std::real(trace_site_op(rho, i));
    sum += cross - mean_i * mean_c;
  }
  return sum;
}

}  // namespace ldspin
