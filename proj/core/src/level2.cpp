#include "ldspin/level2.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ldspin {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();


}  // namespace

struct LevelTwo::State {
  Model model;
  ClusterExpansion expansion;
  LevelOne level1;
  std::vector<double> atoms;         // distinct eigenvalues, ascending
  std::vector<int> multiplicities;   // per atom
  std::vector<int> basis_to_atom;    // basis index -> atom index
  double log_d;

  State(Model m, EngineOptions opt, std::optional<Certificate> cert)
      : model(m),
        expansion(m, opt),
        level1(std::move(m), opt, std::move(cert)),
        log_d(std::log(static_cast<double>(model.site_dim()))) {
    const auto eig = herm_eig(model.x);
    for (Eigen::Index i = 0; i < eig.eigenvalues.size(); ++i) {
      if (atoms.empty() ||
          eig.eigenvalues(i) - atoms.back() > kAtomMergeTol) {
        atoms.push_back(eig.eigenvalues(i));
        multiplicities.push_back(1);
      } else {
        ++multiplicities.back();
      }
      basis_to_atom.push_back(static_cast<int>(atoms.size()) - 1);
    }
  }

  double psi_value(const std::vector<double>& f_values, double beta, int K) {
    const int d = model.site_dim();
    std::vector<Complex> g(d);
    for (int j = 0; j < d; ++j) g[j] = Complex(f_values[basis_to_atom[j]], 0);
    double series = 0;
    if (beta != 0.0) {
      const auto coeffs = expansion.xi_coeffs_general(g, K);
      const auto base = expansion.xi_coeffs_general(
          std::vector<Complex>(d, Complex(0, 0)), K);
      double beta_pow = 1;
      for (int k = 1; k <= K; ++k) {
        beta_pow *= beta;
        series += std::real(coeffs[k - 1] - base[k - 1]) * beta_pow;
      }
    }
    // log (1/d) sum_j e^{f(lambda_j)} over basis states.
    double fmax = -kInf;
    for (int j = 0; j < d; ++j)
      fmax = std::max(fmax, f_values[basis_to_atom[j]]);
    double sum = 0;
    for (int j = 0; j < d; ++j)
      sum += std::exp(f_values[basis_to_atom[j]] - fmax);
    return series + fmax + std::log(sum) - log_d;
  }
};

LevelTwo::LevelTwo(Model model, EngineOptions opt,
                   std::optional<Certificate> cert)
    : state_(std::make_shared<State>(std::move(model), opt, std::move(cert))) {}

const std::vector<double>& LevelTwo::atoms() const { return state_->atoms; }
const std::vector<int>& LevelTwo::multiplicities() const {
  return state_->multiplicities;
}

double LevelTwo::psi(const TestFunction& f, double beta, int K) {
  if (f.values.size() != state_->atoms.size())
    throw DomainError("psi: test function must match the distinct spectrum");
  return state_->psi_value(f.values, beta, K);
}

Rate2Result LevelTwo::rate2(const SpectralSimplexPoint& mu, double beta,
                            int K) {
  auto& s = *state_;
  const std::size_t m = s.atoms.size();
  // Validate the simplex point.
  double wsum = 0;
  for (double w : mu.weights) {
    if (w < -1e-12) throw DomainError("rate2: negative weight");
    wsum += w;
  }
  if (std::abs(wsum - 1.0) > 1e-10)
    throw DomainError("rate2: weights must sum to 1");
  if (mu.atoms.size() != mu.weights.size())
    throw DomainError("rate2: atoms/weights size mismatch");

  // Measures charging points off the spectrum admit no finite supremum.
  std::vector<double> weights(m, 0.0);
  for (std::size_t i = 0; i < mu.atoms.size(); ++i) {
    if (mu.weights[i] <= 1e-14) continue;
    bool matched = false;
    for (std::size_t k = 0; k < m; ++k)
      if (std::abs(mu.atoms[i] - s.atoms[k]) <= kAtomMergeTol) {
        weights[k] += mu.weights[i];
        matched = true;
        break;
      }
    if (!matched) {
      Rate2Result r;
      r.value = kInf;
      return r;
    }
  }

  auto objective = [&](const std::vector<double>& f) {
    double dot = 0;
    for (std::size_t k = 0; k < m; ++k) dot += weights[k] * f[k];
    return dot - s.psi_value(f, beta, K);
  };
  auto gradient = [&](const std::vector<double>& f) {
    std::vector<double> g(m);
    const double h = 1e-5;
    for (std::size_t k = 0; k < m; ++k) {
      auto fp = f, fm = f;
      fp[k] += h;
      fm[k] -= h;
      g[k] = (objective(fp) - objective(fm)) / (2 * h);
    }
    return g;
  };

  std::vector<double> f(m, 0.0);
  double value = objective(f);
  double grad_norm = 0;
  int iter = 0;
  for (; iter < 500; ++iter) {
    const auto g = gradient(f);
    grad_norm = 0;
    for (double gi : g) grad_norm += gi * gi;
    grad_norm = std::sqrt(grad_norm);
    if (grad_norm <= 1e-8) break;
    double step = 1.0;
    bool improved = false;
    for (int bt = 0; bt < 40; ++bt) {
      auto trial = f;
      for (std::size_t k = 0; k < m; ++k) trial[k] += step * g[k];
      const double tv = objective(trial);
      if (tv > value + 1e-16) {
        f = std::move(trial);
        value = tv;
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) break;
  }
  Rate2Result r;
  r.value = (value < 0 && value > -1e-10) ? 0.0 : value;
  r.maximizer.values = f;
  r.iterations = iter;
  r.gradient_norm = grad_norm;
  return r;
}

ContractionResult LevelTwo::contraction_check(double x, double beta, int K) {
  auto& s = *state_;
  const std::size_t m = s.atoms.size();
  const double lo = s.atoms.front(), hi = s.atoms.back();
  if (!(x > lo + 1e-12 && x < hi - 1e-12)) {
    // Boundary handling mirrors the level-1 sentinel.
    return ContractionResult{kInf, kInf};
  }

  const auto f = s.level1.generating_function(default_t_grid(), beta, K);
  const auto rate = legendre(f, {x});
  ContractionResult result;
  result.level1 = rate.values[0];

  if (m == 2) {
    // The constraint set is a single point.
    const double w1 = (x - lo) / (hi - lo);
    SpectralSimplexPoint mu{s.atoms, {1.0 - w1, w1}};
    result.contracted = rate2(mu, beta, K).value;
    return result;
  }

  // Projected gradient over {mu >= 0, sum mu = 1, sum atoms*mu = x}.
  auto project = [&](std::vector<double> w) {
    // Dykstra-style alternation between the affine constraints and the
    // nonnegative orthant.
    for (int round = 0; round < 200; ++round) {
      // Affine projection: least-squares correction on (1, atoms).
      double c0 = 0, c1 = 0;
      double s11 = static_cast<double>(m), s12 = 0, s22 = 0;
      for (std::size_t k = 0; k < m; ++k) {
        c0 += w[k];
        c1 += s.atoms[k] * w[k];
        s12 += s.atoms[k];
        s22 += s.atoms[k] * s.atoms[k];
      }
      const double r0 = c0 - 1.0, r1 = c1 - x;
      const double det = s11 * s22 - s12 * s12;
      const double l0 = (s22 * r0 - s12 * r1) / det;
      const double l1 = (s11 * r1 - s12 * r0) / det;
      double clipped = 0;
      for (std::size_t k = 0; k < m; ++k) {
        w[k] -= l0 + l1 * s.atoms[k];
        if (w[k] < 0) {
          clipped += -w[k];
          w[k] = 0;
        }
      }
      if (clipped < 1e-14 && std::abs(r0) < 1e-12 && std::abs(r1) < 1e-12)
        break;
    }
    return w;
  };

  // Feasible start: linear interpolation between the extreme atoms.
  std::vector<double> w(m, 0.0);
  {
    const double w_hi = (x - lo) / (hi - lo);
    w[0] = 1.0 - w_hi;
    w[m - 1] = w_hi;
    w = project(w);
  }
  SpectralSimplexPoint mu{s.atoms, w};
  Rate2Result inner = rate2(mu, beta, K);
  double best = inner.value;
  for (int iter = 0; iter < 200; ++iter) {
    // Envelope gradient: d I2 / d mu_k = f*_k at the maximizer.
    const auto& g = inner.maximizer.values;
    double step = 0.5;
    bool improved = false;
    for (int bt = 0; bt < 30; ++bt) {
      auto trial = w;
      for (std::size_t k = 0; k < m; ++k) trial[k] -= step * g[k];
      trial = project(trial);
      SpectralSimplexPoint tmu{s.atoms, trial};
      const auto tr = rate2(tmu, beta, K);
      if (tr.value < best - 1e-12) {
        w = std::move(trial);
        inner = tr;
        best = tr.value;
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) break;
    if (step < 1e-7) break;
  }
  result.contracted = best;
  return result;
}

std::vector<TypeClassProbability> LevelTwo::empirical_measure_distribution(
    ExactEngine& exact, const LatticeBox& box, double beta) {
  auto& s = *state_;
  const int d = s.model.site_dim();
  const int n = static_cast<int>(box.volume());
  long long dim = 1;
  for (int i = 0; i < n; ++i) {
    dim *= d;
    if (dim > exact.dim_cap())
      throw CapError("empirical_measure_distribution: dimension cap exceeded");
  }

  // Diagonal of the Gibbs state in the X product eigenbasis.
  std::vector<double> diag(dim);
  if (beta == 0.0) {
    std::fill(diag.begin(), diag.end(), 1.0 / static_cast<double>(dim));
  } else {
    const auto x_eig = herm_eig(s.model.x);
    OperatorMatrix u = OperatorMatrix::Identity(1, 1);
    for (int i = 0; i < n; ++i) u = kron(u, x_eig.eigenvectors).eval();
    const OperatorMatrix rho = exact.gibbs_state(box, beta).rho;
    const OperatorMatrix rot = u.adjoint() * rho * u;
    for (long long i = 0; i < dim; ++i) diag[i] = std::real(rot(i, i));
  }

  std::map<std::vector<int>, double> hist;
  std::vector<int> type(s.atoms.size());
  for (long long idx = 0; idx < dim; ++idx) {
    std::fill(type.begin(), type.end(), 0);
    long long rem = idx;
    for (int p = 0; p < n; ++p) {
      const int digit = static_cast<int>(rem % d);
      ++type[s.basis_to_atom[digit]];
      rem /= d;
    }
    hist[type] += diag[idx];
  }
  std::vector<TypeClassProbability> out;
  out.reserve(hist.size());
  for (const auto& [histogram, probability] : hist)
    out.push_back(TypeClassProbability{histogram, probability});
  return out;
}

DiscreteMeasure LevelTwo::pushforward_mean(
    const std::vector<TypeClassProbability>& types, const LatticeBox& box) {
  auto& s = *state_;
  const double n = static_cast<double>(box.volume());
  std::map<long long, double> by_key;  // quantized mean -> weight
  std::map<long long, double> mean_of;
  for (const auto& t : types) {
    double mean = 0;
    for (std::size_t k = 0; k < t.histogram.size(); ++k)
      mean += t.histogram[k] * s.atoms[k];
    mean /= n;
    const long long key = std::llround(mean / kAtomMergeTol);
    by_key[key] += t.probability;
    mean_of[key] = mean;
  }
  DiscreteMeasure out;
  for (const auto& [key, w] : by_key) {
    out.atoms.push_back(mean_of[key]);
    out.weights.push_back(w);
  }
  return out;
}

double LevelTwo::gateaux(const TestFunction& f, const TestFunction& g,
                         double beta, int K) {
  auto& s = *state_;
  if (f.values.size() != s.atoms.size() || g.values.size() != s.atoms.size())
    throw DomainError("gateaux: dimension mismatch");
  auto psi_at = [&](double t) {
    std::vector<double> fv(f.values);
    for (std::size_t k = 0; k < fv.size(); ++k) fv[k] += t * g.values[k];
    return s.psi_value(fv, beta, K);
  };
  auto central = [&](double step) {
    return (psi_at(step) - psi_at(-step)) / (2 * step);
  };
  const double d1 = central(1e-3);
  const double d2 = central(5e-4);
  return (4.0 * d2 - d1) / 3.0;
}

}  // namespace ldspin
