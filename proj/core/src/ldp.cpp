#include "ldspin/ldp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>

#include "ldspin/parallel.hpp"

namespace ldspin {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double logsumexp_tilt(const RealVector& lambda, double t) {
  double m = -kInf;
  for (Eigen::Index i = 0; i < lambda.size(); ++i)
    m = std::max(m, t * lambda(i));
  double s = 0;
  for (Eigen::Index i = 0; i < lambda.size(); ++i)
    s += std::exp(t * lambda(i) - m);
  return m + std::log(s);
}

}  // namespace

std::vector<double> default_t_grid(double t_max, double step) {
  std::vector<double> grid;
  const long long n = std::llround(t_max / step);
  for (long long i = -n; i <= n; ++i)
    grid.push_back(static_cast<double>(i) * step);
  return grid;
}

void require_convex(const std::vector<double>& grid,
                    const std::vector<double>& values, double tol,
                    const char* what) {
  for (std::size_t i = 1; i + 1 < values.size(); ++i) {
    if (!std::isfinite(values[i - 1]) || !std::isfinite(values[i]) ||
        !std::isfinite(values[i + 1]))
      continue;
    const double hl = grid[i] - grid[i - 1];
    const double hr = grid[i + 1] - grid[i];
    // Nonuniform second difference, normalized to curvature units.
    const double second =
        2.0 *
        ((values[i + 1] - values[i]) / hr - (values[i] - values[i - 1]) / hl) /
        (hl + hr);
    if (second < -tol)
      throw InvariantError(std::string(what) +
                           ": convexity violated at grid index " +
                           std::to_string(i));
  }
}

struct LevelOne::State {
  Model model;
  ClusterExpansion expansion;
  std::optional<Certificate> cert;
  RealVector lambda;
  double log_d;
  std::map<std::pair<double, int>, double> xi0_cache;
  std::mutex xi0_mutex;

  State(Model m, EngineOptions opt, std::optional<Certificate> c)
      : model(m),
        expansion(std::move(m), opt),
        cert(std::move(c)),
        lambda(herm_eig(model.x).eigenvalues),
        log_d(std::log(static_cast<double>(model.site_dim()))) {}

  double xi_value(double t, double beta, int K) {
    if (beta == 0.0) return 0.0;
    const auto coeffs = expansion.xi_coeffs(Complex(t, 0), K);
    double value = 0, beta_pow = 1;
    for (int k = 1; k <= K; ++k) {
      beta_pow *= beta;
      value += std::real(coeffs[k - 1]) * beta_pow;
    }
    return value;
  }

  // Xi at t = 0, cached so grid and refinement sweeps only evaluate the
  // tilted series once per t.
  double xi0(double beta, int K) {
    if (beta == 0.0) return 0.0;
    const auto key = std::make_pair(beta, K);
    {
      std::lock_guard<std::mutex> lock(xi0_mutex);
      auto it = xi0_cache.find(key);
      if (it != xi0_cache.end()) return it->second;
    }
    const double value = xi_value(0.0, beta, K);
    std::lock_guard<std::mutex> lock(xi0_mutex);
    return xi0_cache.emplace(key, value).first->second;
  }
};

LevelOne::LevelOne(Model model, EngineOptions opt,
                   std::optional<Certificate> cert)
    : state_(std::make_shared<State>(std::move(model), opt, std::move(cert))) {}

const Model& LevelOne::model() const { return state_->model; }
const std::optional<Certificate>& LevelOne::certificate() const {
  return state_->cert;
}
ClusterExpansion& LevelOne::expansion() { return state_->expansion; }

double LevelOne::F_free(double t, double beta, int K) {
  auto& s = *state_;
  const double xi_0 = s.xi0(beta, K);
  const double xi_t = s.xi_value(t, beta, K);
  return (xi_t - xi_0) + (logsumexp_tilt(s.lambda, t) - s.log_d);
}

double LevelOne::pressure(double beta, int K) {
  auto& s = *state_;
  return s.log_d + s.xi0(beta, K);
}

GeneratingFunction LevelOne::generating_function(
    const std::vector<double>& t_grid, double beta, int K) {
  GeneratingFunction f;
  f.t_grid = t_grid;
  f.values.resize(t_grid.size());
  f.beta = beta;
  f.order = K;
  f.certificate = state_->cert;
  for (std::size_t i = 0; i < t_grid.size(); ++i)
    f.values[i] = F_free(t_grid[i], beta, K);
  auto state = state_;
  const double xi_0 = state->xi0(beta, K);
  f.evaluator = [state, beta, K, xi_0](double t) {
    const double xi_t = state->xi_value(t, beta, K);
    return (xi_t - xi_0) + (logsumexp_tilt(state->lambda, t) - state->log_d);
  };
  require_convex(f.t_grid, f.values, 1e-9, "generating function");
  return f;
}

RateFunction legendre(const GeneratingFunction& f,
                      const std::vector<double>& x_grid) {
  if (f.t_grid.size() < 3) throw DomainError("legendre: grid too small");
  require_convex(f.t_grid, f.values, 1e-9, "legendre input");

  const std::size_t n = f.t_grid.size();
  const double slope_lo =
      (f.values[1] - f.values[0]) / (f.t_grid[1] - f.t_grid[0]);
  const double slope_hi =
      (f.values[n - 1] - f.values[n - 2]) / (f.t_grid[n - 1] - f.t_grid[n - 2]);

  RateFunction rate;
  rate.x_grid = x_grid;
  rate.values.resize(x_grid.size());

  for (std::size_t xi = 0; xi < x_grid.size(); ++xi) {
    const double x = x_grid[xi];
    // Slopes attained on the grid delimit the conjugate's effective domain.
    if (x < slope_lo - 1e-12 || x > slope_hi + 1e-12) {
      rate.values[xi] = kInf;
      continue;
    }
    std::size_t best = 0;
    double best_val = -kInf;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = x * f.t_grid[i] - f.values[i];
      if (v > best_val) {
        best_val = v;
        best = i;
      }
    }
    double lo = f.t_grid[best == 0 ? 0 : best - 1];
    double hi = f.t_grid[std::min(best + 1, n - 1)];
    if (f.evaluator) {
      // Golden-section to 1e-10 in t on the concave objective.
      const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
      double a = lo, b = hi;
      double c = b - gr * (b - a), d = a + gr * (b - a);
      double fc = x * c - f.evaluator(c), fd = x * d - f.evaluator(d);
      while (b - a > 1e-10) {
        if (fc > fd) {
          b = d;
          d = c;
          fd = fc;
          c = b - gr * (b - a);
          fc = x * c - f.evaluator(c);
        } else {
          a = c;
          c = d;
          fc = fd;
          d = a + gr * (b - a);
          fd = x * d - f.evaluator(d);
        }
      }
      rate.values[xi] = std::max(best_val, std::max(fc, fd));
    } else if (best > 0 && best + 1 < n) {
      // Quadratic fit through the grid max and neighbors.
      const double t0 = f.t_grid[best - 1], t1 = f.t_grid[best],
                   t2 = f.t_grid[best + 1];
      const double g0 = x * t0 - f.values[best - 1],
                   g1 = x * t1 - f.values[best],
                   g2 = x * t2 - f.values[best + 1];
      const double denom = (t0 - t1) * (t0 - t2) * (t1 - t2);
      const double a2 =
          (t2 * (g1 - g0) + t1 * (g0 - g2) + t0 * (g2 - g1)) / denom;
      if (a2 < -1e-15) {
        const double b1 = (t2 * t2 * (g0 - g1) + t1 * t1 * (g2 - g0) +
                           t0 * t0 * (g1 - g2)) /
                          denom;
        const double tstar = std::clamp(-b1 / (2 * a2), t0, t2);
        rate.values[xi] =
            std::max(best_val, a2 * tstar * tstar + b1 * tstar +
                                   (g1 - a2 * t1 * t1 - b1 * t1));
      } else {
        rate.values[xi] = best_val;
      }
    } else {
      rate.values[xi] = best_val;
    }
    if (rate.values[xi] < 0 && rate.values[xi] > -1e-10)
      rate.values[xi] = 0.0;
  }
  return rate;
}

namespace {

// Richardson-refined central second derivative: D(h), D(h/2).
double second_derivative(const std::function<double(double)>& f, double at,
                         double h) {
  auto stencil = [&](double step) {
    return (f(at + step) - 2.0 * f(at) + f(at - step)) / (step * step);
  };
  const double d1 = stencil(h);
  const double d2 = stencil(h / 2);
  return (4.0 * d2 - d1) / 3.0;
}

}  // namespace

double LevelOne::sigma2(double beta, int K, Sigma2Method method,
                        const std::vector<LatticeBox>& volumes) {
  auto& s = *state_;
  switch (method) {
    case Sigma2Method::series: {
      // d^2/dt^2 log Tr e^{tX} at 0 is the trace-state variance, exact.
      const int d = s.model.site_dim();
      double mean = 0, second = 0;
      for (Eigen::Index i = 0; i < s.lambda.size(); ++i) {
        mean += s.lambda(i) / d;
        second += s.lambda(i) * s.lambda(i) / d;
      }
      const double sigma0 = second - mean * mean;
      auto xi_of_t = [&](double t) { return s.xi_value(t, beta, K); };
      return sigma0 + second_derivative(xi_of_t, 0.0, 0.05);
    }
    case Sigma2Method::finite_diff: {
      auto f = [&](double t) { return F_free(t, beta, K); };
      return second_derivative(f, 0.0, 1e-3);
    }
    case Sigma2Method::correlation: {
      if (volumes.empty())
        throw DomainError("sigma2: correlation method needs volumes");
      ExactEngine exact(s.model);
      // Largest volume below the cap.
      const LatticeBox* best = nullptr;
      for (const auto& box : volumes) {
        long long dim = 1;
        bool ok = true;
        for (long long i = 0; i < box.volume(); ++i) {
          dim *= s.model.site_dim();
          if (dim > exact.dim_cap()) {
            ok = false;
            break;
          }
        }
        if (ok && (!best || box.volume() > best->volume())) best = &box;
      }
      if (!best) throw CapError("sigma2: no volume fits the dimension cap");
      return exact.chi2(*best, beta);
    }
  }
  throw DomainError("sigma2: unknown method");
}

RateFunction LevelOne::tilde_I(ExactEngine& exact,
                               const std::vector<double>& a_grid, double beta,
                               const std::vector<LatticeBox>& volumes,
                               TildeIMetadata* metadata) {
  if (volumes.empty()) throw DomainError("tilde_I: volume sequence empty");
  std::vector<LatticeBox> sorted = volumes;
  std::sort(sorted.begin(), sorted.end(),
            [](const LatticeBox& a, const LatticeBox& b) {
              return a.volume() < b.volume();
            });
  const LatticeBox& big = sorted.back();
  auto eval_at = [&](const LatticeBox& box, double a) {
    const double h = exact.solve_tilt(a, box, beta);
    const double p_h = exact.tilted_pressure(box, h, beta);
    const double p_0 = exact.tilted_pressure(box, 0.0, beta);
    return -(h * a + p_h - p_0);
  };
  RateFunction rate;
  rate.x_grid = a_grid;
  rate.values.resize(a_grid.size());
  for (std::size_t i = 0; i < a_grid.size(); ++i)
    rate.values[i] = eval_at(big, a_grid[i]);
  if (metadata) {
    metadata->volume = big.volume();
    metadata->previous_volume = 0;
    if (sorted.size() >= 2) {
      const LatticeBox& prev = sorted[sorted.size() - 2];
      metadata->previous_volume = prev.volume();
      metadata->previous_values.resize(a_grid.size());
      metadata->extrapolated.resize(a_grid.size());
      const double n1 = static_cast<double>(prev.volume());
      const double n2 = static_cast<double>(big.volume());
      for (std::size_t i = 0; i < a_grid.size(); ++i) {
        const double v1 = eval_at(prev, a_grid[i]);
        metadata->previous_values[i] = v1;
        // Richardson in 1/|Lambda|: v = v_inf + c/n.
        metadata->extrapolated[i] =
            (n2 * rate.values[i] - n1 * v1) / (n2 - n1);
      }
    }
  }
  return rate;
}

InequalityReport LevelOne::inequality_check(
    ExactEngine& exact, const LatticeBox& box,
    const std::vector<double>& t_grid, const std::vector<double>& x_grid,
    double beta, int K, const std::vector<LatticeBox>& volumes) {
  InequalityReport report;
  report.t_grid = t_grid;
  for (double t : t_grid) {
    const auto gap = exact.golden_thompson_gap(box, t, beta);
    report.f_values.push_back(gap.f);
    report.tilde_f_values.push_back(gap.tilde_f);
    report.max_f_violation =
        std::max(report.max_f_violation, gap.tilde_f - gap.f);
  }
  report.x_grid = x_grid;
  const auto f = generating_function(default_t_grid(), beta, K);
  const auto rate = legendre(f, x_grid);
  const auto tilde = tilde_I(exact, x_grid, beta, volumes);
  report.rate_values = rate.values;
  report.tilde_rate_values = tilde.values;
  for (std::size_t i = 0; i < x_grid.size(); ++i) {
    if (!std::isfinite(rate.values[i])) continue;
    report.max_i_violation =
        std::max(report.max_i_violation, rate.values[i] - tilde.values[i]);
  }
  {
    // Boundary error bar of the finite-volume I~: only shapes that can
    // straddle the surface contribute.
    const LatticeBox* largest = &volumes.front();
    for (const auto& v : volumes)
      if (v.volume() > largest->volume()) largest = &v;
    const auto& pot = state_->model.potential;
    double per_boundary_site = 0;
    for (std::size_t i = 0; i < pot.terms().size(); ++i)
      if (diameter(pot.terms()[i].shape) >= 1)
        per_boundary_site += static_cast<double>(pot.terms()[i].shape.size()) *
                             pot.term_norm(static_cast<int>(i));
    report.i_allowance =
        1e-8 + 4.0 * beta * per_boundary_site *
                   static_cast<double>(largest->boundary_sites().size()) /
                   static_cast<double>(largest->volume());
  }
  report.pass = report.max_f_violation <= 1e-8 &&
                report.max_i_violation <= report.i_allowance;
  return report;
}

CltReport LevelOne::clt_compare(ExactEngine& exact,
                                const std::vector<LatticeBox>& volumes,
                                const std::vector<double>& t_grid, double beta,
                                int K) {
  CltReport report;
  report.sigma2 = sigma2(beta, K, Sigma2Method::series);
  for (const auto& box : volumes) {
    for (double t : t_grid) {
      const Complex cf = exact.clt_charfn(box, t, beta);
      const double target = std::exp(-t * t * report.sigma2 / 2);
      report.rows.push_back(
          CltRow{box.volume(), t, std::abs(cf - target)});
    }
  }
  return report;
}

Complex product_state_F(Complex z, const OperatorMatrix& x,
                        const OperatorMatrix& a) {
  const OperatorMatrix num = mat_exp(x, z) * mat_exp(a, Complex(-1, 0));
  const Complex den = mat_exp(a, Complex(-1, 0)).trace();
  const Complex ratio = num.trace() / den;
  if (std::abs(ratio) < 1e-300)
    throw DomainError("product_state_F: vanishing trace ratio");
  return std::log(ratio);
}

}  // namespace ldspin
