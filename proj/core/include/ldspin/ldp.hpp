#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "ldspin/cluster_engine.hpp"
#include "ldspin/exact.hpp"

namespace ldspin {

// Sampled generating function t -> F(t) with the truncation order, the
// certificate it was computed under, and an optional continuous evaluator
// used for sub-grid refinement in the Legendre transform.
struct GeneratingFunction {
  std::vector<double> t_grid;
  std::vector<double> values;
  double beta = 0;
  int order = 0;
  std::optional<Certificate> certificate;
  std::function<double(double)> evaluator;
};

struct RateFunction {
  std::vector<double> x_grid;
  std::vector<double> values;  // +infinity marks unattainable slopes
};

// Throws InvariantError when second differences drop below -tol.
void require_convex(const std::vector<double>& grid,
                    const std::vector<double>& values, double tol,
                    const char* what);

// [-t_max, t_max] with the default step 0.05.
std::vector<double> default_t_grid(double t_max = 2.0, double step = 0.05);

// Legendre transform I(x) = sup_t (x t - F(t)) on the sampled grid, refined
// by golden-section search on the continuous evaluator when present (local
// quadratic fit otherwise). x outside the attained slope range maps to the
// +infinity sentinel.
RateFunction legendre(const GeneratingFunction& f,
                      const std::vector<double>& x_grid);

enum class Sigma2Method { series, correlation, finite_diff };

struct TildeIMetadata {
  long long volume = 0;            // largest volume used
  long long previous_volume = 0;   // second largest, 0 if unavailable
  std::vector<double> previous_values;
  std::vector<double> extrapolated;  // Richardson in 1/|Lambda|
};

struct InequalityReport {
  std::vector<double> t_grid;
  std::vector<double> f_values;        // exact finite-volume F
  std::vector<double> tilde_f_values;  // exact finite-volume F~
  std::vector<double> x_grid;
  std::vector<double> rate_values;        // I from the cluster pipeline
  std::vector<double> tilde_rate_values;  // I~ from the exact pipeline
  double max_f_violation = 0;  // max over t of F~ - F
  double max_i_violation = 0;  // max over x of I - I~
  // I~ uses finite-volume pressures, so the comparison carries an
  // O(|boundary|/|volume|) error bar; 1e-8 plus the boundary estimate.
  double i_allowance = 1e-8;
  bool pass = false;
};

struct CltRow {
  long long volume = 0;
  double t = 0;
  double deviation = 0;
};

struct CltReport {
  double sigma2 = 0;
  std::vector<CltRow> rows;
};

// Level-1 pipeline head: assembles F from the cluster series, exposes the
// pressure, variance routes and the exact-vs-series comparisons.
class LevelOne {
 public:
  LevelOne(Model model, EngineOptions opt = {},
           std::optional<Certificate> cert = std::nullopt);

  const Model& model() const;
  const std::optional<Certificate>& certificate() const;
  ClusterExpansion& expansion();

  // F_f(t) = Xi_f(t) - Xi_f(0) + log Tr e^{tX} - log d; exactly 0 at t = 0.
  double F_free(double t, double beta, int K);
  // P(beta Phi) = log d + Xi_f(0).
  double pressure(double beta, int K);

  GeneratingFunction generating_function(const std::vector<double>& t_grid,
                                         double beta, int K);

  // Variance of the empirical average:
  //   series      - exact second derivative of log Tr e^{tX} plus Richardson
  //                 differentiation of the cluster series (h = 0.05, 0.025);
  //   finite_diff - Richardson central differences on assembled F_free
  //                 (h = 1e-3, 5e-4);
  //   correlation - exact.chi2 at the largest feasible volume.
  double sigma2(double beta, int K, Sigma2Method method,
                const std::vector<LatticeBox>& volumes = {});

  // I~(a) = -[h_a a + P(Phi, h_a) - P(Phi)] at the largest volume of the
  // sequence, with Richardson metadata from the second largest.
  RateFunction tilde_I(ExactEngine& exact, const std::vector<double>& a_grid,
                       double beta, const std::vector<LatticeBox>& volumes,
                       TildeIMetadata* metadata = nullptr);

  // Pointwise F~ <= F (exact engine) and I~ >= I (exact vs series pipelines).
  InequalityReport inequality_check(ExactEngine& exact, const LatticeBox& box,
                                    const std::vector<double>& t_grid,
                                    const std::vector<double>& x_grid,
                                    double beta, int K,
                                    const std::vector<LatticeBox>& volumes);

  // |omega(e^{itW}) - e^{-t^2 sigma^2/2}| along a volume sequence.
  CltReport clt_compare(ExactEngine& exact,
                        const std::vector<LatticeBox>& volumes,
                        const std::vector<double>& t_grid, double beta, int K);

 private:
  struct State;
  std::shared_ptr<State> state_;
};

// Product-state generating function F(z) = log(Tr[e^{zX} e^{-A}]/Tr e^{-A});
// exact and volume independent.
Complex product_state_F(Complex z, const OperatorMatrix& x,
                        const OperatorMatrix& a);

}  // namespace ldspin
