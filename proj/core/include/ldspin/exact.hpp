#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "ldspin/model.hpp"

namespace ldspin {

struct DensityState {
  OperatorMatrix rho;  // Hermitian, PSD, trace 1
};

struct FiniteVolumeCurve {
  LatticeBox volume;
  std::vector<double> t_grid;
  std::vector<double> values;
};

struct GoldenThompsonGap {
  double tilde_f = 0;
  double f = 0;
  double gap = 0;  // f - tilde_f >= 0
};

// Exact finite-volume oracle: Gibbs states, empirical-average distributions,
// generating functions under free and embedded boundary conventions, tilted
// pressures and the solved tilt, Golden-Thompson gaps, characteristic
// functions and truncated correlations. Everything goes through dense
// diagonalization; Hamiltonian eigensystems are memoized per volume.
class ExactEngine {
 public:
  explicit ExactEngine(Model model, long long dim_cap = kDefaultDimCap);

  const Model& model() const { return model_; }
  long long dim_cap() const { return dim_cap_; }

  DensityState gibbs_state(const LatticeBox& box, double beta);

  // Distribution of X_Lambda / |Lambda| in the Gibbs state.
  DiscreteMeasure empirical_distribution(const LatticeBox& box, double beta);

  // (1/|Lambda|) log [Tr(e^{t X_Lambda} e^{-beta H}) / Tr e^{-beta H}],
  // H = H_Lambda (free boundary conditions).
  double finite_F(const LatticeBox& box, double t, double beta);
  // Same with H = H_outer, operators embedded in the outer volume.
  double finite_F_embedded(const LatticeBox& box, const LatticeBox& outer,
                           double t, double beta);

  FiniteVolumeCurve finite_F_curve(const LatticeBox& box,
                                   const std::vector<double>& t_grid,
                                   double beta);

  // (1/|Lambda|) log Tr e^{-beta H_Lambda - h X_Lambda}.
  double tilted_pressure(const LatticeBox& box, double h, double beta);

  // Solve <X_Lambda/|Lambda|>_{h} = a for h, where the tilted state is
  // e^{-beta H - h X_Lambda}/Tr(...); the expectation averages the one-point
  // observable over all sites. Bisection assumes (and verifies) monotone
  // decrease in h; residual below 1e-10.
  double solve_tilt(double a, const LatticeBox& box, double beta);

  // tilted_pressure(h = -t) - tilted_pressure(0); the finite-volume
  // generating function with the tilt folded into the Hamiltonian.
  double tilde_F(const LatticeBox& box, double t, double beta);

  GoldenThompsonGap golden_thompson_gap(const LatticeBox& box, double t,
                                        double beta);

  // omega(e^{i t W}) with W = (X_Lambda - omega(X_Lambda)) / sqrt(|Lambda|).
  Complex clt_charfn(const LatticeBox& box, double t, double beta);

  // sum_{i in Lambda} [omega(X_i X_c) - omega(X_i) omega(X_c)], c the
  // central site; the finite-volume truncated correlation sum.
  double chi2(const LatticeBox& box, double beta);

 private:
  struct BoxKey {
    int d;
    std::array<int, 3> lengths;
    std::array<int, 3> corner;
    auto operator<=>(const BoxKey&) const = default;
  };
  static BoxKey key_of(const LatticeBox& box);

  const SpectralDecomposition& hamiltonian_eig(const LatticeBox& box);
  // e^{t X} on a single site.
  OperatorMatrix site_exp(Complex t) const;
  // Product over the volume of per-site factors: `factor` on box sites,
  // identity elsewhere.
  OperatorMatrix product_over(const SiteList& volume, const LatticeBox& inner,
                              const OperatorMatrix& factor) const;
  void check_cap(const LatticeBox& box, const char* where) const;
  double log_weighted_trace(const OperatorMatrix& op,
                            const SpectralDecomposition& h, double beta) const;

  Model model_;
  long long dim_cap_;
  SpectralDecomposition x_eig_;
  std::mutex cache_mutex_;
  std::map<BoxKey, std::shared_ptr<const SpectralDecomposition>> eig_cache_;
};

}  // namespace ldspin
