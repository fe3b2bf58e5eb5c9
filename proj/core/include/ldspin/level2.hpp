#pragma once

#include <map>
#include <memory>
#include <vector>

#include "ldspin/ldp.hpp"

namespace ldspin {

// Probability vector on the distinct eigenvalues of X (multiplicities kept
// alongside for the trace-state reference).
struct SpectralSimplexPoint {
  std::vector<double> atoms;
  std::vector<double> weights;
};

// A continuous test function enters only through its values on the spectrum
// of X; this is its restriction, indexed like the distinct eigenvalues.
struct TestFunction {
  std::vector<double> values;
};

struct Rate2Result {
  double value = 0;
  TestFunction maximizer;
  int iterations = 0;
  double gradient_norm = 0;
};

struct ContractionResult {
  double level1 = 0;
  double contracted = 0;
};

struct TypeClassProbability {
  std::vector<int> histogram;  // counts per distinct eigenvalue
  double probability = 0;
};

// Level-2 machinery on the spectral simplex: the generating functional Psi,
// its Legendre transform on measures, the contraction to level 1, and exact
// finite-volume empirical-measure distributions.
class LevelTwo {
 public:
  explicit LevelTwo(Model model, EngineOptions opt = {},
                    std::optional<Certificate> cert = std::nullopt);

  const std::vector<double>& atoms() const;
  const std::vector<int>& multiplicities() const;

  // Psi(f) = F_free computed with the single-site observable f(X) at t = 1.
  double psi(const TestFunction& f, double beta, int K);

  // I2(mu) = sup_f (<mu, f> - Psi(f)) by gradient ascent with backtracking,
  // deterministic start at f = 0, gradient tolerance 1e-8.
  Rate2Result rate2(const SpectralSimplexPoint& mu, double beta, int K);

  // inf { I2(mu) : sum atoms*weights = x } against the level-1 rate at x.
  // Boundary or unattainable x yields the +infinity sentinel in both slots.
  ContractionResult contraction_check(double x, double beta, int K);

  // Exact distribution of the empirical measure over eigenvalue type
  // classes; probabilities from the Gibbs state in the X product eigenbasis.
  std::vector<TypeClassProbability> empirical_measure_distribution(
      ExactEngine& exact, const LatticeBox& box, double beta);

  // Pushforward of the type-class distribution under the mean map.
  DiscreteMeasure pushforward_mean(
      const std::vector<TypeClassProbability>& types, const LatticeBox& box);

  // Directional derivative of Psi at f in direction g: Richardson central
  // differences with steps 1e-3 and 5e-4.
  double gateaux(const TestFunction& f, const TestFunction& g, double beta,
                 int K);

 private:
  struct State;
  std::shared_ptr<State> state_;
};

}  // namespace ldspin
