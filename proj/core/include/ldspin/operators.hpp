#pragma once

#include <Eigen/Dense>
#include <complex>
#include <functional>
#include <vector>

#include "ldspin/errors.hpp"

namespace ldspin {

using Complex = std::complex<double>;
// Dense complex square matrices carry every operator in the toolkit:
// single-site observables, interaction terms, Hamiltonians, density matrices.
using OperatorMatrix = Eigen::MatrixXcd;
using RealVector = Eigen::VectorXd;

// Relative Hermiticity tolerance; inputs failing it are rejected, not
// symmetrized, so model-construction bugs surface early.
inline constexpr double kHermitianTol = 1e-10;
// Eigenvalues closer than this merge into one spectral atom.
inline constexpr double kAtomMergeTol = 1e-9;

bool is_hermitian(const OperatorMatrix& a, double rel_tol = kHermitianTol);
void require_hermitian(const OperatorMatrix& a, const char* where);

OperatorMatrix pauli_x();
OperatorMatrix pauli_y();
OperatorMatrix pauli_z();

// Eigensystem of a Hermitian matrix: eigenvalues ascending, eigenvector
// columns unitary with a deterministic phase (first nonzero component of
// each column is real positive).
struct SpectralDecomposition {
  RealVector eigenvalues;
  OperatorMatrix eigenvectors;
};

// Right polar factorization X = J * absX with absX = sqrt(X^* X) >= 0.
struct PolarParts {
  OperatorMatrix J;
  OperatorMatrix absX;
};

// Probability measure on a spectrum: distinct ascending atoms with
// nonnegative weights summing to one.
struct DiscreteMeasure {
  std::vector<double> atoms;
  std::vector<double> weights;

  double mean() const { return moment(1); }
  double moment(int k) const;
  double variance() const;
};

// Kronecker product, left factor most significant.
OperatorMatrix kron(const OperatorMatrix& a, const OperatorMatrix& b);

// Embed `op` acting on tensor slots `positions` (each in [0, volume_size),
// strictly increasing; slot 0 is the most significant factor) into the
// `site_dim^volume_size`-dimensional product space.
OperatorMatrix embed_positions(const OperatorMatrix& op,
                               const std::vector<int>& positions,
                               int volume_size, int site_dim);

// acc += scale * embed_positions(op, ...), without materializing a temporary.
void add_embedded(OperatorMatrix& acc, const OperatorMatrix& op,
                  const std::vector<int>& positions, int site_dim,
                  Complex scale = Complex(1.0, 0.0));

// Partial trace over the slots NOT listed in `keep` (strictly increasing).
OperatorMatrix partial_trace_keep(const OperatorMatrix& a,
                                  const std::vector<int>& keep,
                                  int volume_size, int site_dim);

SpectralDecomposition herm_eig(const OperatorMatrix& a);

// exp(s*A) for Hermitian A via the spectral decomposition; Hermitian
// positive definite for real s.
OperatorMatrix mat_exp(const OperatorMatrix& a, Complex s = Complex(1.0, 0.0));

// f(A) = U diag(f(lambda)) U^dagger; f must be finite on the spectrum.
OperatorMatrix func_calc(const OperatorMatrix& a,
                         const std::function<double(double)>& f);

// Spectral norm (largest |eigenvalue|) of a Hermitian matrix.
double spectral_norm(const OperatorMatrix& a);

// Distribution of a Hermitian observable in a state: weight of eigenvalue
// lambda is Tr(rho P_lambda); atoms within kAtomMergeTol are merged.
DiscreteMeasure spectral_distribution(const OperatorMatrix& a,
                                      const OperatorMatrix& rho);

void require_density_matrix(const OperatorMatrix& rho, const char* where);

// Right polar decomposition; requires Ker(X) = {0} (smallest singular value
// above 1e-12).
PolarParts polar_parts(const OperatorMatrix& x);

// Norm of the functional B -> Tr(X B)/Tr(X), equal to Tr|X| / |Tr X|, and
// the unitary witness C = J^* that attains it.
struct PsiNormResult {
  double value;
  OperatorMatrix witness;
};
PsiNormResult psi_norm_full(const OperatorMatrix& x);
double psi_norm(const OperatorMatrix& x);

}  // namespace ldspin
