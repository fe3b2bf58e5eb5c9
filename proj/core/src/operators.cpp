#include "ldspin/operators.hpp"

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

}  // namespace

bool is_hermitian(const OperatorMatrix& a, double rel_tol) {
  if (a.rows() != a.cols()) return false;
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  return (a - a.adjoint()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

void require_hermitian(const OperatorMatrix& a, const char* where) {
  if (!is_hermitian(a))
    throw DomainError(std::string(where) + ": matrix is not Hermitian");
}

OperatorMatrix pauli_x() {
  OperatorMatrix m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}

OperatorMatrix pauli_y() {
  OperatorMatrix m(2, 2);
  m << Complex(0, 0), Complex(0, -1), Complex(0, 1), Complex(0, 0);
  return m;
}

OperatorMatrix pauli_z() {
  OperatorMatrix m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}

double DiscreteMeasure::moment(int k) const {
  double s = 0;
  for (std::size_t i = 0; i < atoms.size(); ++i)
    s += std::pow(atoms[i], k) * weights[i];
  return s;
}

double DiscreteMeasure::variance() const {
  const double m = mean();
  return moment(2) - m * m;
}

OperatorMatrix kron(const OperatorMatrix& a, const OperatorMatrix& b) {
  OperatorMatrix r(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      r.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return r;
}

void add_embedded(OperatorMatrix& acc, const OperatorMatrix& op,
                  const std::vector<int>& positions, int site_dim,
                  Complex scale) {
  const int n = [&] {
    long long dim = acc.rows();
    int count = 0;
    while (dim > 1) {
      dim /= site_dim;
      ++count;
    }
    return count;
  }();
  const int m = static_cast<int>(positions.size());
  const long long dm = ipow(site_dim, m);
  if (op.rows() != dm || op.cols() != dm)
    throw DomainError("embed: operator dimension does not match its support");
  if (acc.rows() != ipow(site_dim, n))
    throw DomainError("embed: volume dimension is not a power of site_dim");
  for (int k = 0; k + 1 < m; ++k)
    if (positions[k] >= positions[k + 1])
      throw DomainError("embed: support positions must be strictly increasing");
  if (m > 0 && (positions.front() < 0 || positions.back() >= n))
    throw DomainError("embed: support not contained in the volume");

  // Slot p has stride site_dim^(n-1-p); slot 0 is most significant.
  std::vector<long long> stride(m);
  for (int k = 0; k < m; ++k) stride[k] = ipow(site_dim, n - 1 - positions[k]);

  // Index offsets of all support digit patterns.
  std::vector<long long> offset(dm, 0);
  for (long long s = 0; s < dm; ++s) {
    long long rem = s;
    for (int k = m - 1; k >= 0; --k) {
      offset[s] += (rem % site_dim) * stride[k];
      rem /= site_dim;
    }
  }

  // Enumerate the complement ("rest") indices by skipping support strides.
  std::vector<int> rest;
  for (int p = 0; p < n; ++p)
    if (!std::binary_search(positions.begin(), positions.end(), p))
      rest.push_back(p);
  const long long rest_count = ipow(site_dim, static_cast<int>(rest.size()));
  std::vector<long long> rest_stride(rest.size());
  for (std::size_t k = 0; k < rest.size(); ++k)
    rest_stride[k] = ipow(site_dim, n - 1 - rest[k]);

  for (long long r = 0; r < rest_count; ++r) {
    long long base = 0, rem = r;
    for (int k = static_cast<int>(rest.size()) - 1; k >= 0; --k) {
      base += (rem % site_dim) * rest_stride[k];
      rem /= site_dim;
    }
    for (long long i = 0; i < dm; ++i)
      for (long long j = 0; j < dm; ++j)
        acc(base + offset[i], base + offset[j]) += scale * op(i, j);
  }
}

OperatorMatrix embed_positions(const OperatorMatrix& op,
                               const std::vector<int>& positions,
                               int volume_size, int site_dim) {
  const long long dim = ipow(site_dim, volume_size);
  OperatorMatrix r = OperatorMatrix::Zero(dim, dim);
  add_embedded(r, op, positions, site_dim);
  return r;
}

OperatorMatrix partial_trace_keep(const OperatorMatrix& a,
                                  const std::vector<int>& keep,
                                  int volume_size, int site_dim) {
  const int m = static_cast<int>(keep.size());
  const long long dm = ipow(site_dim, m);
  OperatorMatrix r = OperatorMatrix::Zero(dm, dm);
  std::vector<long long> stride(m);
  for (int k = 0; k < m; ++k)
    stride[k] = ipow(site_dim, volume_size - 1 - keep[k]);
  std::vector<long long> offset(dm, 0);
  for (long long s = 0; s < dm; ++s) {
    long long rem = s;
    for (int k = m - 1; k >= 0; --k) {
      offset[s] += (rem % site_dim) * stride[k];
      rem /= site_dim;
    }
  }
  std::vector<int> rest;
  for (int p = 0; p < volume_size; ++p)
    if (!std::binary_search(keep.begin(), keep.end(), p)) rest.push_back(p);
  std::vector<long long> rest_stride(rest.size());
  for (std::size_t k = 0; k < rest.size(); ++k)
    rest_stride[k] = ipow(site_dim, volume_size - 1 - rest[k]);
  const long long rest_count = ipow(site_dim, static_cast<int>(rest.size()));
  for (long long t = 0; t < rest_count; ++t) {
    long long base = 0, rem = t;
    for (int k = static_cast<int>(rest.size()) - 1; k >= 0; --k) {
      base += (rem % site_dim) * rest_stride[k];
      rem /= site_dim;
    }
    for (long long i = 0; i < dm; ++i)
      for (long long j = 0; j < dm; ++j)
        r(i, j) += a(base + offset[i], base + offset[j]);
  }
  return r;
}

SpectralDecomposition herm_eig(const OperatorMatrix& a) {
  require_hermitian(a, "herm_eig");
  Eigen::SelfAdjointEigenSolver<OperatorMatrix> solver(
      ((a + a.adjoint()) * 0.5).eval());
  if (solver.info() != Eigen::Success)
    throw InvariantError("herm_eig: eigensolver failed to converge");
  SpectralDecomposition dec{solver.eigenvalues(), solver.eigenvectors()};
  // Deterministic phase: first nonzero component of each column real positive.
  for (Eigen::Index c = 0; c < dec.eigenvectors.cols(); ++c) {
    auto col = dec.eigenvectors.col(c);
    const double colmax = col.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < col.size(); ++i) {
      if (std::abs(col(i)) > 1e-12 * std::max(1.0, colmax)) {
        col *= std::conj(col(i)) / std::abs(col(i));
        break;
      }
    }
  }
  return dec;
}

OperatorMatrix mat_exp(const OperatorMatrix& a, Complex s) {
  const auto dec = herm_eig(a);
  Eigen::VectorXcd d(dec.eigenvalues.size());
  for (Eigen::Index i = 0; i < d.size(); ++i)
    d(i) = std::exp(s * dec.eigenvalues(i));
  return dec.eigenvectors * d.asDiagonal() * dec.eigenvectors.adjoint();
}

OperatorMatrix func_calc(const OperatorMatrix& a,
                         const std::function<double(double)>& f) {
  const auto dec = herm_eig(a);
  Eigen::VectorXcd d(dec.eigenvalues.size());
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    const double v = f(dec.eigenvalues(i));
    if (!std::isfinite(v))
      throw DomainError("func_calc: f undefined at eigenvalue " +
                        std::to_string(dec.eigenvalues(i)));
    d(i) = v;
  }
  return dec.eigenvectors * d.asDiagonal() * dec.eigenvectors.adjoint();
}

double spectral_norm(const OperatorMatrix& a) {
  const auto dec = herm_eig(a);
  if (dec.eigenvalues.size() == 0) return 0.0;
  return std::max(std::abs(dec.eigenvalues(0)),
                  std::abs(dec.eigenvalues(dec.eigenvalues.size() - 1)));
}

void require_density_matrix(const OperatorMatrix& rho, const char* where) {
  require_hermitian(rho, where);
  if (std::abs(rho.trace() - Complex(1.0, 0.0)) > 1e-10)
    throw DomainError(std::string(where) + ": state trace differs from 1");
  Eigen::SelfAdjointEigenSolver<OperatorMatrix> solver(
      ((rho + rho.adjoint()) * 0.5).eval());
  if (solver.eigenvalues().minCoeff() < -1e-12)
    throw DomainError(std::string(where) + ": state is not positive");
}

DiscreteMeasure spectral_distribution(const OperatorMatrix& a,
                                      const OperatorMatrix& rho) {
  require_density_matrix(rho, "spectral_distribution");
  const auto dec = herm_eig(a);
  DiscreteMeasure out;
  Eigen::Index i = 0;
  while (i < dec.eigenvalues.size()) {
    Eigen::Index j = i;
    double w = 0;
    // Merge numerically degenerate eigenvalues into one atom.
    while (j < dec.eigenvalues.size() &&
           dec.eigenvalues(j) - dec.eigenvalues(i) <= kAtomMergeTol) {
      w += std::real(dec.eigenvectors.col(j).dot(rho * dec.eigenvectors.col(j)));
      ++j;
    }
    out.atoms.push_back(dec.eigenvalues(i));
    out.weights.push_back(std::max(w, 0.0));
    i = j;
  }
  return out;
}

PolarParts polar_parts(const OperatorMatrix& x) {
  if (x.rows() != x.cols()) throw DomainError("polar_parts: matrix not square");
  const auto dec = herm_eig((x.adjoint() * x).eval());
  Eigen::VectorXd sv(dec.eigenvalues.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    sv(i) = std::sqrt(std::max(dec.eigenvalues(i), 0.0));
  if (sv.minCoeff() <= 1e-12)
    throw DomainError("polar_parts: singular matrix (Ker(X) != {0})");
  Eigen::VectorXcd d(sv.size()), dinv(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    d(i) = sv(i);
    dinv(i) = 1.0 / sv(i);
  }
  PolarParts p;
  p.absX = dec.eigenvectors * d.asDiagonal() * dec.eigenvectors.adjoint();
  p.J = x * (dec.eigenvectors * dinv.asDiagonal() * dec.eigenvectors.adjoint());
  return p;
}

PsiNormResult psi_norm_full(const OperatorMatrix& x) {
  const Complex tr = x.trace();
  if (std::abs(tr) < 1e-12)
    throw DomainError("psi_norm: unbounded functional (|Tr X| < 1e-12)");
  const PolarParts p = polar_parts(x);
  const double tr_abs = std::real(p.absX.trace());
  return {tr_abs / std::abs(tr), p.J.adjoint()};
}

double psi_norm(const OperatorMatrix& x) { return psi_norm_full(x).value; }

}  // namespace ldspin
