#pragma once

// Complex-matrix kernel: sign and color structure, norms, unitarity
// certification, the geodesic exponential and Hadamard dephasing.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ahm/error.hpp"

namespace ahm {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Numerical thresholds used across the library. All of them can be
/// overridden per call (and from the CLI with `--tol name=value`).
struct Tolerances {
  double zero = 1e-12;      // entry modulus at or below this is a structural zero
  double unitary = 1e-10;   // ||UU* - I||_F
  double cluster = 1e-8;    // color clustering of moduli
  double crit = 1e-9;       // ||X - X*||_F for criticality
  double neg = 1e-8;        // negative curvature threshold

  /// Sets a tolerance by its CLI name; returns false for unknown names.
  bool set(const std::string& name, double value) {
    if (name == "zero") zero = value;
    else if (name == "unitary") unitary = value;
    else if (name == "cluster") cluster = value;
    else if (name == "crit") crit = value;
    else if (name == "neg") neg = value;
    else return false;
    return true;
  }
};

inline constexpr Tolerances kDefaultTolerances{};

inline bool all_finite(const Matrix& m) {
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i)
      if (!std::isfinite(m(i, j).real()) || !std::isfinite(m(i, j).imag())) return false;
  return true;
}

/// Validates the ComplexMatrix invariants: square, nonempty, finite entries.
inline void require_square_finite(const Matrix& m) {
  if (m.rows() == 0 || m.rows() != m.cols())
    throw Error(ErrorKind::NotSquare, "expected a nonempty square matrix, got " +
                                          std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  if (!all_finite(m)) throw Error(ErrorKind::NonFinite, "matrix has NaN or infinite entries");
}

inline double unitarity_residual(const Matrix& m) {
  return (m * m.adjoint() - Matrix::Identity(m.rows(), m.cols())).norm();
}

inline double hermiticity_residual(const Matrix& m) { return (m - m.adjoint()).norm(); }

inline double skewness_residual(const Matrix& m) { return (m + m.adjoint()).norm(); }

inline bool is_real(const Matrix& m, double tol = 1e-12) {
  return m.imag().cwiseAbs().maxCoeff() <= tol;
}

/// A square complex matrix whose unitarity residual was measured on
/// construction. The residual is always recomputed, never taken from input.
class UnitaryCandidate {
 public:
  static UnitaryCandidate certify(Matrix m, double tol = kDefaultTolerances.unitary) {
    require_square_finite(m);
    const double residual = ahm::unitarity_residual(m);
    if (!(residual <= tol))
      throw Error(ErrorKind::NotUnitary,
                  "unitarity residual " + std::to_string(residual) + " exceeds " + std::to_string(tol));
    return UnitaryCandidate(std::move(m), residual);
  }

  const Matrix& matrix() const noexcept { return matrix_; }
  double unitarity_residual() const noexcept { return residual_; }
  Index size() const noexcept { return matrix_.rows(); }

 private:
  UnitaryCandidate(Matrix m, double residual) : matrix_(std::move(m)), residual_(residual) {}

  Matrix matrix_;
  double residual_;
};

/// Entrywise phases S_ij = M_ij / |M_ij|.
struct SignMatrix {
  Matrix phases;
};

inline void require_nonzero_entries(const Matrix& m, double tol_zero = kDefaultTolerances.zero) {
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i)
      if (std::abs(m(i, j)) <= tol_zero) throw ZeroEntryError(i, j);
}

inline SignMatrix sign_matrix(const Matrix& m, double tol_zero = kDefaultTolerances.zero) {
  require_square_finite(m);
  require_nonzero_entries(m, tol_zero);
  Matrix s(m.rows(), m.cols());
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i) s(i, j) = m(i, j) / std::abs(m(i, j));
  return {std::move(s)};
}

inline double one_norm(const Matrix& m) { return m.cwiseAbs().sum(); }

struct ColorComponent {
  double modulus;  // r > 0
  Matrix support;  // entries in {0} or on the unit circle
};

/// Partition of the nonzero entries by modulus: M = sum_r r * U_r.
struct ColorDecomposition {
  std::vector<ColorComponent> colors;  // ascending modulus
  double tol_cluster = kDefaultTolerances.cluster;

  Matrix reconstruct() const {
    if (colors.empty()) return {};
    Matrix out = Matrix::Zero(colors.front().support.rows(), colors.front().support.cols());
    for (const auto& c : colors) out += c.modulus * c.support;
    return out;
  }
};

/// Clusters entry moduli by single linkage on the sorted list: consecutive
/// moduli within `tol_cluster` share a color whose representative is the
/// cluster mean. Exact zeros are left out of every support.
inline ColorDecomposition color_decomposition(const Matrix& m,
                                              double tol_cluster = kDefaultTolerances.cluster) {
  require_square_finite(m);
  if (!(tol_cluster >= 0.0)) throw Error(ErrorKind::InvalidArgument, "tol_cluster must be >= 0");

  struct Entry {
    double modulus;
    Index i, j;
  };
  std::vector<Entry> entries;
  for (Index j = 0; j < m.cols(); ++j) {
    for (Index i = 0; i < m.rows(); ++i) {
      const double r = std::abs(m(i, j));
      if (r == 0.0) continue;
      if (r <= tol_cluster)
        throw Error(ErrorKind::AmbiguousClustering,
                    "entry modulus " + std::to_string(r) + " is within tol_cluster of zero");
      entries.push_back({r, i, j});
    }
  }
  std::sort(entries.begin(), entries.end(),
            [](const Entry& a, const Entry& b) { return a.modulus < b.modulus; });

  ColorDecomposition out;
  out.tol_cluster = tol_cluster;
  std::size_t begin = 0;
  while (begin < entries.size()) {
    std::size_t end = begin + 1;
    while (end < entries.size() && entries[end].modulus - entries[end - 1].modulus <= tol_cluster) ++end;
    double mean = 0.0;
    for (std::size_t k = begin; k < end; ++k) mean += entries[k].modulus;
    mean /= static_cast<double>(end - begin);
    Matrix support = Matrix::Zero(m.rows(), m.cols());
    for (std::size_t k = begin; k < end; ++k) {
      const auto& e = entries[k];
      support(e.i, e.j) = m(e.i, e.j) / e.modulus;
      if (std::abs(e.modulus - mean) > tol_cluster)
        throw Error(ErrorKind::AmbiguousClustering,
                    "cluster around " + std::to_string(mean) + " spreads wider than tol_cluster");
    }
    out.colors.push_back({mean, std::move(support)});
    begin = end;
  }
  for (std::size_t k = 1; k < out.colors.size(); ++k) {
    if (out.colors[k].modulus - out.colors[k - 1].modulus < 2.0 * tol_cluster)
      throw Error(ErrorKind::AmbiguousClustering, "cluster means closer than 2*tol_cluster");
  }
  return out;
}

/// e^{tA} for anti-hermitian A, via the eigendecomposition of the hermitian
/// matrix iA, so the result is unitary to rounding independently of t.
inline UnitaryCandidate expm_skew(const Matrix& a, double t, double tol_skew = 1e-10) {
  require_square_finite(a);
  const double skew_res = skewness_residual(a);
  if (skew_res > tol_skew)
    throw Error(ErrorKind::NotSkew, "||A + A*||_F = " + std::to_string(skew_res));
  const Complex i_unit(0.0, 1.0);
  Matrix h = i_unit * a;
  h = 0.5 * (h + h.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(h);
  if (eig.info() != Eigen::Success) throw Error(ErrorKind::Numerical, "eigensolver failed in expm_skew");
  // A = -iH, so e^{tA} = V diag(e^{-i mu t}) V*.
  Vector phases(h.rows());
  for (Index k = 0; k < h.rows(); ++k) phases(k) = std::exp(-i_unit * (eig.eigenvalues()(k) * t));
  Matrix out = eig.eigenvectors() * phases.asDiagonal() * eig.eigenvectors().adjoint();
  return UnitaryCandidate::certify(std::move(out), 1e-9);
}

/// Complex Hadamard test: unimodular entries and HH* = N I.
inline bool is_hadamard(const Matrix& h, double tol = 1e-9) {
  if (h.rows() == 0 || h.rows() != h.cols() || !all_finite(h)) return false;
  const auto n = static_cast<double>(h.rows());
  for (Index j = 0; j < h.cols(); ++j)
    for (Index i = 0; i < h.rows(); ++i)
      if (std::abs(std::abs(h(i, j)) - 1.0) > tol) return false;
  return (h * h.adjoint() - n * Matrix::Identity(h.rows(), h.cols())).norm() <= n * tol;
}

/// Hadamard-equivalent matrix with positive real first row and first column.
inline Matrix dephase(const Matrix& h, double tol_zero = kDefaultTolerances.zero) {
  require_square_finite(h);
  require_nonzero_entries(h, tol_zero);
  Matrix out = h;
  for (Index i = 0; i < out.rows(); ++i) {
    const Complex phase = std::conj(out(i, 0)) / std::abs(out(i, 0));
    out.row(i) *= phase;
  }
  for (Index j = 0; j < out.cols(); ++j) {
    const Complex phase = std::conj(out(0, j)) / std::abs(out(0, j));
    out.col(j) *= phase;
  }
  // Pin the pivot row and column to exactly real values.
  for (Index j = 0; j < out.cols(); ++j) out(0, j) = std::abs(out(0, j));
  for (Index i = 0; i < out.rows(); ++i) out(i, 0) = std::abs(out(i, 0));
  return out;
}

/// All-ones matrix.
inline Matrix all_ones(Index n) { return Matrix::Ones(n, n); }

}  // namespace ahm
