#pragma once

// First-order analysis: X = S*U, the criticality test (X self-adjoint) and
// the semi-balanced / balanced color conditions.

#include <optional>
#include <utility>

#include "ahm/constructors.hpp"
#include "ahm/core.hpp"

namespace ahm {

namespace detail {

// X for a circulant U with first row gamma: X_ij = rho_{j-i} where
// rho_m = sum_r conj(eps_r) gamma_{m+r}.
inline Matrix circulant_gram_sign(const Vector& gamma) {
  const Index n = gamma.size();
  Vector rho = Vector::Zero(n);
  for (Index m = 0; m < n; ++m)
    for (Index r = 0; r < n; ++r) {
      const Complex g = gamma(r);
      rho(m) += std::conj(g / std::abs(g)) * gamma((m + r) % n);
    }
  return circulant(rho);
}

}  // namespace detail

/// X = S* U. Circulant inputs go through the Fourier-side formula and are
/// cross-checked against the dense product.
inline Matrix gram_sign(const Matrix& u, double tol_zero = kDefaultTolerances.zero) {
  const SignMatrix s = sign_matrix(u, tol_zero);
  Matrix dense = s.phases.adjoint() * u;
  if (const auto gamma = circulant_first_row(u)) {
    Matrix fast = detail::circulant_gram_sign(*gamma);
    const double gap = (fast - dense).cwiseAbs().maxCoeff();
    if (gap > 1e-11) throw Error(ErrorKind::Numerical, "circulant X disagrees with dense X by " + std::to_string(gap));
    return fast;
  }
  return dense;
}

inline Matrix gram_sign(const UnitaryCandidate& u, double tol_zero = kDefaultTolerances.zero) {
  return gram_sign(u.matrix(), tol_zero);
}

inline Matrix hermitian_part(const Matrix& m) { return 0.5 * (m + m.adjoint()); }

struct CriticalityReport {
  double residual = 0.0;  // ||X - X*||_F
  Matrix x;
  bool is_critical = false;
  double psd_min_eig = 0.0;   // smallest eigenvalue of (X + X*)/2
  bool psd_violation = false;  // psd_min_eig < -tol_crit: cannot be a local maximum
};

inline CriticalityReport critical_report(const Matrix& u, const Tolerances& tol = kDefaultTolerances) {
  CriticalityReport r;
  r.x = gram_sign(u, tol.zero);
  r.residual = hermiticity_residual(r.x);
  r.is_critical = r.residual <= tol.crit;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(hermitian_part(r.x), Eigen::EigenvaluesOnly);
  r.psd_min_eig = eig.eigenvalues()(0);
  r.psd_violation = r.psd_min_eig < -tol.crit;
  return r;
}

inline CriticalityReport critical_report(const UnitaryCandidate& u, const Tolerances& tol = kDefaultTolerances) {
  return critical_report(u.matrix(), tol);
}

struct BalanceReport {
  bool semi_balanced = false;
  bool balanced = false;
  double worst_residual = 0.0;
  std::optional<std::pair<std::size_t, std::size_t>> offending_pair;  // color indices, ascending modulus
};

/// Semi-balanced: U_r U* and U* U_r self-adjoint for every color r.
inline BalanceReport is_semi_balanced(const Matrix& u, double tol = 1e-9,
                                      double tol_cluster = kDefaultTolerances.cluster) {
  const ColorDecomposition colors = color_decomposition(u, tol_cluster);
  BalanceReport out;
  out.semi_balanced = true;
  for (std::size_t r = 0; r < colors.colors.size(); ++r) {
    const Matrix& ur = colors.colors[r].support;
    const double res = std::max(hermiticity_residual(ur * u.adjoint()), hermiticity_residual(u.adjoint() * ur));
    out.worst_residual = std::max(out.worst_residual, res);
    if (res > tol && out.semi_balanced) {
      out.semi_balanced = false;
      out.offending_pair = std::make_pair(r, r);
    }
  }
  return out;
}

/// Balanced: U_r U_s* and U_r* U_s self-adjoint for every pair of colors.
/// Also fills the semi-balanced flag.
inline BalanceReport is_balanced(const Matrix& u, double tol = 1e-9,
                                 double tol_cluster = kDefaultTolerances.cluster) {
  BalanceReport out = is_semi_balanced(u, tol, tol_cluster);
  const ColorDecomposition colors = color_decomposition(u, tol_cluster);
  out.balanced = true;
  for (std::size_t r = 0; r < colors.colors.size(); ++r)
    for (std::size_t s = 0; s < colors.colors.size(); ++s) {
      const Matrix& ur = colors.colors[r].support;
      const Matrix& us = colors.colors[s].support;
      const double res =
          std::max(hermiticity_residual(ur * us.adjoint()), hermiticity_residual(ur.adjoint() * us));
      out.worst_residual = std::max(out.worst_residual, res);
      if (res > tol && out.balanced) {
        out.balanced = false;
        if (out.semi_balanced) out.offending_pair = std::make_pair(r, s);
      }
    }
  return out;
}

inline BalanceReport is_semi_balanced(const UnitaryCandidate& u, double tol = 1e-9) {
  return is_semi_balanced(u.matrix(), tol);
}

inline BalanceReport is_balanced(const UnitaryCandidate& u, double tol = 1e-9) { return is_balanced(u.matrix(), tol); }

}  // namespace ahm
