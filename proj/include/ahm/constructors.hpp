#pragma once

// Builders for the matrix families under study: Fourier matrices, K_N,
// two-entry unitaries from (a,b,c) patterns, block-design incidence matrices
// and circulant unitaries from their Fourier eigenvalues.

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ahm/core.hpp"

namespace ahm {

using IncidenceMatrix = Eigen::MatrixXi;

/// Unnormalized Fourier matrix (F_N)_{jk} = exp(2 pi i jk / N).
inline Matrix fourier(Index n) {
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "fourier: N must be >= 1");
  Matrix f(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index k = 0; k < n; ++k) {
      const double angle = 2.0 * std::numbers::pi * static_cast<double>((j * k) % n) / static_cast<double>(n);
      f(j, k) = std::polar(1.0, angle);
    }
  return f;
}

/// F_N / sqrt(N), the unitary discrete Fourier transform.
inline Matrix fourier_unitary(Index n) { return fourier(n) / std::sqrt(static_cast<double>(n)); }

inline Matrix kronecker(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

/// Fourier matrix of Z_{N_1} x ... x Z_{N_k}.
inline Matrix fourier_group(const std::vector<Index>& sizes) {
  if (sizes.empty()) throw Error(ErrorKind::InvalidArgument, "fourier_group: empty size list");
  Matrix out = fourier(sizes.front());
  for (std::size_t k = 1; k < sizes.size(); ++k) out = kronecker(out, fourier(sizes[k]));
  return out;
}

/// U_N = (2/N) * all-ones - I; sqrt(N) U_N is the real almost Hadamard K_N.
inline UnitaryCandidate kn(Index n) {
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "kn: N must be >= 1");
  const double nd = static_cast<double>(n);
  Matrix u = Matrix::Constant(n, n, Complex(2.0 / nd, 0.0));
  u.diagonal().setConstant(Complex((2.0 - nd) / nd, 0.0));
  return UnitaryCandidate::certify(std::move(u));
}

// ---------------------------------------------------------------------------
// (a,b,c) patterns

/// A two-symbol design: P marks the x-valued positions, Q = all-ones - P the
/// y-valued ones. Any two rows (and any two columns) of P share a ones, and
/// differ in b positions each way; they share c zeros. N = a + 2b + c.
struct PatternABC {
  int a = 0;
  int b = 0;
  int c = 0;
  IncidenceMatrix p;
  IncidenceMatrix q;

  Index n() const noexcept { return p.rows(); }
  bool symmetric() const { return p == p.transpose(); }
};

struct PatternParams {
  int a, b, c;
};

namespace detail {

/// Constant pairwise profile of the rows of a 0/1 matrix, reading its ones as
/// the P symbol. Returns nullopt when row sums or intersections vary.
inline std::optional<PatternParams> row_profile(const IncidenceMatrix& m) {
  const Index n = m.rows();
  const int ones = m.row(0).sum();
  for (Index i = 1; i < n; ++i)
    if (m.row(i).sum() != ones) return std::nullopt;
  if (n == 1) return PatternParams{ones, 0, 1 - ones};
  std::optional<int> common;
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) {
      const int shared = m.row(i).cwiseProduct(m.row(j)).sum();
      if (!common) common = shared;
      else if (*common != shared) return std::nullopt;
    }
  const int a = *common;
  const int b = ones - a;
  const int c = static_cast<int>(n) - a - 2 * b;
  if (b < 0 || c < 0) return std::nullopt;
  return PatternParams{a, b, c};
}

}  // namespace detail

/// Recognizes an (a,b,c) pattern: constant row sums, constant pairwise row
/// profile, the same profile on columns, and b^2 - b = ac. The result is
/// oriented so that a <= c (P is whichever symbol gives the smaller count).
inline std::optional<PatternABC> detect_pattern(const IncidenceMatrix& m01) {
  if (m01.rows() == 0 || m01.rows() != m01.cols()) return std::nullopt;
  if ((m01.array() != 0 && m01.array() != 1).any()) return std::nullopt;
  const auto rows = detail::row_profile(m01);
  if (!rows) return std::nullopt;
  const IncidenceMatrix transposed = m01.transpose();
  const auto cols = detail::row_profile(transposed);
  if (!cols || cols->a != rows->a || cols->b != rows->b || cols->c != rows->c) return std::nullopt;
  if (rows->b * rows->b - rows->b != rows->a * rows->c) return std::nullopt;

  PatternABC out;
  out.a = rows->a;
  out.b = rows->b;
  out.c = rows->c;
  out.p = m01;
  out.q = IncidenceMatrix::Ones(m01.rows(), m01.cols()) - m01;
  if (out.a > out.c) {
    std::swap(out.a, out.c);
    std::swap(out.p, out.q);
  }
  return out;
}

namespace detail {

inline PatternABC require_pattern(const IncidenceMatrix& m, std::string_view name) {
  auto pat = detect_pattern(m);
  if (!pat) throw Error(ErrorKind::Numerical, std::string(name) + " incidence matrix is not a pattern");
  return *pat;
}

/// Symmetric development of a difference set: M_ij = [(i + j) mod n in D].
inline IncidenceMatrix symmetric_development(int n, std::initializer_list<int> diffs) {
  IncidenceMatrix m = IncidenceMatrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int d : diffs)
        if ((i + j) % n == d) m(i, j) = 1;
  return m;
}

}  // namespace detail

/// Fano plane PG(2,2) from the difference set {1,2,4} mod 7; a (1,2,2) pattern.
inline PatternABC incidence_fano() {
  return detail::require_pattern(detail::symmetric_development(7, {1, 2, 4}), "fano");
}

/// Paley biplane from the quadratic residues {1,3,4,5,9} mod 11; a (2,3,3) pattern.
inline PatternABC incidence_paley_biplane() {
  return detail::require_pattern(detail::symmetric_development(11, {1, 3, 4, 5, 9}), "paley11");
}

inline bool is_prime(long long q) {
  if (q < 2) return false;
  for (long long d = 2; d * d <= q; ++d)
    if (q % d == 0) return false;
  return true;
}

/// Point-line incidence of PG(2,q) over the prime field, with points and
/// lines both indexed by normalized vectors (first nonzero coordinate 1) in
/// lexicographic order. Point p lies on line l iff p . l = 0, which makes the
/// matrix symmetric. A (1, q, q^2 - q) pattern.
inline PatternABC incidence_projective_plane(int q) {
  if (!is_prime(q)) throw Error(ErrorKind::NotPrime, std::to_string(q) + " is not prime");
  std::vector<std::array<int, 3>> points;
  for (int x = 0; x < q; ++x)
    for (int y = 0; y < q; ++y)
      for (int z = 0; z < q; ++z) {
        const std::array<int, 3> v{x, y, z};
        int lead = 0;
        for (int coord : v)
          if (coord != 0) {
            lead = coord;
            break;
          }
        if (lead == 1) points.push_back(v);
      }
  const auto n = static_cast<Index>(points.size());
  IncidenceMatrix m = IncidenceMatrix::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      const auto& u = points[static_cast<std::size_t>(i)];
      const auto& v = points[static_cast<std::size_t>(j)];
      if ((u[0] * v[0] + u[1] * v[1] + u[2] * v[2]) % q == 0) m(i, j) = 1;
    }
  return detail::require_pattern(m, "pg2_" + std::to_string(q));
}

/// The (0,1,N-2) pattern underlying K_N: P = I.
inline PatternABC kn_pattern(Index n) {
  if (n < 2) throw Error(ErrorKind::InvalidArgument, "kn pattern needs N >= 2");
  return detail::require_pattern(IncidenceMatrix::Identity(n, n), "kn_" + std::to_string(n));
}

struct GrassmannianParams {
  long long a, b, c, n;
};

/// Parameters of the (a,b,c) pattern from the d-dimensional Grassmannian
/// over F_q. Only the parameters; no incidence matrix is built.
inline GrassmannianParams grassmannian_params(long long q, int d) {
  if (q < 2 || d < 1) throw Error(ErrorKind::InvalidArgument, "grassmannian_params needs q >= 2, d >= 1");
  long long qd = 1;
  for (int k = 0; k < d; ++k) qd *= q;
  GrassmannianParams g{(qd - 1) / (q - 1), qd, qd * (q - 1), 0};
  g.n = g.a + 2 * g.b + g.c;
  return g;
}

/// Built-in designs by key: fano, paley11, pg2_<q>, kn_<N>.
inline PatternABC design_by_key(std::string_view key) {
  auto number_after = [&](std::string_view prefix) -> long long {
    const std::string_view digits = key.substr(prefix.size());
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
    if (digits.empty() || ec != std::errc() || ptr != digits.data() + digits.size())
      throw Error(ErrorKind::InvalidArgument, "bad design key '" + std::string(key) + "'");
    return v;
  };
  if (key == "fano") return incidence_fano();
  if (key == "paley11") return incidence_paley_biplane();
  if (key.starts_with("pg2_")) return incidence_projective_plane(static_cast<int>(number_after("pg2_")));
  if (key.starts_with("kn_")) return kn_pattern(number_after("kn_"));
  throw Error(ErrorKind::InvalidArgument, "unknown design key '" + std::string(key) + "'");
}

enum class Branch { RealMinus, RealPlus, ComplexEps, ComplexEpsConj };

inline std::string_view to_string(Branch b) {
  switch (b) {
    case Branch::RealMinus: return "real_minus";
    case Branch::RealPlus: return "real_plus";
    case Branch::ComplexEps: return "complex_eps";
    case Branch::ComplexEpsConj: return "complex_eps_conj";
  }
  return "?";
}

inline std::optional<Branch> parse_branch(std::string_view s) {
  for (Branch b : {Branch::RealMinus, Branch::RealPlus, Branch::ComplexEps, Branch::ComplexEpsConj}) {
    std::string name(to_string(b));
    std::string dashed = name;
    std::replace(dashed.begin(), dashed.end(), '_', '-');
    if (s == name || s == dashed) return b;
  }
  return std::nullopt;
}

inline bool is_real_branch(Branch b) { return b == Branch::RealMinus || b == Branch::RealPlus; }

/// Unitary x*P + y*Q realizing a pattern on one of its critical branches.
struct PatternUnitary {
  PatternABC pattern;
  Branch branch;
  Complex x;
  Complex y;
  std::optional<double> t;
  std::optional<Complex> eps;
  UnitaryCandidate matrix;
};

/// Critical two-entry unitaries of a pattern, normalized with y > 0.
///   real branches:    a t^2 - 2 b t + c = 0, y = 1/(sqrt(b)(t+1)), x = -t y
///                     (real_minus is the smaller root; a = 0 has the single
///                     root t = c/(2b), reported as real_minus)
///   complex branches: 2 b Re(eps) = a + c, y = 1/sqrt(N), x = -eps y
inline PatternUnitary pattern_unitary(const PatternABC& pat, Branch branch,
                                      double tol_unitary = kDefaultTolerances.unitary) {
  const double a = pat.a, b = pat.b, c = pat.c;
  const double n = static_cast<double>(pat.n());
  if (pat.b <= 0) throw Error(ErrorKind::BranchUnavailable, "pattern has b = 0");

  Complex x, y;
  std::optional<double> t;
  std::optional<Complex> eps;
  if (is_real_branch(branch)) {
    double root = 0.0;
    if (pat.a == 0) {
      if (branch == Branch::RealPlus)
        throw Error(ErrorKind::BranchUnavailable, "a = 0: the single root is the real_minus branch");
      root = c / (2.0 * b);
    } else {
      const double disc = b * b - a * c;
      if (disc < 0.0) throw Error(ErrorKind::BranchUnavailable, "b^2 - ac < 0");
      root = branch == Branch::RealMinus ? (b - std::sqrt(disc)) / a : (b + std::sqrt(disc)) / a;
    }
    if (!(root > 0.0)) throw Error(ErrorKind::BranchUnavailable, "root t is not positive");
    t = root;
    y = 1.0 / (std::sqrt(b) * (root + 1.0));
    x = -root * y;
  } else {
    const double re = (a + c) / (2.0 * b);
    if (std::abs(re) > 1.0) throw Error(ErrorKind::BranchUnavailable, "|Re(eps)| > 1");
    const double im = std::sqrt(std::max(0.0, 1.0 - re * re));
    eps = Complex(re, branch == Branch::ComplexEps ? im : -im);
    y = 1.0 / std::sqrt(n);
    x = -(*eps) * y;
  }
  Matrix m = x * pat.p.cast<Complex>() + y * pat.q.cast<Complex>();
  return PatternUnitary{pat, branch, x, y, t, eps, UnitaryCandidate::certify(std::move(m), tol_unitary)};
}

// ---------------------------------------------------------------------------
// Circulant matrices

/// Circulant data: U_ij = gamma_{j-i}, U = F diag(q) F* with F = F_N/sqrt(N),
/// so gamma = F* q / sqrt(N).
struct CirculantSpec {
  Vector gamma;
  Vector q;
  bool self_adjoint = false;
  bool real = false;

  Index n() const noexcept { return gamma.size(); }
};

inline Matrix circulant(const Vector& gamma) {
  const Index n = gamma.size();
  Matrix u(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) u(i, j) = gamma(((j - i) % n + n) % n);
  return u;
}

/// First row of M if M is circulant within `tol` (max-norm), else nullopt.
inline std::optional<Vector> circulant_first_row(const Matrix& m, double tol = 1e-12) {
  if (m.rows() == 0 || m.rows() != m.cols()) return std::nullopt;
  const Index n = m.rows();
  Vector gamma = m.row(0).transpose();
  for (Index i = 1; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      if (std::abs(m(i, j) - gamma(((j - i) % n + n) % n)) > tol) return std::nullopt;
  return gamma;
}

/// Fourier eigenvalues of a circulant: q = diag(F* U F).
inline Vector circulant_eigenvalues(const Matrix& u) {
  const Matrix f = fourier_unitary(u.rows());
  return (f.adjoint() * u * f).diagonal();
}

struct CirculantUnitary {
  CirculantSpec spec;
  UnitaryCandidate unitary;
};

inline CirculantUnitary circulant_from_eigenphases(const Vector& q, double tol = 1e-10) {
  const Index n = q.size();
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "empty eigenphase vector");
  for (Index k = 0; k < n; ++k)
    if (!std::isfinite(q(k).real()) || !std::isfinite(q(k).imag()) || std::abs(std::abs(q(k)) - 1.0) > tol)
      throw Error(ErrorKind::NotUnimodular, "eigenphase " + std::to_string(k) + " is not on the unit circle");
  const Vector gamma = fourier_unitary(n).adjoint() * q / std::sqrt(static_cast<double>(n));
  CirculantSpec spec{gamma, q, true, true};
  for (Index k = 0; k < n; ++k) {
    if (std::abs(q(k).imag()) > tol) spec.self_adjoint = false;
    if (std::abs(std::conj(q(k)) - q((n - k) % n)) > tol) spec.real = false;
  }
  Matrix u = circulant(gamma);
  return {std::move(spec), UnitaryCandidate::certify(std::move(u))};
}

}  // namespace ahm
