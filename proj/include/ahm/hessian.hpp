#pragma once

// Second-order machinery: derivatives of ||U e^{tA}||_p^p, the gradient of the
// 1-norm, the quadratic form Phi(U,B) on hermitian directions, its spectrum,
// and Riemannian gradient ascent of the 1-norm.

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "ahm/criticality.hpp"
#include "ahm/random.hpp"

namespace ahm {

namespace detail {

inline void require_skew(const Matrix& a, double tol = 1e-10) {
  require_square_finite(a);
  const double res = skewness_residual(a);
  if (res > tol) throw Error(ErrorKind::NotSkew, "||A + A*||_F = " + std::to_string(res));
}

inline void require_hermitian(const Matrix& b, double tol = 1e-10) {
  require_square_finite(b);
  const double res = hermiticity_residual(b);
  if (res > tol) throw Error(ErrorKind::NotHermitian, "||B - B*||_F = " + std::to_string(res));
}

inline void require_same_size(const Matrix& u, const Matrix& a) {
  if (u.rows() != a.rows()) throw Error(ErrorKind::InvalidArgument, "size mismatch between U and direction");
}

inline void require_power(double p) {
  if (!(p >= 1.0) || p == 2.0 || !std::isfinite(p))
    throw Error(ErrorKind::InvalidArgument, "p must lie in [1,2) or (2,inf)");
}

}  // namespace detail

/// f'(0) for f(t) = ||U e^{tA}||_p^p, i.e. psi(x) = x^{p/2} summed over |U_ij|^2:
/// f'(0) = 2 sum psi'(|U_ij|^2) Re[(UA)_ij conj(U_ij)].
inline double derivative_first(const Matrix& u, const Matrix& a, double p,
                               double tol_zero = kDefaultTolerances.zero) {
  detail::require_power(p);
  detail::require_skew(a);
  detail::require_same_size(u, a);
  require_square_finite(u);
  require_nonzero_entries(u, tol_zero);
  const Matrix ua = u * a;
  double sum = 0.0;
  for (Index j = 0; j < u.cols(); ++j)
    for (Index i = 0; i < u.rows(); ++i) {
      const double x = std::norm(u(i, j));
      const double dpsi = 0.5 * p * std::pow(x, 0.5 * p - 1.0);
      sum += dpsi * (ua(i, j) * std::conj(u(i, j))).real();
    }
  return 2.0 * sum;
}

/// f''(0) = 4 sum psi'' Re[(UA) conj U]^2 + 2 sum psi' Re[(UA^2) conj U] + 2 sum psi' |UA|^2.
inline double derivative_second(const Matrix& u, const Matrix& a, double p,
                                double tol_zero = kDefaultTolerances.zero) {
  detail::require_power(p);
  detail::require_skew(a);
  detail::require_same_size(u, a);
  require_square_finite(u);
  require_nonzero_entries(u, tol_zero);
  const Matrix ua = u * a;
  const Matrix uaa = ua * a;
  double first = 0.0, second = 0.0, third = 0.0;
  for (Index j = 0; j < u.cols(); ++j)
    for (Index i = 0; i < u.rows(); ++i) {
      const double x = std::norm(u(i, j));
      const double dpsi = 0.5 * p * std::pow(x, 0.5 * p - 1.0);
      const double ddpsi = 0.5 * p * (0.5 * p - 1.0) * std::pow(x, 0.5 * p - 2.0);
      const double re = (ua(i, j) * std::conj(u(i, j))).real();
      first += ddpsi * re * re;
      second += dpsi * (uaa(i, j) * std::conj(u(i, j))).real();
      third += dpsi * std::norm(ua(i, j));
    }
  return 4.0 * first + 2.0 * second + 2.0 * third;
}

struct GradientReport {
  Matrix gradient;  // G = (S - U S* U) / 2
  Matrix tangent;   // U* G = (U* S - S* U) / 2, anti-hermitian; f'(0) along A is Re <tangent, A>
};

inline GradientReport gradient_one_norm(const Matrix& u, double tol_zero = kDefaultTolerances.zero) {
  const Matrix s = sign_matrix(u, tol_zero).phases;
  GradientReport g;
  g.gradient = 0.5 * (s - u * s.adjoint() * u);
  g.tangent = 0.5 * (u.adjoint() * s - s.adjoint() * u);
  return g;
}

struct PhiReport {
  double value = 0.0;
  double trace_term = 0.0;  // Tr(X_h B^2), X_h the hermitian part of S*U
  double sum_term = 0.0;    // sum Re[(UB)_ij conj(S_ij)]^2 / |U_ij|
  double direction_norm = 0.0;
  bool critical = true;  // false: U is not critical and the value has no second-order meaning
};

/// Phi(U, .) with the U-dependent pieces computed once.
class PhiForm {
 public:
  explicit PhiForm(const Matrix& u, const Tolerances& tol = kDefaultTolerances)
      : u_(u), s_(sign_matrix(u, tol.zero).phases) {
    const Matrix x = s_.adjoint() * u_;
    critical_ = hermiticity_residual(x) <= tol.crit;
    xh_ = hermitian_part(x);
    inv_abs_ = u_.cwiseAbs().cwiseInverse();
  }

  PhiReport operator()(const Matrix& b) const {
    detail::require_hermitian(b);
    detail::require_same_size(u_, b);
    PhiReport r;
    r.trace_term = (xh_ * b * b).trace().real();
    const Matrix ub = u_ * b;
    const RealMatrix re = ub.cwiseProduct(s_.conjugate()).real();
    r.sum_term = re.cwiseProduct(re).cwiseProduct(inv_abs_).sum();
    r.value = r.trace_term - r.sum_term;
    r.direction_norm = b.norm();
    r.critical = critical_;
    return r;
  }

  const Matrix& u() const noexcept { return u_; }
  const Matrix& signs() const noexcept { return s_; }
  const Matrix& x_hermitian() const noexcept { return xh_; }
  const RealMatrix& inverse_moduli() const noexcept { return inv_abs_; }
  bool critical() const noexcept { return critical_; }

 private:
  Matrix u_;
  Matrix s_;
  Matrix xh_;
  RealMatrix inv_abs_;
  bool critical_ = false;
};

/// Phi(U,B) = Tr(X B^2) - sum_ij Re[(UB)_ij conj(S_ij)]^2 / |U_ij|.
inline PhiReport phi(const Matrix& u, const Matrix& b, const Tolerances& tol = kDefaultTolerances) {
  return PhiForm(u, tol)(b);
}

inline PhiReport phi(const UnitaryCandidate& u, const Matrix& b, const Tolerances& tol = kDefaultTolerances) {
  return phi(u.matrix(), b, tol);
}

/// Orthonormal basis of the hermitian matrices under <A,B> = Tr(AB):
/// e_ii, then (e_ij + e_ji)/sqrt2 for i<j, then i(e_ij - e_ji)/sqrt2 for i<j.
inline std::vector<Matrix> hermitian_basis(Index n) {
  std::vector<Matrix> basis;
  basis.reserve(static_cast<std::size_t>(n * n));
  const double h = std::sqrt(0.5);
  for (Index i = 0; i < n; ++i) {
    Matrix e = Matrix::Zero(n, n);
    e(i, i) = 1.0;
    basis.push_back(std::move(e));
  }
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) {
      Matrix e = Matrix::Zero(n, n);
      e(i, j) = e(j, i) = h;
      basis.push_back(std::move(e));
    }
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) {
      Matrix e = Matrix::Zero(n, n);
      e(i, j) = Complex(0.0, h);
      e(j, i) = Complex(0.0, -h);
      basis.push_back(std::move(e));
    }
  return basis;
}

inline RealVector hermitian_coordinates(const Matrix& b) {
  const auto basis = hermitian_basis(b.rows());
  RealVector coords(static_cast<Index>(basis.size()));
  for (std::size_t k = 0; k < basis.size(); ++k) coords(static_cast<Index>(k)) = (basis[k] * b).trace().real();
  return coords;
}

inline Matrix hermitian_from_coordinates(const RealVector& coords, Index n) {
  const auto basis = hermitian_basis(n);
  Matrix b = Matrix::Zero(n, n);
  for (std::size_t k = 0; k < basis.size(); ++k) b += coords(static_cast<Index>(k)) * basis[k];
  return b;
}

/// Gram matrix M_kl = Q(E_k, E_l) of the symmetric bilinear form with
/// Q(B,B) = Phi(U,B), on the orthonormal hermitian basis.
inline RealMatrix phi_form_matrix(const PhiForm& form) {
  const Matrix& u = form.u();
  const Index n = u.rows();
  const auto basis = hermitian_basis(n);
  const Index dim = n * n;
  // Columns: vec(X_h E_k), vec(E_k^T) and vec(Re[(U E_k) o conj S] / sqrt|U|).
  Matrix xe(dim, dim), et(dim, dim);
  RealMatrix l(dim, dim);
  const RealMatrix weight = form.inverse_moduli().cwiseSqrt();
  for (Index k = 0; k < dim; ++k) {
    const Matrix& e = basis[static_cast<std::size_t>(k)];
    const Matrix a = form.x_hermitian() * e;
    const Matrix t = e.transpose();
    const RealMatrix re = (u * e).cwiseProduct(form.signs().conjugate()).real().cwiseProduct(weight);
    xe.col(k) = Eigen::Map<const Vector>(a.data(), dim);
    et.col(k) = Eigen::Map<const Vector>(t.data(), dim);
    l.col(k) = Eigen::Map<const RealVector>(re.data(), dim);
  }
  RealMatrix m = (xe.transpose() * et).real() - l.transpose() * l;
  return 0.5 * (m + m.transpose());
}

struct HessianSpectrum {
  Index dim = 0;
  RealVector eigenvalues;  // ascending
  RealMatrix eigenvectors;  // columns: coordinates on hermitian_basis
  Matrix min_direction;     // unit Frobenius norm
  RealMatrix form;          // the assembled N^2 x N^2 matrix
};

inline HessianSpectrum hessian_spectrum(const Matrix& u, const Tolerances& tol = kDefaultTolerances) {
  const PhiForm form(u, tol);
  HessianSpectrum out;
  out.form = phi_form_matrix(form);
  out.dim = out.form.rows();
  Eigen::SelfAdjointEigenSolver<RealMatrix> eig(out.form);
  if (eig.info() != Eigen::Success) throw Error(ErrorKind::Numerical, "Hessian eigensolver failed");
  out.eigenvalues = eig.eigenvalues();
  out.eigenvectors = eig.eigenvectors();
  out.min_direction = hermitian_from_coordinates(out.eigenvectors.col(0), u.rows());
  out.min_direction = hermitian_part(out.min_direction);
  return out;
}

inline HessianSpectrum hessian_spectrum(const UnitaryCandidate& u, const Tolerances& tol = kDefaultTolerances) {
  return hessian_spectrum(u.matrix(), tol);
}

struct DescentDirection {
  double lambda_min = 0.0;
  Matrix direction;  // unit Frobenius norm, Phi(U, direction) = lambda_min
};

/// Minimal eigenpair of the Phi form when it is below -tol.neg.
inline std::optional<DescentDirection> descent_direction(const Matrix& u, const Tolerances& tol = kDefaultTolerances) {
  if (!critical_report(u, tol).is_critical) throw Error(ErrorKind::NotCritical, "U is not a critical point");
  const HessianSpectrum spec = hessian_spectrum(u, tol);
  const double lambda = spec.eigenvalues(0);
  if (!(lambda < -tol.neg)) return std::nullopt;
  const PhiReport check = phi(u, spec.min_direction, tol);
  const double expected = lambda * spec.min_direction.squaredNorm();
  if (std::abs(check.value - expected) > 1e-8 * std::max(1.0, std::abs(expected)))
    throw Error(ErrorKind::Numerical, "descent direction failed re-evaluation");
  return DescentDirection{lambda, spec.min_direction};
}

inline std::optional<DescentDirection> descent_direction(const UnitaryCandidate& u,
                                                         const Tolerances& tol = kDefaultTolerances) {
  return descent_direction(u.matrix(), tol);
}

// ---------------------------------------------------------------------------
// Gradient ascent of the 1-norm on U(N)

struct AscentOptions {
  int max_iters = 10000;
  double tol_grad = 1e-10;
  std::uint64_t seed = 0;
  double tol_zero = kDefaultTolerances.zero;
  double armijo = 1e-4;
  double min_step = 1e-14;
};

enum class AscentStop { GradientSmall, MaxIters, LineSearchStalled };

inline std::string_view to_string(AscentStop s) {
  switch (s) {
    case AscentStop::GradientSmall: return "gradient_small";
    case AscentStop::MaxIters: return "max_iters";
    case AscentStop::LineSearchStalled: return "line_search_stalled";
  }
  return "?";
}

struct AscentTrace {
  int iterates = 0;
  UnitaryCandidate final;
  std::vector<double> one_norm_history;
  std::vector<double> step_sizes;
  bool converged_to_chm = false;
  double gradient_norm = 0.0;
  AscentStop stop = AscentStop::MaxIters;
};

/// max_ij | |U_ij| - 1/sqrt(N) |
inline double chm_deviation(const Matrix& u) {
  const double target = 1.0 / std::sqrt(static_cast<double>(u.rows()));
  return (u.cwiseAbs().array() - target).abs().maxCoeff();
}

namespace detail {

/// Entry phases, with 0 at entries too small to carry a phase.
inline Matrix sign_or_zero(const Matrix& u, double tol_zero) {
  Matrix s(u.rows(), u.cols());
  for (Index j = 0; j < u.cols(); ++j)
    for (Index i = 0; i < u.rows(); ++i) {
      const double r = std::abs(u(i, j));
      s(i, j) = r > tol_zero ? u(i, j) / r : Complex(0.0, 0.0);
    }
  return s;
}

}  // namespace detail

/// Steepest ascent along geodesics U <- U e^{tA}, A = (U*S - S*U)/2, with
/// Armijo backtracking (t = 1, 1/2, 1/4, ...). Near-zero entries, where the
/// 1-norm is not smooth, get a small random skew kick that is kept only if
/// the norm does not drop.
inline AscentTrace ascend(const UnitaryCandidate& u0, const AscentOptions& opts = {}) {
  Rng rng = stream(opts.seed, 0);
  Matrix u = u0.matrix();
  double f = one_norm(u);
  AscentTrace trace{0, u0, {f}, {}, false, 0.0, AscentStop::MaxIters};

  for (int it = 0; it < opts.max_iters; ++it) {
    if (u.cwiseAbs().minCoeff() < 10.0 * opts.tol_zero) {
      const Matrix kick = 1e-6 * random_skew(u.rows(), rng);
      const Matrix candidate = u * expm_skew(kick, 1.0).matrix();
      const double fc = one_norm(candidate);
      if (fc >= f) {
        u = candidate;
        f = fc;
        trace.one_norm_history.push_back(f);
        trace.step_sizes.push_back(0.0);
        ++trace.iterates;
        continue;
      }
    }
    const Matrix s = detail::sign_or_zero(u, opts.tol_zero);
    const Matrix a = 0.5 * (u.adjoint() * s - s.adjoint() * u);
    const Matrix a_skew = 0.5 * (a - a.adjoint());
    const double g2 = a_skew.squaredNorm();
    trace.gradient_norm = std::sqrt(g2);
    if (trace.gradient_norm <= opts.tol_grad) {
      trace.stop = AscentStop::GradientSmall;
      break;
    }
    double t = 1.0;
    bool accepted = false;
    while (t >= opts.min_step) {
      Matrix next = u * expm_skew(a_skew, t).matrix();
      const double fn = one_norm(next);
      if (fn >= f + opts.armijo * t * g2) {
        u = std::move(next);
        f = fn;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      trace.stop = AscentStop::LineSearchStalled;
      break;
    }
    trace.one_norm_history.push_back(f);
    trace.step_sizes.push_back(t);
    ++trace.iterates;
  }
  trace.final = UnitaryCandidate::certify(u, 1e-8);
  trace.converged_to_chm = chm_deviation(u) <= 1e-6;
  return trace;
}

// ---------------------------------------------------------------------------
// Multi-start search

/// Sorted real and imaginary parts of the fourth-order invariants
/// H_ij conj(H_kj) H_kl conj(H_il). They do not change under row/column
/// phases or permutations, so the distance below is zero for equivalent
/// matrices.
inline std::vector<double> equivalence_invariants(const Matrix& h) {
  const Index n = h.rows();
  std::vector<double> re, im;
  re.reserve(static_cast<std::size_t>(n * n * n * n));
  im.reserve(re.capacity());
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      for (Index k = 0; k < n; ++k)
        for (Index l = 0; l < n; ++l) {
          const Complex z = h(i, j) * std::conj(h(k, j)) * h(k, l) * std::conj(h(i, l));
          re.push_back(z.real());
          im.push_back(z.imag());
        }
  std::sort(re.begin(), re.end());
  std::sort(im.begin(), im.end());
  re.insert(re.end(), im.begin(), im.end());
  return re;
}

inline double equivalence_distance(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) return std::numeric_limits<double>::infinity();
  const auto ia = equivalence_invariants(a);
  const auto ib = equivalence_invariants(b);
  double d = 0.0;
  for (std::size_t k = 0; k < ia.size(); ++k) d = std::max(d, std::abs(ia[k] - ib[k]));
  return d;
}

struct SearchRun {
  std::size_t start = 0;
  double final_one_norm = 0.0;
  bool converged_to_chm = false;
  int iterations = 0;
  std::optional<std::size_t> class_index;  // into SearchReport::classes when converged
  Matrix final;
};

struct SearchReport {
  Index n = 0;
  std::size_t starts = 0;
  std::uint64_t seed = 0;
  std::vector<SearchRun> runs;
  std::vector<Matrix> classes;  // dephased sqrt(N) U representatives, one per inequivalent limit
};

/// Ascent from `starts` Haar-random unitaries; start k uses stream (seed, k).
inline SearchReport search_chm(Index n, std::size_t starts, std::uint64_t seed, unsigned threads = 0,
                               AscentOptions opts = {}) {
  if (n < 2) throw Error(ErrorKind::InvalidArgument, "search needs N >= 2");
  SearchReport report{n, starts, seed, std::vector<SearchRun>(starts), {}};
  parallel_for(starts, threads, [&](std::size_t k) {
    Rng rng = stream(seed, k);
    const Matrix u0 = haar_unitary(n, rng);
    AscentOptions local = opts;
    local.seed = splitmix64(seed ^ (k + 1));
    const AscentTrace tr = ascend(UnitaryCandidate::certify(u0, 1e-9), local);
    report.runs[k] = SearchRun{k, tr.one_norm_history.back(), tr.converged_to_chm, tr.iterates, std::nullopt,
                               tr.final.matrix()};
  });
  const double scale = std::sqrt(static_cast<double>(n));
  for (auto& run : report.runs) {
    if (!run.converged_to_chm) continue;
    const Matrix h = dephase(scale * run.final);
    for (std::size_t c = 0; c < report.classes.size(); ++c)
      if (equivalence_distance(h, report.classes[c]) < 1e-5) {
        run.class_index = c;
        break;
      }
    if (!run.class_index) {
      run.class_index = report.classes.size();
      report.classes.push_back(h);
    }
  }
  return report;
}

}  // namespace ahm
