#pragma once

// Exclusion criteria and related probes: closed-form values of Phi on
// pattern and circulant unitaries, expectations of Phi over random
// directions (closed form, exhaustive enumeration, Monte Carlo), the real
// orthogonal second-order test, defect dimensions, and the pipeline that
// chains them.

#include <bit>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ahm/constructors.hpp"
#include "ahm/criticality.hpp"
#include "ahm/hessian.hpp"
#include "ahm/random.hpp"

namespace ahm {

namespace detail {

inline void cross_check(double closed, double direct, std::string_view what) {
  if (std::abs(closed - direct) > 1e-8 * std::max(1.0, std::abs(direct)))
    throw Error(ErrorKind::Numerical, std::string(what) + ": closed form " + std::to_string(closed) +
                                          " disagrees with direct Phi " + std::to_string(direct));
}

inline Matrix identity(Index n) { return Matrix::Identity(n, n); }

}  // namespace detail

// ---------------------------------------------------------------------------
// Pattern unitaries

/// Phi(U, all-ones) = N lambda (a+b)(b+c)(y/x - x/y), lambda the row sum of U.
inline double phi_identity_pattern(const PatternUnitary& pu) {
  if (!is_real_branch(pu.branch)) throw Error(ErrorKind::ComplexBranch, "needs a real branch");
  const double x = pu.x.real(), y = pu.y.real();
  const double a = pu.pattern.a, b = pu.pattern.b, c = pu.pattern.c;
  const double n = static_cast<double>(pu.pattern.n());
  const double lambda = (a + b) * x + (b + c) * y;
  const double value = n * lambda * (a + b) * (b + c) * (y / x - x / y);
  detail::cross_check(value, phi(pu.matrix, all_ones(pu.pattern.n())).value, "phi_identity_pattern");
  return value;
}

struct PatternEigendirection {
  std::string label;
  Matrix direction;
  double alpha;  // P B = alpha B
  double beta;   // Q B = beta B
};

/// Common eigendirections of P and Q for a symmetric pattern: all-ones,
/// I - U_- and I + U_+ (the last two only when those branches exist).
inline std::vector<PatternEigendirection> pattern_eigendirections(const PatternUnitary& pu) {
  const PatternABC& pat = pu.pattern;
  if (!pat.symmetric()) throw Error(ErrorKind::NotSymmetricPattern, "P is not symmetric");
  const Index n = pat.n();
  const double rb = std::sqrt(static_cast<double>(pat.b));
  std::vector<PatternEigendirection> out;
  out.push_back({"all_ones", all_ones(n), static_cast<double>(pat.a + pat.b), static_cast<double>(pat.b + pat.c)});
  try {
    out.push_back({"one_minus_u_minus", detail::identity(n) - pattern_unitary(pat, Branch::RealMinus).matrix.matrix(),
                   rb, -rb});
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::BranchUnavailable) throw;
  }
  try {
    out.push_back({"one_plus_u_plus", detail::identity(n) + pattern_unitary(pat, Branch::RealPlus).matrix.matrix(),
                   -rb, rb});
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::BranchUnavailable) throw;
  }
  const Matrix p = pat.p.cast<Complex>(), q = pat.q.cast<Complex>();
  for (const auto& d : out) {
    const double rp = (p * d.direction - d.alpha * d.direction).norm();
    const double rq = (q * d.direction - d.beta * d.direction).norm();
    if (rp > 1e-9 || rq > 1e-9)
      throw Error(ErrorKind::Numerical, "eigendirection " + d.label + " fails its certificate");
  }
  return out;
}

/// Phi(U, I - U) = b (y^2 - x^2) [N(lambda - 2) + Tr(P)/x + Tr(Q)/y] for the
/// real_minus unitary of a symmetric pattern.
inline double phi_one_minus_u(const PatternUnitary& pu) {
  const PatternABC& pat = pu.pattern;
  if (!pat.symmetric()) throw Error(ErrorKind::NotSymmetricPattern, "P is not symmetric");
  if (pu.branch != Branch::RealMinus) throw Error(ErrorKind::WrongBranch, "needs the real_minus branch");
  if (pat.b * pat.b - pat.b != pat.a * pat.c) throw Error(ErrorKind::InvalidArgument, "b^2 - b != ac");
  const double x = pu.x.real(), y = pu.y.real();
  const double a = pat.a, b = pat.b, c = pat.c;
  const double n = static_cast<double>(pat.n());
  const double lambda = (a + b) * x + (b + c) * y;
  const double tr_u_tilde = pat.p.trace() / x + pat.q.trace() / y;
  const double value = b * (y * y - x * x) * (n * (lambda - 2.0) + tr_u_tilde);
  const Matrix& u = pu.matrix.matrix();
  detail::cross_check(value, phi(u, detail::identity(pat.n()) - u).value, "phi_one_minus_u");
  return value;
}

// ---------------------------------------------------------------------------
// Circulant unitaries

namespace detail {

inline Vector require_circulant(const Matrix& u) {
  require_square_finite(u);
  auto gamma = circulant_first_row(u, 1e-10);
  if (!gamma) throw Error(ErrorKind::NotCirculant, "matrix is not circulant");
  return *gamma;
}

}  // namespace detail

/// Phi(U, all-ones) = N u (N s - u w) for a real circulant, with u, s, w the
/// row sums of U, sgn(U) and 1/|U|.
inline double phi_identity_circulant(const Matrix& u_mat, double tol_zero = kDefaultTolerances.zero) {
  const Vector gamma = detail::require_circulant(u_mat);
  if (!is_real(u_mat, 1e-10)) throw Error(ErrorKind::NotReal, "circulant is not real");
  require_nonzero_entries(u_mat, tol_zero);
  const double n = static_cast<double>(gamma.size());
  double u = 0.0, s = 0.0, w = 0.0;
  for (Index k = 0; k < gamma.size(); ++k) {
    const double g = gamma(k).real();
    u += g;
    s += g > 0 ? 1.0 : -1.0;
    w += 1.0 / std::abs(g);
  }
  const double value = n * u * (n * s - u * w);
  detail::cross_check(value, phi(u_mat, all_ones(gamma.size())).value, "phi_identity_circulant");
  return value;
}

/// Phi(U, U) = N(-1/|gamma_0| + sum |gamma_i|) for a self-adjoint circulant.
inline double phi_self_circulant(const Matrix& u, double tol_zero = kDefaultTolerances.zero) {
  const Vector gamma = detail::require_circulant(u);
  if (hermiticity_residual(u) > 1e-10) throw Error(ErrorKind::NotSelfAdjoint, "circulant is not self-adjoint");
  require_nonzero_entries(u, tol_zero);
  const double n = static_cast<double>(gamma.size());
  const double value = n * (-1.0 / std::abs(gamma(0)) + gamma.cwiseAbs().sum());
  detail::cross_check(value, phi(u, u).value, "phi_self_circulant");
  return value;
}

// ---------------------------------------------------------------------------
// Expectations

struct ExpectationReport {
  std::optional<double> closed_form;
  std::optional<double> exact_enumeration;
  std::optional<double> mc_estimate;
  std::optional<double> mc_stderr;
  std::size_t samples = 0;       // MC samples drawn
  std::size_t enumerated = 0;    // points visited by the exact enumeration
  std::optional<bool> mc_within_4sigma;
  std::optional<double> min_value;  // most negative Phi seen (enumeration or sampling)
  std::optional<Matrix> min_direction;
};

enum class ExpectationMode { Auto, Exact, MonteCarlo, Both };

struct ExpectationOptions {
  ExpectationMode mode = ExpectationMode::Auto;
  std::size_t samples = 100000;
  std::uint64_t seed = 0;
  unsigned threads = 0;
};

inline constexpr Index kSelfAdjointEnumerationMax = 20;
inline constexpr Index kSymmetricEnumerationMax = 24;
inline constexpr std::size_t kMcChunk = 1024;

/// Phi(U, F diag(beta) F*) for a circulant U and beta in {+-1}^N. Since
/// B^2 = I the trace term is Tr(X) = N sum|gamma|; UB is circulant with first
/// row c = (1/N) W (q o beta), W_mk = w^{-mk}, giving
/// Phi = N sum|gamma| - N sum_m Re[c_m conj(eps_m)]^2 / |gamma_m|.
class CirculantSignForm {
 public:
  explicit CirculantSignForm(const Matrix& u, double tol_zero = kDefaultTolerances.zero)
      : gamma_(detail::require_circulant(u)) {
    require_nonzero_entries(u, tol_zero);
    n_ = gamma_.size();
    const double nd = static_cast<double>(n_);
    q_ = circulant_eigenvalues(u);
    w_.resize(n_, n_);
    for (Index m = 0; m < n_; ++m)
      for (Index k = 0; k < n_; ++k)
        w_(m, k) = std::polar(1.0 / nd, -2.0 * std::numbers::pi * static_cast<double>((m * k) % n_) / nd) * q_(k);
    eps_conj_.resize(n_);
    inv_abs_.resize(n_);
    for (Index m = 0; m < n_; ++m) {
      eps_conj_(m) = std::conj(gamma_(m)) / std::abs(gamma_(m));
      inv_abs_(m) = 1.0 / std::abs(gamma_(m));
    }
    trace_term_ = nd * gamma_.cwiseAbs().sum();
  }

  Index n() const noexcept { return n_; }
  const Vector& gamma() const noexcept { return gamma_; }

  Vector row_of(const RealVector& beta) const { return w_ * beta.cast<Complex>(); }

  /// Updates c after beta_k changed sign (beta_k is the value before the flip).
  void flip(Vector& c, Index k, double beta_k) const { c -= (2.0 * beta_k) * w_.col(k); }

  double value(const Vector& c) const {
    double sum = 0.0;
    for (Index m = 0; m < n_; ++m) {
      const double re = (c(m) * eps_conj_(m)).real();
      sum += re * re * inv_abs_(m);
    }
    return trace_term_ - static_cast<double>(n_) * sum;
  }

  double value(const RealVector& beta) const { return value(row_of(beta)); }

  Matrix direction(const RealVector& beta) const {
    const Matrix f = fourier_unitary(n_);
    return hermitian_part(f * beta.cast<Complex>().asDiagonal() * f.adjoint());
  }

 private:
  Index n_ = 0;
  Vector gamma_;
  Vector q_;
  Matrix w_;
  Vector eps_conj_;
  RealVector inv_abs_;
  double trace_term_ = 0.0;
};

namespace detail {

/// beta in {+-1}^N from the free bits; with `mirror`, beta_k = beta_{N-k}.
inline RealVector beta_from_bits(Index n, std::uint64_t bits, bool mirror) {
  RealVector beta(n);
  for (Index k = 0; k < n; ++k) {
    const Index free = mirror ? std::min(k, (n - k) % n) : k;
    beta(k) = (bits >> free) & 1u ? -1.0 : 1.0;
  }
  return beta;
}

inline Index free_bits(Index n, bool mirror) { return mirror ? n / 2 + 1 : n; }

struct EnumerationResult {
  double mean = 0.0;
  std::size_t count = 0;
  double min_value = std::numeric_limits<double>::infinity();
  std::uint64_t min_bits = 0;
};

/// Mean of Phi over all sign vectors, walking them in Gray-code order.
inline EnumerationResult enumerate_signs(const CirculantSignForm& form, bool mirror) {
  const Index n = form.n();
  const Index bits = free_bits(n, mirror);
  const std::uint64_t total = std::uint64_t{1} << bits;
  EnumerationResult r;
  r.count = static_cast<std::size_t>(total);
  RealVector beta = beta_from_bits(n, 0, mirror);
  Vector c = form.row_of(beta);
  long double sum = 0.0L;
  std::uint64_t gray = 0;
  for (std::uint64_t step = 0; step < total; ++step) {
    if (step > 0) {
      const int flip_bit = std::countr_zero(step);
      gray ^= std::uint64_t{1} << flip_bit;
      if ((step & 1023u) == 0) {
        beta = beta_from_bits(n, gray, mirror);
        c = form.row_of(beta);
      } else {
        for (Index k = 0; k < n; ++k) {
          const Index free = mirror ? std::min(k, (n - k) % n) : k;
          if (free == flip_bit) {
            form.flip(c, k, beta(k));
            beta(k) = -beta(k);
          }
        }
      }
    }
    const double v = form.value(c);
    sum += v;
    if (v < r.min_value) {
      r.min_value = v;
      r.min_bits = gray;
    }
  }
  r.mean = static_cast<double>(sum / static_cast<long double>(total));
  return r;
}

template <typename State>
struct McResult {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t samples = 0;
  double min_value = std::numeric_limits<double>::infinity();
  State min_state{};
};

/// Monte Carlo mean of draw(rng, state) -> value. Samples are grouped in
/// fixed chunks, chunk j drawing from stream (seed, j), so the result does
/// not depend on the thread count. The state of the smallest sample is kept.
template <typename State, typename Draw>
McResult<State> monte_carlo(std::size_t samples, std::uint64_t seed, unsigned threads, Draw&& draw) {
  const std::size_t chunks = (samples + kMcChunk - 1) / kMcChunk;
  struct Chunk {
    double sum = 0.0, sum_sq = 0.0;
    double min_value = std::numeric_limits<double>::infinity();
    State min_state{};
  };
  std::vector<Chunk> parts(chunks);
  parallel_for(chunks, threads, [&](std::size_t j) {
    Rng rng = stream(seed, j);
    const std::size_t begin = j * kMcChunk;
    const std::size_t end = std::min(samples, begin + kMcChunk);
    Chunk& part = parts[j];
    State state{};
    for (std::size_t s = begin; s < end; ++s) {
      const double v = draw(rng, state);
      part.sum += v;
      part.sum_sq += v * v;
      if (v < part.min_value) {
        part.min_value = v;
        part.min_state = state;
      }
    }
  });
  McResult<State> r;
  r.samples = samples;
  double sum = 0.0, sum_sq = 0.0;
  for (auto& part : parts) {
    sum += part.sum;
    sum_sq += part.sum_sq;
    if (part.min_value < r.min_value) {
      r.min_value = part.min_value;
      r.min_state = std::move(part.min_state);
    }
  }
  const double n = static_cast<double>(samples);
  r.mean = sum / n;
  const double var = samples > 1 ? std::max(0.0, (sum_sq - n * r.mean * r.mean) / (n - 1.0)) : 0.0;
  r.stderr_ = std::sqrt(var / n);
  return r;
}

inline bool within_4sigma(double estimate, double stderr_, double reference) {
  return std::abs(estimate - reference) <= 4.0 * stderr_ + 1e-9;
}

inline ExpectationReport circulant_expectation(const CirculantSignForm& form, double closed, bool mirror,
                                               Index enum_max, const ExpectationOptions& opts) {
  ExpectationReport rep;
  rep.closed_form = closed;
  const Index n = form.n();
  const bool small = n <= enum_max;
  bool do_exact = false, do_mc = false;
  switch (opts.mode) {
    case ExpectationMode::Auto: do_exact = small; do_mc = !small; break;
    case ExpectationMode::Exact: do_exact = true; break;
    case ExpectationMode::MonteCarlo: do_mc = true; break;
    case ExpectationMode::Both: do_exact = true; do_mc = true; break;
  }
  if (do_exact && !small)
    throw Error(ErrorKind::InvalidArgument, "exact enumeration is limited to N <= " + std::to_string(enum_max));
  if (do_exact) {
    const EnumerationResult e = enumerate_signs(form, mirror);
    rep.exact_enumeration = e.mean;
    rep.enumerated = e.count;
    rep.min_value = e.min_value;
    rep.min_direction = form.direction(beta_from_bits(n, e.min_bits, mirror));
  }
  if (do_mc) {
    if (opts.samples == 0) throw Error(ErrorKind::InvalidArgument, "Monte Carlo needs at least one sample");
    if (free_bits(n, mirror) > 64) throw Error(ErrorKind::InvalidArgument, "N too large for sign sampling");
    const auto mc = monte_carlo<std::uint64_t>(opts.samples, opts.seed, opts.threads,
                                               [&](Rng& rng, std::uint64_t& bits) {
                                                 bits = rng();
                                                 return form.value(beta_from_bits(n, bits, mirror));
                                               });
    rep.mc_estimate = mc.mean;
    rep.mc_stderr = mc.stderr_;
    rep.samples = mc.samples;
    rep.mc_within_4sigma = within_4sigma(mc.mean, mc.stderr_, closed);
    if (!rep.min_value || mc.min_value < *rep.min_value) {
      rep.min_value = mc.min_value;
      rep.min_direction = form.direction(beta_from_bits(n, mc.min_state, mirror));
    }
  }
  return rep;
}

}  // namespace detail

/// E Phi(U,B) over B = F diag(beta) F*, beta uniform in {+-1}^N, for a
/// self-adjoint circulant U:
/// N sum|gamma_i| - (1/|gamma_0| + (1-e)/|gamma_{N/2}| + sum 1/|gamma_i|) / 2.
inline ExpectationReport expected_phi_circulant_selfadjoint(const Matrix& u, const ExpectationOptions& opts = {}) {
  detail::require_circulant(u);
  if (hermiticity_residual(u) > 1e-10) throw Error(ErrorKind::NotSelfAdjoint, "circulant is not self-adjoint");
  const CirculantSignForm form(u);
  const Vector& g = form.gamma();
  const Index n = g.size();
  const double nd = static_cast<double>(n);
  const bool even = n % 2 == 0;
  double inv_sum = 0.0;
  for (Index k = 0; k < n; ++k) inv_sum += 1.0 / std::abs(g(k));
  const double closed =
      nd * g.cwiseAbs().sum() - 0.5 * (1.0 / std::abs(g(0)) + (even ? 1.0 / std::abs(g(n / 2)) : 0.0) + inv_sum);
  return detail::circulant_expectation(form, closed, false, kSelfAdjointEnumerationMax, opts);
}

/// E Phi(U,B) over symmetric circulant orthogonal B (beta_k = beta_{N-k}),
/// for a real symmetric circulant U:
/// N sum|gamma_i| - (1/|gamma_0| + (1-e)/|gamma_{N/2}| + (N-2+e)/N sum 1/|gamma_i|).
inline ExpectationReport expected_phi_circulant_symmetric(const Matrix& u, const ExpectationOptions& opts = {}) {
  const Vector gamma = detail::require_circulant(u);
  if (!is_real(u, 1e-10) || (u - u.transpose()).norm() > 1e-10)
    throw Error(ErrorKind::NotSymmetric, "circulant is not real symmetric");
  const CirculantSignForm form(u);
  const Index n = gamma.size();
  const double nd = static_cast<double>(n);
  const bool even = n % 2 == 0;
  const double e = even ? 0.0 : 1.0;
  double inv_sum = 0.0;
  for (Index k = 0; k < n; ++k) inv_sum += 1.0 / std::abs(gamma(k));
  const double closed = nd * gamma.cwiseAbs().sum() -
                        (1.0 / std::abs(gamma(0)) + (even ? 1.0 / std::abs(gamma(n / 2)) : 0.0) +
                         (nd - 2.0 + e) / nd * inv_sum);
  return detail::circulant_expectation(form, closed, true, kSymmetricEnumerationMax, opts);
}

/// E Phi(U, G + G*) for standard complex Gaussian G:
/// (2N - 1) sum|U_ij| - sum 1/|U_ij|.
inline ExpectationReport expected_phi_gaussian(const Matrix& u, const ExpectationOptions& opts = {}) {
  require_square_finite(u);
  require_nonzero_entries(u);
  const double nd = static_cast<double>(u.rows());
  ExpectationReport rep;
  rep.closed_form = (2.0 * nd - 1.0) * one_norm(u) - u.cwiseAbs().cwiseInverse().sum();
  if (opts.mode == ExpectationMode::Exact) throw Error(ErrorKind::InvalidArgument, "no exact mode for Gaussian directions");
  if (opts.mode == ExpectationMode::MonteCarlo || opts.mode == ExpectationMode::Both ||
      opts.mode == ExpectationMode::Auto) {
    if (opts.samples == 0) throw Error(ErrorKind::InvalidArgument, "Monte Carlo needs at least one sample");
    const PhiForm form(u);
    const auto mc = detail::monte_carlo<Matrix>(opts.samples, opts.seed, opts.threads, [&](Rng& rng, Matrix& dir) {
      dir = random_hermitian(u.rows(), rng);
      return form(dir).value;
    });
    rep.mc_estimate = mc.mean;
    rep.mc_stderr = mc.stderr_;
    rep.samples = mc.samples;
    rep.mc_within_4sigma = detail::within_4sigma(mc.mean, mc.stderr_, *rep.closed_form);
    rep.min_value = mc.min_value;
    rep.min_direction = mc.min_state;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Real orthogonal second-order test

struct RealSecondOrder {
  double two_smallest_sum = 0.0;
  bool pass = false;
  RealVector eigenvalues;  // of the symmetrized S^t U, ascending
};

/// Sum of the two smallest eigenvalues of sym(S^t U); a local maximum of the
/// 1-norm on O(N) needs it nonnegative.
inline RealSecondOrder real_second_order_test(const Matrix& u, const Tolerances& tol = kDefaultTolerances) {
  require_square_finite(u);
  if (!is_real(u, 1e-12)) throw Error(ErrorKind::NotReal, "matrix is not real");
  const CriticalityReport crit = critical_report(u, tol);
  if (!crit.is_critical) throw Error(ErrorKind::NotCritical, "U is not a critical point");
  const RealMatrix x = crit.x.real();
  Eigen::SelfAdjointEigenSolver<RealMatrix> eig(0.5 * (x + x.transpose()), Eigen::EigenvaluesOnly);
  RealSecondOrder out;
  out.eigenvalues = eig.eigenvalues();
  out.two_smallest_sum = out.eigenvalues(0) + (out.eigenvalues.size() > 1 ? out.eigenvalues(1) : 0.0);
  out.pass = out.two_smallest_sum >= -tol.neg;
  return out;
}

// ---------------------------------------------------------------------------
// Defect

struct DefectResult {
  int dim_DU = 0;
  int dim_EU = 0;
  std::vector<RealMatrix> basis_DU;
  double residual = 0.0;
};

namespace detail {

struct Nullspace {
  int dim = 0;
  RealMatrix basis;  // columns
};

inline Nullspace nullspace(const RealMatrix& c) {
  const Index cols = c.cols();
  if (c.rows() == 0) return {static_cast<int>(cols), RealMatrix::Identity(cols, cols)};
  Eigen::JacobiSVD<RealMatrix> svd(c, Eigen::ComputeFullV);
  const RealVector& sv = svd.singularValues();
  const double smax = sv.size() > 0 ? sv(0) : 0.0;
  Index rank = 0;
  if (smax > 0.0)
    for (Index k = 0; k < sv.size(); ++k)
      if (sv(k) > 1e-8 * smax) ++rank;
  return {static_cast<int>(cols - rank), svd.matrixV().rightCols(cols - rank)};
}

}  // namespace detail

/// Real dimensions of
///   D_U = {A real : sum_k conj(U_ki) U_kj (A_ki - A_kj) = 0 for all i,j}
///   E_U = {B hermitian : Im[(UB)_ij conj(U_ij)] = 0 for all i,j}
/// for U = H/sqrt(N) (or U = H with `scaled`). Raw dimensions; both contain
/// the 2N-1 directions coming from row and column phases.
inline DefectResult defect(const Matrix& h, bool scaled = false) {
  require_square_finite(h);
  const Index n = h.rows();
  const double root = std::sqrt(static_cast<double>(n));
  const Matrix u = scaled ? h : Matrix(h / root);
  if (!is_hadamard(scaled ? Matrix(h * root) : h)) throw Error(ErrorKind::NotHadamard, "input is not a complex Hadamard matrix");

  // D_U on vec(A) (column-major, A_ki at index k + i n).
  const Index dim = n * n;
  RealMatrix cd(n * (n - 1), dim);
  cd.setZero();
  Index row = 0;
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j, row += 2)
      for (Index k = 0; k < n; ++k) {
        const Complex w = std::conj(u(k, i)) * u(k, j);
        cd(row, k + i * n) += w.real();
        cd(row + 1, k + i * n) += w.imag();
        cd(row, k + j * n) -= w.real();
        cd(row + 1, k + j * n) -= w.imag();
      }
  const detail::Nullspace d = detail::nullspace(cd);

  // E_U on hermitian-basis coordinates.
  const auto basis = hermitian_basis(n);
  RealMatrix ce(dim, dim);
  for (Index k = 0; k < dim; ++k) {
    const Matrix ub = u * basis[static_cast<std::size_t>(k)];
    const RealMatrix im = ub.cwiseProduct(u.conjugate()).imag();
    ce.col(k) = Eigen::Map<const RealVector>(im.data(), dim);
  }
  const detail::Nullspace e = detail::nullspace(ce);

  DefectResult out;
  out.dim_DU = d.dim;
  out.dim_EU = e.dim;
  for (Index k = 0; k < d.basis.cols(); ++k) {
    const RealVector v = d.basis.col(k);
    out.basis_DU.push_back(Eigen::Map<const RealMatrix>(v.data(), n, n));
    if (cd.rows() > 0) out.residual = std::max(out.residual, (cd * v).cwiseAbs().maxCoeff());
  }
  if (out.residual > 1e-9) throw Error(ErrorKind::Numerical, "defect basis residual too large");
  return out;
}

// ---------------------------------------------------------------------------
// Conjecture scan

enum class ScanFamily { CirculantSymmetric, CirculantSelfAdjoint };

inline std::string_view to_string(ScanFamily f) {
  return f == ScanFamily::CirculantSymmetric ? "circulant_symmetric" : "circulant_selfadjoint";
}

inline std::optional<ScanFamily> parse_scan_family(std::string_view s) {
  if (s == "circulant_symmetric" || s == "circulant-symmetric") return ScanFamily::CirculantSymmetric;
  if (s == "circulant_selfadjoint" || s == "circulant-selfadjoint") return ScanFamily::CirculantSelfAdjoint;
  return std::nullopt;
}

struct ScanFinding {
  std::size_t trial = 0;
  double value = 0.0;
  RealVector q;
  Matrix matrix;
};

struct ScanReport {
  ScanFamily family = ScanFamily::CirculantSymmetric;
  Index n = 0;
  std::size_t trials = 0;
  std::uint64_t seed = 0;
  std::vector<double> values;  // closed-form expectation per trial (NaN when no sample was usable)
  std::vector<ScanFinding> counterexamples;  // value > 1e-9
  std::size_t boundary_cases = 0;            // |value| <= 1e-9
  std::size_t unusable = 0;                  // trials with only zero-entry draws
  double max_value = -std::numeric_limits<double>::infinity();
};

inline constexpr double kScanThreshold = 1e-9;

/// Draws random +-1 eigenphase vectors in the family (redrawing when the
/// circulant has a zero entry) and evaluates the closed-form expectation.
inline ScanReport conjecture_scan(ScanFamily family, Index n, std::size_t trials, std::uint64_t seed,
                                  unsigned threads = 0) {
  if (n < 3) throw Error(ErrorKind::InvalidArgument, "scan needs N >= 3");
  if (n > 62) throw Error(ErrorKind::InvalidArgument, "scan supports N <= 62");
  const bool mirror = family == ScanFamily::CirculantSymmetric;
  ScanReport rep{family, n, trials, seed, std::vector<double>(trials, std::numeric_limits<double>::quiet_NaN()),
                 {}, 0, 0, -std::numeric_limits<double>::infinity()};
  std::vector<std::optional<ScanFinding>> found(trials);
  parallel_for(trials, threads, [&](std::size_t t) {
    Rng rng = stream(seed, t);
    for (int attempt = 0; attempt < 10000; ++attempt) {
      const RealVector q = detail::beta_from_bits(n, rng(), mirror);
      const CirculantUnitary cu = circulant_from_eigenphases(q.cast<Complex>());
      const Matrix& u = cu.unitary.matrix();
      if (u.cwiseAbs().minCoeff() <= kDefaultTolerances.zero) continue;
      const Vector& g = cu.spec.gamma;
      const double nd = static_cast<double>(n);
      const bool even = n % 2 == 0;
      double inv_sum = 0.0;
      for (Index k = 0; k < n; ++k) inv_sum += 1.0 / std::abs(g(k));
      const double edge = 1.0 / std::abs(g(0)) + (even ? 1.0 / std::abs(g(n / 2)) : 0.0);
      const double value = mirror ? nd * g.cwiseAbs().sum() - (edge + (nd - 2.0 + (even ? 0.0 : 1.0)) / nd * inv_sum)
                                  : nd * g.cwiseAbs().sum() - 0.5 * (edge + inv_sum);
      rep.values[t] = value;
      if (value > kScanThreshold) found[t] = ScanFinding{t, value, q, u};
      return;
    }
  });
  for (std::size_t t = 0; t < trials; ++t) {
    const double v = rep.values[t];
    if (std::isnan(v)) {
      ++rep.unusable;
      continue;
    }
    rep.max_value = std::max(rep.max_value, v);
    if (std::abs(v) <= kScanThreshold) ++rep.boundary_cases;
    if (found[t]) rep.counterexamples.push_back(std::move(*found[t]));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Exclusion pipeline

enum class Criterion {
  PhiIdentityPattern,
  PhiOneMinusU,
  PhiIdentityCirculant,
  PhiSelfCirculant,
  ExpectationNegative,
  HessianNegativeDirection,
  None,
};

inline std::string_view to_string(Criterion c) {
  switch (c) {
    case Criterion::PhiIdentityPattern: return "phi_identity_pattern";
    case Criterion::PhiOneMinusU: return "phi_one_minus_u";
    case Criterion::PhiIdentityCirculant: return "phi_identity_circulant";
    case Criterion::PhiSelfCirculant: return "phi_self_circulant";
    case Criterion::ExpectationNegative: return "expectation_negative";
    case Criterion::HessianNegativeDirection: return "hessian_negative_direction";
    case Criterion::None: return "none";
  }
  return "?";
}

struct ExclusionVerdict {
  bool excluded = false;
  Criterion criterion = Criterion::None;
  double value = 0.0;
  std::optional<Matrix> witness;
  std::optional<double> witness_phi;  // Phi(U, witness), re-evaluated
  std::vector<std::string> log;       // one line per probe tried
};

struct PipelineOptions {
  Tolerances tol = kDefaultTolerances;
  ExpectationOptions expectation{};
};

/// Reads U as x P + y Q with x < 0 < y when it has exactly two real entry
/// values of opposite signs forming a pattern, and matches it to a real branch.
inline std::optional<PatternUnitary> recognize_pattern_unitary(const Matrix& u, double tol = 1e-9) {
  if (!is_real(u, tol)) return std::nullopt;
  const RealMatrix r = u.real();
  const double lo = r.minCoeff(), hi = r.maxCoeff();
  if (!(lo < 0.0 && hi > 0.0)) return std::nullopt;
  IncidenceMatrix p(u.rows(), u.cols());
  for (Index j = 0; j < u.cols(); ++j)
    for (Index i = 0; i < u.rows(); ++i) {
      if (std::abs(r(i, j) - lo) <= tol) p(i, j) = 1;
      else if (std::abs(r(i, j) - hi) <= tol) p(i, j) = 0;
      else return std::nullopt;
    }
  const auto rows = detail::row_profile(p);
  if (!rows) return std::nullopt;
  const IncidenceMatrix pt = p.transpose();
  const auto cols = detail::row_profile(pt);
  if (!cols || cols->a != rows->a || cols->b != rows->b || cols->c != rows->c) return std::nullopt;
  if (rows->b * rows->b - rows->b != rows->a * rows->c) return std::nullopt;
  PatternABC pat;
  pat.a = rows->a;
  pat.b = rows->b;
  pat.c = rows->c;
  pat.p = p;
  pat.q = IncidenceMatrix::Ones(u.rows(), u.cols()) - p;
  for (Branch b : {Branch::RealMinus, Branch::RealPlus}) {
    try {
      PatternUnitary pu = pattern_unitary(pat, b);
      if ((pu.matrix.matrix() - u).cwiseAbs().maxCoeff() <= 1e-8) return pu;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::BranchUnavailable && e.kind() != ErrorKind::NotUnitary) throw;
    }
  }
  return std::nullopt;
}

/// Runs the criteria from cheapest to most expensive and stops at the first
/// one giving a negative value: pattern closed forms, circulant closed forms,
/// expectations over random circulant directions, then the full Phi spectrum.
inline ExclusionVerdict exclusion_pipeline(const Matrix& u, const PipelineOptions& opts = {}) {
  const Tolerances& tol = opts.tol;
  if (!critical_report(u, tol).is_critical) throw Error(ErrorKind::NotCritical, "U is not a critical point");
  const Index n = u.rows();
  ExclusionVerdict v;

  auto fire = [&](Criterion c, double value, std::optional<Matrix> witness) {
    v.excluded = true;
    v.criterion = c;
    v.value = value;
    if (witness) {
      const double check = phi(u, *witness, tol).value;
      if (!(check < 0.0)) throw Error(ErrorKind::Numerical, "witness does not certify a negative value");
      v.witness_phi = check;
      v.witness = std::move(witness);
    }
    return v;
  };
  auto note = [&](Criterion c, double value) {
    v.log.push_back(std::string(to_string(c)) + " = " + std::to_string(value));
  };

  if (const auto pu = recognize_pattern_unitary(u)) {
    const double id = phi_identity_pattern(*pu);
    note(Criterion::PhiIdentityPattern, id);
    if (id < -tol.neg) return fire(Criterion::PhiIdentityPattern, id, all_ones(n));
    if (pu->pattern.symmetric() && pu->branch == Branch::RealMinus) {
      const double om = phi_one_minus_u(*pu);
      note(Criterion::PhiOneMinusU, om);
      if (om < -tol.neg) return fire(Criterion::PhiOneMinusU, om, detail::identity(n) - u);
    }
  }

  if (circulant_first_row(u, 1e-10)) {
    const bool real = is_real(u, 1e-10);
    const bool self_adjoint = hermiticity_residual(u) <= 1e-10;
    if (real) {
      const double id = phi_identity_circulant(u, tol.zero);
      note(Criterion::PhiIdentityCirculant, id);
      if (id < -tol.neg) return fire(Criterion::PhiIdentityCirculant, id, all_ones(n));
    }
    if (self_adjoint) {
      const double self = phi_self_circulant(u, tol.zero);
      note(Criterion::PhiSelfCirculant, self);
      if (self < -tol.neg) return fire(Criterion::PhiSelfCirculant, self, u);
    }
    auto try_expectation = [&](const ExpectationReport& rep) -> bool {
      const double mean = rep.exact_enumeration ? *rep.exact_enumeration : *rep.closed_form;
      note(Criterion::ExpectationNegative, mean);
      if (!(mean < -tol.neg)) return false;
      std::optional<Matrix> witness;
      if (rep.min_direction && rep.min_value && *rep.min_value < 0.0) witness = rep.min_direction;
      fire(Criterion::ExpectationNegative, mean, std::move(witness));
      return true;
    };
    if (real && self_adjoint) {
      if (try_expectation(expected_phi_circulant_symmetric(u, opts.expectation))) return v;
    }
    if (self_adjoint) {
      if (try_expectation(expected_phi_circulant_selfadjoint(u, opts.expectation))) return v;
    }
  }

  if (const auto dd = descent_direction(u, tol)) {
    note(Criterion::HessianNegativeDirection, dd->lambda_min);
    return fire(Criterion::HessianNegativeDirection, dd->lambda_min, dd->direction);
  }
  note(Criterion::HessianNegativeDirection, 0.0);
  return v;
}

inline ExclusionVerdict exclusion_pipeline(const UnitaryCandidate& u, const PipelineOptions& opts = {}) {
  return exclusion_pipeline(u.matrix(), opts);
}

}  // namespace ahm
