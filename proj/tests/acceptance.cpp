// Acceptance harness: one PASS/FAIL line per criterion, nonzero exit when any
// criterion fails. Mechanism errors (exceptions) count as failures.

#include <chrono>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "ahm/ahm.hpp"

using namespace ahm;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

struct Check {
  int id;
  std::string name;
  double budget_s;  // 0: no runtime bound
  std::function<Outcome()> run;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

double p_norm_p(const Matrix& m, double p) { return m.cwiseAbs().array().pow(p).sum(); }

double central_first(const Matrix& u, const Matrix& a, double p, double h) {
  return (p_norm_p(u * expm_skew(a, h).matrix(), p) - p_norm_p(u * expm_skew(a, -h).matrix(), p)) / (2.0 * h);
}

double central_second(const Matrix& u, const Matrix& a, double p, double h) {
  return (p_norm_p(u * expm_skew(a, h).matrix(), p) - 2.0 * p_norm_p(u, p) +
          p_norm_p(u * expm_skew(a, -h).matrix(), p)) /
         (h * h);
}

// Circulant with eigenvalues +-1 drawn from `rng`, redrawn until no entry vanishes.
Matrix random_sign_circulant(Index n, bool mirror, Rng& rng) {
  for (;;) {
    const RealVector q = detail::beta_from_bits(n, rng(), mirror);
    const Matrix u = circulant_from_eigenphases(q.cast<Complex>()).unitary.matrix();
    if (u.cwiseAbs().minCoeff() > 1e-6) return u;
  }
}

// Rank of the D_U constraint map, built by applying it to each unit matrix.
int brute_force_dim_du(const Matrix& h) {
  const Index n = h.rows();
  const Matrix u = h / std::sqrt(static_cast<double>(n));
  RealMatrix image(n * (n - 1), n * n);
  for (Index a = 0; a < n; ++a)
    for (Index b = 0; b < n; ++b) {
      RealMatrix e = RealMatrix::Zero(n, n);
      e(a, b) = 1.0;
      Index row = 0;
      for (Index i = 0; i < n; ++i)
        for (Index j = i + 1; j < n; ++j) {
          Complex s = 0.0;
          for (Index k = 0; k < n; ++k) s += std::conj(u(k, i)) * u(k, j) * (e(k, i) - e(k, j));
          image(row++, a * n + b) = s.real();
          image(row++, a * n + b) = s.imag();
        }
    }
  Eigen::FullPivLU<RealMatrix> lu(image);
  lu.setThreshold(1e-10);
  return static_cast<int>(n * n - lu.rank());
}

Outcome theorem_identity_direction() {
  Outcome o;
  double worst = 0.0;
  for (Index n = 3; n <= 12; ++n) {
    const double nd = static_cast<double>(n);
    const double expected = nd * nd * (nd - 1.0) * (nd - 4.0) / (2.0 * (nd - 2.0));
    const double got = phi(kn(n), all_ones(n)).value;
    worst = std::max(worst, std::abs(got - expected));
  }
  const double v3 = phi(kn(3), all_ones(3)).value, v4 = phi(kn(4), all_ones(4)).value;
  o.pass = worst <= 1e-8 && std::abs(v3 + 9.0) <= 1e-8 && std::abs(v4) <= 1e-8;
  o.detail = "max error " + fmt(worst) + ", N=3: " + fmt(v3) + ", N=4: " + fmt(v4);
  return o;
}

Outcome theorem_padded_block() {
  Outcome o;
  const double x = 1.0, y = 2.0, z = -3.0;
  RealMatrix block(4, 4);
  block << 0, x, y, z, x, 0, z, y, y, z, 0, x, z, y, x, 0;
  double worst = 0.0;
  for (Index n = 5; n <= 12; ++n) {
    Matrix b = Matrix::Zero(n, n);
    b.topLeftCorner(4, 4) = block.cast<Complex>();
    const double nd = static_cast<double>(n);
    const double expected = (2.0 - nd / 2.0) * (b * b).trace().real();
    worst = std::max(worst, std::abs(phi(kn(n), b).value - expected));
  }
  o.pass = worst <= 1e-8;
  o.detail = "max error " + fmt(worst);
  return o;
}

Outcome symmetric_expectation_table() {
  Outcome o;
  const double table[] = {-2.0, 0.0, 0.0, -1.5, -3.6};
  double worst_closed = 0.0, worst_enum = 0.0;
  std::ostringstream vals;
  for (Index n = 3; n <= 7; ++n) {
    ExpectationOptions opts;
    opts.mode = ExpectationMode::Exact;
    const ExpectationReport r = expected_phi_circulant_symmetric(kn(n).matrix(), opts);
    worst_closed = std::max(worst_closed, std::abs(*r.closed_form - table[n - 3]));
    worst_enum = std::max(worst_enum, std::abs(*r.exact_enumeration - table[n - 3]));
    vals << (n > 3 ? " " : "") << fmt(*r.closed_form);
  }
  o.pass = worst_closed <= 1e-10 && worst_enum <= 1e-9;
  o.detail = "values " + vals.str() + "; closed err " + fmt(worst_closed) + ", enum err " + fmt(worst_enum);
  return o;
}

Outcome circulant_oracles() {
  Outcome o;
  double worst = 0.0;
  int outside = 0, total = 0;
  for (int family = 0; family < 2; ++family) {
    const bool mirror = family == 1;
    for (int i = 0; i < 50; ++i) {
      Rng rng = stream(4000 + static_cast<std::uint64_t>(family), static_cast<std::uint64_t>(i));
      const Index n = 3 + i % 10;
      const Matrix u = random_sign_circulant(n, mirror, rng);
      ExpectationOptions opts;
      opts.mode = ExpectationMode::Both;
      opts.samples = 100000;
      opts.seed = static_cast<std::uint64_t>(i);
      const ExpectationReport r =
          mirror ? expected_phi_circulant_symmetric(u, opts) : expected_phi_circulant_selfadjoint(u, opts);
      worst = std::max(worst, std::abs(*r.closed_form - *r.exact_enumeration));
      outside += !*r.mc_within_4sigma;
      ++total;
    }
  }
  o.pass = worst <= 1e-9 && outside == 0;
  o.detail = std::to_string(total) + " unitaries, closed vs enum max error " + fmt(worst) + ", MC outside 4 sigma: " +
             std::to_string(outside);
  return o;
}

Outcome gaussian_expectation() {
  Outcome o;
  const std::vector<std::pair<std::string, Matrix>> cases = {
      {"kn3", kn(3).matrix()},
      {"kn5", kn(5).matrix()},
      {"F3", fourier_unitary(3)},
      {"fano-", pattern_unitary(incidence_fano(), Branch::RealMinus).matrix.matrix()}};
  std::ostringstream s;
  for (const auto& [name, u] : cases) {
    ExpectationOptions opts;
    opts.samples = 100000;
    opts.seed = 5;
    const ExpectationReport r = expected_phi_gaussian(u, opts);
    o.pass = o.pass && *r.mc_within_4sigma;
    s << name << " " << fmt(*r.closed_form) << " vs " << fmt(*r.mc_estimate) << "+-" << fmt(*r.mc_stderr) << "; ";
  }
  o.detail = s.str();
  return o;
}

Outcome exclusions() {
  Outcome o;
  struct Case {
    std::string name;
    Matrix u;
    bool excluded;
  };
  std::vector<Case> cases = {
      {"kn3", kn(3).matrix(), true},
      {"kn5", kn(5).matrix(), true},
      {"kn6", kn(6).matrix(), true},
      {"kn7", kn(7).matrix(), true},
      {"fano-", pattern_unitary(incidence_fano(), Branch::RealMinus).matrix.matrix(), true},
      {"pg2_3-", pattern_unitary(incidence_projective_plane(3), Branch::RealMinus).matrix.matrix(), true},
      {"paley11-", pattern_unitary(incidence_paley_biplane(), Branch::RealMinus).matrix.matrix(), true},
      {"K4/2", kn(4).matrix(), false},
  };
  for (Index n = 2; n <= 6; ++n) cases.push_back({"F" + std::to_string(n), fourier_unitary(n), false});
  std::ostringstream s;
  for (const auto& c : cases) {
    const ExclusionVerdict v = exclusion_pipeline(c.u);
    bool ok = v.excluded == c.excluded;
    if (v.excluded) ok = ok && v.witness && v.witness_phi && *v.witness_phi < 0.0 &&
                         std::abs(phi(c.u, *v.witness).value - *v.witness_phi) <= 1e-10;
    if (!ok) o.pass = false;
    s << c.name << ":" << to_string(v.criterion) << (ok ? "" : "(WRONG)") << " ";
  }
  o.detail = s.str();
  return o;
}

Outcome derivative_checks() {
  Outcome o;
  const double powers[] = {1.0, 1.5, 3.0};
  double worst1 = 0.0, worst2 = 0.0, worst_eig = 0.0;
  for (int i = 0; i < 100; ++i) {
    Rng rng = stream(7000, static_cast<std::uint64_t>(i));
    const Index n = 2 + i % 4;
    const double p = powers[i % 3];
    const Matrix u = haar_unitary(n, rng);
    const Matrix a = random_skew(n, rng);
    const double d1 = derivative_first(u, a, p), d2 = derivative_second(u, a, p);
    worst1 = std::max(worst1, std::abs(d1 - central_first(u, a, p, 1e-5)) / std::max(1.0, std::abs(d1)));
    worst2 = std::max(worst2, std::abs(d2 - central_second(u, a, p, 1e-4)) / std::max(1.0, std::abs(d2)));
    const HessianSpectrum h = hessian_spectrum(u);
    worst_eig = std::max(worst_eig, std::abs(phi(u, h.min_direction).value - h.eigenvalues(0)));
  }
  o.pass = worst1 <= 1e-5 && worst2 <= 1e-4 && worst_eig <= 1e-8;
  o.detail = "first " + fmt(worst1) + ", second " + fmt(worst2) + ", min eigenpair " + fmt(worst_eig);
  return o;
}

Outcome saturation() {
  Outcome o;
  std::vector<std::pair<std::string, Matrix>> cases;
  for (Index n = 2; n <= 6; ++n) cases.push_back({"F" + std::to_string(n), fourier_unitary(n)});
  cases.push_back({"K4", kn(4).matrix()});
  std::ostringstream s;
  for (const auto& [name, u] : cases) {
    const Index n = u.rows();
    const HessianSpectrum h = hessian_spectrum(u);
    Index kernel = 0;
    for (Index k = 0; k < h.dim; ++k) kernel += std::abs(h.eigenvalues(k)) <= 1e-9;
    // The first n basis elements are the real diagonal directions.
    const double diag_leak = h.form.leftCols(n).cwiseAbs().maxCoeff();
    const bool ok = h.eigenvalues(0) >= -1e-8 && kernel >= n && diag_leak <= 1e-9;
    if (!ok) o.pass = false;
    s << name << " min " << fmt(h.eigenvalues(0)) << " ker " << kernel << (ok ? "" : "(WRONG)") << "; ";
  }
  o.detail = s.str();
  return o;
}

Outcome defect_equality() {
  Outcome o;
  const std::vector<std::pair<std::string, Matrix>> cases = {
      {"F2", fourier(2)}, {"F3", fourier(3)}, {"F4", fourier(4)}, {"F5", fourier(5)}, {"F2xF2", fourier_group({2, 2})}};
  std::ostringstream s;
  for (const auto& [name, h] : cases) {
    const DefectResult d = defect(h);
    const int brute = brute_force_dim_du(h);
    const bool ok = d.dim_DU == d.dim_EU && d.dim_DU == brute;
    if (!ok) o.pass = false;
    s << name << " " << d.dim_DU << "/" << d.dim_EU << (ok ? "" : "(WRONG)") << " ";
  }
  const int f2 = defect(fourier(2)).dim_DU;
  o.pass = o.pass && f2 == 3 && brute_force_dim_du(fourier(2)) == 3;
  o.detail = s.str() + "; F2 dim_DU " + std::to_string(f2);
  return o;
}

Outcome search_soundness() {
  Outcome o;
  std::ostringstream s;
  for (Index n : {2, 3}) {
    const SearchReport r = search_chm(n, 20, 1000 + static_cast<std::uint64_t>(n));
    int converged = 0;
    bool f2_ok = true;
    for (const auto& run : r.runs) {
      const bool chm = chm_deviation(run.final) <= 1e-6;
      converged += chm;
      if (n == 2 && chm) f2_ok = f2_ok && (dephase(std::sqrt(2.0) * run.final) - fourier(2)).cwiseAbs().maxCoeff() <= 1e-5;
    }
    if (converged < 18 || !f2_ok) o.pass = false;
    s << "N=" << n << ": " << converged << "/20 converged" << (n == 2 ? (f2_ok ? ", all dephase to F2" : ", F2 check failed") : "")
      << "; ";
  }
  o.detail = s.str();
  return o;
}

Outcome conjecture_scan_run() {
  Outcome o;
  std::ostringstream s;
  std::size_t flagged = 0;
  for (Index n : {5, 7, 9, 11}) {
    const ScanReport r = conjecture_scan(ScanFamily::CirculantSymmetric, n, 1000, 8000 + static_cast<std::uint64_t>(n));
    flagged += r.counterexamples.size();
    s << "N=" << n << " max " << fmt(r.max_value) << " flagged " << r.counterexamples.size() << "; ";
    for (const auto& c : r.counterexamples) {
      std::printf("FINDING N=%ld trial=%zu value=%.17g q=", static_cast<long>(n), c.trial, c.value);
      for (Index k = 0; k < c.q.size(); ++k) std::printf("%s%g", k ? "," : "", c.q(k));
      std::printf("\n%s", io::to_text(c.matrix).c_str());
    }
  }
  o.detail = s.str() + "total flagged " + std::to_string(flagged);
  return o;
}

}  // namespace

int main() {
  const std::vector<Check> criteria = {
      {1, "kn identity-direction formula", 1.0, theorem_identity_direction},
      {2, "kn padded zero-row-sum direction", 0.0, theorem_padded_block},
      {3, "symmetric circulant expectation table", 1.0, symmetric_expectation_table},
      {4, "circulant closed form / enumeration / MC", 30.0, circulant_oracles},
      {5, "Gaussian expectation vs MC", 0.0, gaussian_expectation},
      {6, "exclusion pipeline verdicts", 10.0, exclusions},
      {7, "derivatives and Hessian eigenpairs", 0.0, derivative_checks},
      {8, "saturation at Hadamard points", 0.0, saturation},
      {9, "defect dimensions", 0.0, defect_equality},
      {10, "CHM search soundness", 60.0, search_soundness},
      {11, "circulant expectation scan", 0.0, conjecture_scan_run},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_s > 0.0 && secs > c.budget_s) {
      o.pass = false;
      o.detail += " (over the " + fmt(c.budget_s) + " s budget)";
    }
    failed += !o.pass;
    std::printf("%s [%d] %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
