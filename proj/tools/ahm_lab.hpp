#pragma once

// ahm-lab command implementations. run_cli() is the whole program minus the
// process boundary, so tests can drive it with in-memory streams.

#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ahm/ahm.hpp"

namespace ahm::cli {

using nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitPrecondition = 3;
inline constexpr int kExitNumerical = 4;

inline constexpr const char* kCsvVersion = "# ahm-lab v1";
inline constexpr const char* kCsvColumns = "family,N,seed,closed_form,enum,mc,stderr,verdict";

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Parse:
    case ErrorKind::InvalidArgument:
    case ErrorKind::NotSquare:
    case ErrorKind::NonFinite:
      return kExitInput;
    case ErrorKind::Numerical:
      return kExitNumerical;
    default:
      return kExitPrecondition;
  }
}

enum class Format { Auto, Json, Csv, Text };

struct RunConfig {
  std::uint64_t seed = 0;
  unsigned threads = 0;  // 0 = hardware concurrency
  Format format = Format::Auto;
  Tolerances tol;
  std::string out_path;
};

namespace detail {

inline std::string num(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  std::ostringstream s;
  s << std::setprecision(12) << v;
  return s.str();
}

inline std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : ""; }

inline json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline std::vector<Index> parse_range(const std::string& spec) {
  auto to_index = [&](const std::string& s) -> Index {
    std::size_t pos = 0;
    long long v = 0;
    try {
      v = std::stoll(s, &pos);
    } catch (const std::exception&) {
      throw Error(ErrorKind::InvalidArgument, "bad size '" + spec + "'");
    }
    if (pos != s.size() || v < 1) throw Error(ErrorKind::InvalidArgument, "bad size '" + spec + "'");
    return static_cast<Index>(v);
  };
  std::vector<Index> out;
  std::stringstream parts(spec);
  for (std::string part; std::getline(parts, part, ',');) {
    const auto dots = part.find("..");
    if (dots == std::string::npos) {
      out.push_back(to_index(part));
      continue;
    }
    const Index lo = to_index(part.substr(0, dots)), hi = to_index(part.substr(dots + 2));
    if (hi < lo) throw Error(ErrorKind::InvalidArgument, "empty range '" + part + "'");
    for (Index n = lo; n <= hi; ++n) out.push_back(n);
  }
  if (out.empty()) throw Error(ErrorKind::InvalidArgument, "empty size list");
  return out;
}

inline Matrix read_matrix_arg(const std::string& path, std::istream& in) {
  if (path.empty() || path == "-") return io::read_matrix(in);
  std::ifstream file(path);
  if (!file) throw Error(ErrorKind::Parse, "cannot open '" + path + "'");
  return io::read_matrix(file);
}

inline Matrix rescale(const Matrix& m, const std::string& how) {
  if (how.empty() || how == "none") return m;
  if (how == "sqrt-n") return m / std::sqrt(static_cast<double>(m.rows()));
  throw Error(ErrorKind::InvalidArgument, "unknown --rescale '" + how + "' (expected sqrt-n)");
}

inline Matrix ones_matrix(const IncidenceMatrix& m) { return m.cast<Complex>(); }

inline std::string matrix_output(const Matrix& m, Format f) {
  if (f == Format::Text || f == Format::Csv) return io::to_text(m);
  return io::to_json(m).dump(2) + "\n";
}

}  // namespace detail

/// Shared state of one invocation.
class Lab {
 public:
  explicit Lab(std::istream& in) : in_(in) {}

  RunConfig config;

  std::string out;  // report text, written at the end

  // construct
  std::string family;
  Index n = 0;
  std::vector<Index> sizes;
  std::string design = "fano";
  std::string branch = "real-minus";
  int q_prime = 2;
  std::vector<std::string> phases;

  // inputs
  std::string matrix_path;
  std::string direction;
  std::string rescale_how;
  bool scaled = false;

  // expect / scan / search
  std::string range = "3..7";
  std::string kind = "symmetric";
  bool exact = false;
  bool mc = false;
  std::size_t samples = 100000;
  std::size_t trials = 1000;
  std::string scan_family = "circulant-symmetric";
  std::size_t starts = 20;

  Format fmt(Format fallback) const { return config.format == Format::Auto ? fallback : config.format; }

  Matrix load_unitary() {
    Matrix m = detail::rescale(detail::read_matrix_arg(matrix_path, in_), rescale_how);
    return UnitaryCandidate::certify(m, config.tol.unitary).matrix();
  }

  void construct() {
    Matrix m;
    auto need_n = [&] {
      if (n < 1) throw Error(ErrorKind::InvalidArgument, "--n must be given and >= 1");
    };
    if (family == "fourier") {
      need_n();
      m = fourier(n);
    } else if (family == "fourier_group" || family == "fourier-group") {
      if (sizes.empty()) throw Error(ErrorKind::InvalidArgument, "--sizes is required");
      m = fourier_group(sizes);
    } else if (family == "kn") {
      need_n();
      m = kn(n).matrix();
    } else if (family == "pattern") {
      const auto br = parse_branch(branch);
      if (!br) throw Error(ErrorKind::InvalidArgument, "unknown branch '" + branch + "'");
      m = pattern_unitary(design_by_key(design), *br, config.tol.unitary).matrix.matrix();
    } else if (family == "fano") {
      m = detail::ones_matrix(incidence_fano().p);
    } else if (family == "paley11") {
      m = detail::ones_matrix(incidence_paley_biplane().p);
    } else if (family == "pg2") {
      m = detail::ones_matrix(incidence_projective_plane(q_prime).p);
    } else if (family == "circulant") {
      if (phases.empty()) throw Error(ErrorKind::InvalidArgument, "--phases is required");
      Vector q(static_cast<Index>(phases.size()));
      for (std::size_t k = 0; k < phases.size(); ++k) q(static_cast<Index>(k)) = io::parse_complex_token(phases[k]);
      m = circulant_from_eigenphases(q).unitary.matrix();
    } else {
      throw Error(ErrorKind::InvalidArgument, "unknown family '" + family + "'");
    }
    out = detail::matrix_output(m, fmt(Format::Json));
  }

  void check() {
    const Matrix u = load_unitary();
    const CriticalityReport crit = critical_report(u, config.tol);
    json rep{{"n", u.rows()},
             {"unitarity_residual", unitarity_residual(u)},
             {"one_norm", one_norm(u)},
             {"is_critical", crit.is_critical},
             {"criticality_residual", crit.residual},
             {"psd_min_eig", crit.psd_min_eig}};
    try {
      const BalanceReport bal = is_balanced(u, 1e-9, config.tol.cluster);
      rep["semi_balanced"] = bal.semi_balanced;
      rep["balanced"] = bal.balanced;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::AmbiguousClustering) throw;
      rep["semi_balanced"] = nullptr;
      rep["balanced"] = nullptr;
    }
    if (crit.is_critical) {
      PipelineOptions popts;
      popts.tol = config.tol;
      popts.expectation.seed = config.seed;
      popts.expectation.threads = config.threads;
      const ExclusionVerdict v = exclusion_pipeline(u, popts);
      rep["verdict"] = {{"excluded", v.excluded},
                        {"criterion", std::string(to_string(v.criterion))},
                        {"value", v.value},
                        {"witness_phi", detail::opt_json(v.witness_phi)},
                        {"witness", v.witness ? io::to_json(*v.witness) : json(nullptr)},
                        {"probes", v.log}};
    } else {
      rep["verdict"] = nullptr;
    }
    if (fmt(Format::Text) == Format::Json) {
      out = rep.dump(2) + "\n";
      return;
    }
    std::ostringstream s;
    s << "n                     " << u.rows() << "\n"
      << "unitarity_residual    " << detail::num(rep["unitarity_residual"]) << "\n"
      << "one_norm              " << detail::num(rep["one_norm"]) << "\n"
      << "is_critical           " << (crit.is_critical ? "true" : "false") << "\n"
      << "criticality_residual  " << detail::num(crit.residual) << "\n"
      << "psd_min_eig           " << detail::num(crit.psd_min_eig) << "\n"
      << "semi_balanced         " << rep["semi_balanced"].dump() << "\n"
      << "balanced              " << rep["balanced"].dump() << "\n";
    if (rep["verdict"].is_null()) {
      s << "verdict               skipped (not critical)\n";
    } else {
      const auto& v = rep["verdict"];
      s << "verdict               " << (v["excluded"].get<bool>() ? "excluded" : "not excluded") << "\n"
        << "criterion             " << v["criterion"].get<std::string>() << "\n"
        << "value                 " << detail::num(v["value"]) << "\n";
      for (const auto& line : v["probes"]) s << "  probe " << line.get<std::string>() << "\n";
      if (!v["witness"].is_null()) {
        s << "witness_phi           " << detail::num(v["witness_phi"]) << "\n"
          << "witness\n"
          << io::to_text(io::from_json(v["witness"]));
      }
    }
    out = s.str();
  }

  Matrix direction_for(const Matrix& u) {
    if (direction.empty()) throw Error(ErrorKind::InvalidArgument, "--direction is required");
    if (direction == "ones") return all_ones(u.rows());
    if (direction == "one-minus-u") return Matrix::Identity(u.rows(), u.cols()) - u;
    if (direction == "self") return u;
    std::ifstream file(direction);
    if (!file) throw Error(ErrorKind::Parse, "cannot open '" + direction + "'");
    return io::read_matrix(file);
  }

  void phi_cmd() {
    const Matrix u = load_unitary();
    const PhiReport r = phi(u, direction_for(u), config.tol);
    json rep{{"value", r.value},
             {"trace_term", r.trace_term},
             {"sum_term", r.sum_term},
             {"direction_norm", r.direction_norm},
             {"critical", r.critical}};
    if (fmt(Format::Text) == Format::Json) {
      out = rep.dump(2) + "\n";
      return;
    }
    std::ostringstream s;
    s << "phi             " << detail::num(r.value) << "\n"
      << "trace_term      " << detail::num(r.trace_term) << "\n"
      << "sum_term        " << detail::num(r.sum_term) << "\n"
      << "direction_norm  " << detail::num(r.direction_norm) << "\n";
    if (!r.critical) s << "warning         U is not critical; Phi is reported but has no second-order meaning\n";
    out = s.str();
  }

  void spectrum() {
    const Matrix u = load_unitary();
    const HessianSpectrum h = hessian_spectrum(u, config.tol);
    std::vector<double> eig(h.eigenvalues.data(), h.eigenvalues.data() + h.eigenvalues.size());
    if (fmt(Format::Text) == Format::Json) {
      out = json{{"dim", h.dim}, {"eigenvalues", eig}, {"min_direction", io::to_json(h.min_direction)}}.dump(2) + "\n";
      return;
    }
    std::ostringstream s;
    s << "dim " << h.dim << "\neigenvalues";
    for (double e : eig) s << " " << detail::num(e);
    s << "\nmin_direction\n" << io::to_text(h.min_direction);
    out = s.str();
  }

  ExpectationOptions expectation_options() const {
    ExpectationOptions o;
    o.mode = exact && mc ? ExpectationMode::Both
             : exact     ? ExpectationMode::Exact
             : mc        ? ExpectationMode::MonteCarlo
                         : ExpectationMode::Auto;
    o.samples = samples;
    o.seed = config.seed;
    o.threads = config.threads;
    return o;
  }

  static std::string sign_verdict(double v) {
    if (std::abs(v) <= kScanThreshold) return "boundary";
    return v < 0 ? "negative" : "positive";
  }

  void expect() {
    struct Row {
      std::string family;
      Index n;
      ExpectationReport rep;
    };
    std::vector<Row> rows;
    const ExpectationOptions opts = expectation_options();
    auto evaluate = [&](const Matrix& u) {
      if (kind == "symmetric") return expected_phi_circulant_symmetric(u, opts);
      if (kind == "selfadjoint") return expected_phi_circulant_selfadjoint(u, opts);
      if (kind == "gaussian") {
        ExpectationOptions g = opts;
        if (g.mode == ExpectationMode::Auto) g.mode = ExpectationMode::MonteCarlo;
        return expected_phi_gaussian(u, g);
      }
      throw Error(ErrorKind::InvalidArgument, "unknown --kind '" + kind + "'");
    };
    if (!matrix_path.empty()) {
      const Matrix u = load_unitary();
      rows.push_back({"matrix", u.rows(), evaluate(u)});
    } else if (family == "kn") {
      for (Index k : detail::parse_range(range)) rows.push_back({"kn", k, evaluate(kn(k).matrix())});
    } else {
      throw Error(ErrorKind::InvalidArgument, "expect needs --family kn or --matrix");
    }
    const Format f = fmt(Format::Text);
    if (f == Format::Json) {
      json arr = json::array();
      for (const auto& r : rows)
        arr.push_back({{"family", r.family},
                       {"kind", kind},
                       {"N", r.n},
                       {"seed", config.seed},
                       {"closed_form", detail::opt_json(r.rep.closed_form)},
                       {"enum", detail::opt_json(r.rep.exact_enumeration)},
                       {"mc", detail::opt_json(r.rep.mc_estimate)},
                       {"stderr", detail::opt_json(r.rep.mc_stderr)},
                       {"samples", r.rep.samples},
                       {"verdict", sign_verdict(*r.rep.closed_form)}});
      out = arr.dump(2) + "\n";
      return;
    }
    std::ostringstream s;
    if (f == Format::Csv) {
      s << kCsvVersion << " expect kind=" << kind << "\n" << kCsvColumns << "\n";
      for (const auto& r : rows)
        s << r.family << "," << r.n << "," << config.seed << "," << detail::opt_num(r.rep.closed_form) << ","
          << detail::opt_num(r.rep.exact_enumeration) << "," << detail::opt_num(r.rep.mc_estimate) << ","
          << detail::opt_num(r.rep.mc_stderr) << "," << sign_verdict(*r.rep.closed_form) << "\n";
    } else {
      s << "expectation of Phi, kind=" << kind << ", seed=" << config.seed << "\n";
      s << std::left << std::setw(8) << "family" << std::setw(5) << "N" << std::setw(20) << "closed_form"
        << std::setw(20) << "enum" << std::setw(20) << "mc" << std::setw(16) << "stderr" << "verdict\n";
      for (const auto& r : rows)
        s << std::left << std::setw(8) << r.family << std::setw(5) << r.n << std::setw(20)
          << detail::opt_num(r.rep.closed_form) << std::setw(20) << detail::opt_num(r.rep.exact_enumeration)
          << std::setw(20) << detail::opt_num(r.rep.mc_estimate) << std::setw(16) << detail::opt_num(r.rep.mc_stderr)
          << sign_verdict(*r.rep.closed_form) << "\n";
    }
    out = s.str();
  }

  void scan() {
    const auto fam = parse_scan_family(scan_family);
    if (!fam) throw Error(ErrorKind::InvalidArgument, "unknown scan family '" + scan_family + "'");
    if (n < 1) throw Error(ErrorKind::InvalidArgument, "--n is required");
    const ScanReport r = conjecture_scan(*fam, n, trials, config.seed, config.threads);
    const std::string summary = std::to_string(r.counterexamples.size()) + " counterexamples";
    const Format f = fmt(Format::Text);
    if (f == Format::Json) {
      json ce = json::array();
      for (const auto& c : r.counterexamples)
        ce.push_back({{"trial", c.trial},
                      {"value", c.value},
                      {"q", std::vector<double>(c.q.data(), c.q.data() + c.q.size())},
                      {"matrix", io::to_json(c.matrix)}});
      out = json{{"family", std::string(to_string(r.family))},
                 {"N", r.n},
                 {"seed", r.seed},
                 {"trials", r.trials},
                 {"max_value", r.max_value},
                 {"boundary_cases", r.boundary_cases},
                 {"unusable", r.unusable},
                 {"counterexamples", ce}}
                .dump(2) +
            "\n";
      return;
    }
    std::ostringstream s;
    if (f == Format::Csv) {
      s << kCsvVersion << " scan trials=" << r.trials << "\n" << kCsvColumns << "\n";
      s << to_string(r.family) << "," << r.n << "," << r.seed << "," << detail::num(r.max_value) << ",,,,"
        << summary << "\n";
    } else {
      s << "scan " << to_string(r.family) << " N=" << r.n << " trials=" << r.trials << " seed=" << r.seed << "\n"
        << "max expectation " << detail::num(r.max_value) << ", boundary cases " << r.boundary_cases
        << ", unusable trials " << r.unusable << "\n"
        << summary << "\n";
    }
    for (const auto& c : r.counterexamples) {
      s << "# counterexample trial=" << c.trial << " value=" << detail::num(c.value) << " q=";
      for (Index k = 0; k < c.q.size(); ++k) s << (k ? "," : "") << c.q(k);
      s << "\n" << io::to_text(c.matrix);
    }
    out = s.str();
  }

  void search() {
    if (n < 2) throw Error(ErrorKind::InvalidArgument, "--n must be >= 2");
    const SearchReport r = search_chm(n, starts, config.seed, config.threads);
    std::size_t converged = 0;
    for (const auto& run : r.runs) converged += run.converged_to_chm;
    const Format f = fmt(Format::Text);
    if (f == Format::Json) {
      json runs = json::array();
      for (const auto& run : r.runs)
        runs.push_back({{"start", run.start},
                        {"final_one_norm", run.final_one_norm},
                        {"converged_to_chm", run.converged_to_chm},
                        {"iterations", run.iterations},
                        {"class", run.class_index ? json(*run.class_index) : json(nullptr)}});
      json classes = json::array();
      for (const auto& c : r.classes) classes.push_back(io::to_json(c));
      out = json{{"N", r.n}, {"seed", r.seed}, {"starts", r.starts}, {"converged", converged}, {"runs", runs},
                 {"classes", classes}}
                .dump(2) +
            "\n";
      return;
    }
    std::ostringstream s;
    if (f == Format::Csv) {
      s << kCsvVersion << " search N=" << r.n << " seed=" << r.seed << "\n"
        << "start,final_one_norm,converged_to_chm,iterations,class\n";
      for (const auto& run : r.runs)
        s << run.start << "," << detail::num(run.final_one_norm) << "," << (run.converged_to_chm ? 1 : 0) << ","
          << run.iterations << "," << (run.class_index ? std::to_string(*run.class_index) : "") << "\n";
    } else {
      s << "search N=" << r.n << " starts=" << r.starts << " seed=" << r.seed << "\n"
        << "target one-norm N*sqrt(N) = " << detail::num(static_cast<double>(r.n) * std::sqrt(static_cast<double>(r.n)))
        << "\n"
        << std::left << std::setw(7) << "start" << std::setw(20) << "final_one_norm" << std::setw(11) << "chm"
        << std::setw(12) << "iterations" << "class\n";
      for (const auto& run : r.runs)
        s << std::left << std::setw(7) << run.start << std::setw(20) << detail::num(run.final_one_norm)
          << std::setw(11) << (run.converged_to_chm ? "yes" : "no") << std::setw(12) << run.iterations
          << (run.class_index ? std::to_string(*run.class_index) : "-") << "\n";
      s << converged << "/" << r.starts << " converged to a complex Hadamard matrix; " << r.classes.size()
        << " inequivalent limit(s)\n";
      for (std::size_t c = 0; c < r.classes.size(); ++c) s << "class " << c << " (dephased)\n" << io::to_text(r.classes[c]);
    }
    out = s.str();
  }

  void defect_cmd() {
    const Matrix h = detail::read_matrix_arg(matrix_path, in_);
    const DefectResult d = defect(h, scaled);
    const Index floor = 2 * h.rows() - 1;
    if (fmt(Format::Text) == Format::Json) {
      out = json{{"N", h.rows()},
                 {"dim_DU", d.dim_DU},
                 {"dim_EU", d.dim_EU},
                 {"equal", d.dim_DU == d.dim_EU},
                 {"generic_floor", floor},
                 {"basis_size", d.basis_DU.size()},
                 {"residual", d.residual}}
                .dump(2) +
            "\n";
      return;
    }
    std::ostringstream s;
    s << "N              " << h.rows() << "\n"
      << "dim_DU         " << d.dim_DU << "\n"
      << "dim_EU         " << d.dim_EU << "\n"
      << "equal          " << (d.dim_DU == d.dim_EU ? "true" : "false") << "\n"
      << "generic_floor  " << floor << " (2N-1 row/column phase directions)\n"
      << "basis_size     " << d.basis_DU.size() << "\n"
      << "residual       " << detail::num(d.residual) << "\n";
    out = s.str();
  }

 private:
  std::istream& in_;
};

inline int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  Lab lab(in);
  CLI::App app{"ahm-lab: almost Hadamard matrix laboratory", "ahm-lab"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string format = "auto";
  std::vector<std::string> tol_overrides;
  app.add_option("--seed", lab.config.seed, "RNG seed (default 0)");
  app.add_option("--threads", lab.config.threads, "worker threads (0 = all cores)");
  app.add_option("--format", format, "json, csv or text")->check(CLI::IsMember({"auto", "json", "csv", "text"}));
  app.add_option("--tol", tol_overrides, "tolerance override name=value (zero, unitary, cluster, crit, neg)");
  app.add_option("--out", lab.config.out_path, "write the result here instead of stdout");

  auto* construct = app.add_subcommand("construct", "build a matrix");
  construct->add_option("family", lab.family,
                        "fourier, fourier_group, kn, pattern, fano, paley11, pg2 or circulant")
      ->required();
  construct->add_option("--n", lab.n, "size");
  construct->add_option("--sizes", lab.sizes, "group factor sizes for fourier_group")->delimiter(',');
  construct->add_option("--design", lab.design, "fano, paley11, pg2_<q> or kn_<N>");
  construct->add_option("--branch", lab.branch, "real-minus, real-plus, complex-eps or complex-eps-conj");
  construct->add_option("--q", lab.q_prime, "prime q for pg2");
  construct->add_option("--phases", lab.phases, "eigenvalues q_k for circulant, comma separated")->delimiter(',');

  auto add_matrix = [&](CLI::App* sub) {
    sub->add_option("matrix,--matrix", lab.matrix_path, "matrix file (JSON or text); stdin when omitted");
    sub->add_option("--rescale", lab.rescale_how, "sqrt-n divides the input by sqrt(N)");
  };
  auto* check = app.add_subcommand("check", "criticality, balance and exclusion report");
  add_matrix(check);
  auto* phi_cmd = app.add_subcommand("phi", "evaluate Phi(U,B)");
  add_matrix(phi_cmd);
  phi_cmd->add_option("--direction", lab.direction, "B: a matrix file, or ones, one-minus-u, self")->required();
  auto* spectrum = app.add_subcommand("spectrum", "spectrum of the Phi form on hermitian matrices");
  add_matrix(spectrum);

  auto* expect = app.add_subcommand("expect", "expected Phi over random directions");
  expect->add_option("--family", lab.family, "kn");
  expect->add_option("--n", lab.range, "size or range, e.g. 3..7");
  expect->add_option("--matrix", lab.matrix_path, "matrix file instead of a family");
  expect->add_option("--rescale", lab.rescale_how, "sqrt-n divides the input by sqrt(N)");
  expect->add_option("--kind", lab.kind, "symmetric, selfadjoint or gaussian");
  expect->add_flag("--exact", lab.exact, "exhaustive enumeration");
  expect->add_flag("--mc", lab.mc, "Monte Carlo");
  expect->add_option("--samples", lab.samples, "Monte Carlo samples");

  auto* scan = app.add_subcommand("scan", "search random circulants for positive expectations");
  scan->add_option("--family", lab.scan_family, "circulant-symmetric or circulant-selfadjoint");
  scan->add_option("--n", lab.n, "size")->required();
  scan->add_option("--trials", lab.trials, "number of trials");

  auto* search = app.add_subcommand("search", "multi-start ascent of the 1-norm");
  search->add_option("--n", lab.n, "size")->required();
  search->add_option("--starts", lab.starts, "number of random starts");

  auto* defect = app.add_subcommand("defect", "defect dimensions of a complex Hadamard matrix");
  defect->add_option("matrix,--matrix", lab.matrix_path, "matrix file; stdin when omitted");
  defect->add_flag("--scaled", lab.scaled, "input is already divided by sqrt(N)");

  std::vector<const char*> argv{"ahm-lab"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "ahm-lab: " << e.what() << "\n";
    return kExitInput;
  }

  try {
    lab.config.format = format == "json" ? Format::Json
                        : format == "csv" ? Format::Csv
                        : format == "text" ? Format::Text
                                           : Format::Auto;
    for (const auto& t : tol_overrides) {
      const auto eq = t.find('=');
      if (eq == std::string::npos) throw Error(ErrorKind::InvalidArgument, "--tol expects name=value, got '" + t + "'");
      double value = 0.0;
      try {
        std::size_t pos = 0;
        value = std::stod(t.substr(eq + 1), &pos);
        if (pos != t.size() - eq - 1) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw Error(ErrorKind::InvalidArgument, "bad tolerance value in '" + t + "'");
      }
      if (!(value >= 0.0)) throw Error(ErrorKind::InvalidArgument, "tolerances must be >= 0");
      if (!lab.config.tol.set(t.substr(0, eq), value))
        throw Error(ErrorKind::InvalidArgument, "unknown tolerance '" + t.substr(0, eq) + "'");
    }

    if (construct->parsed()) lab.construct();
    else if (check->parsed()) lab.check();
    else if (phi_cmd->parsed()) lab.phi_cmd();
    else if (spectrum->parsed()) lab.spectrum();
    else if (expect->parsed()) lab.expect();
    else if (scan->parsed()) lab.scan();
    else if (search->parsed()) lab.search();
    else if (defect->parsed()) lab.defect_cmd();

    if (lab.config.out_path.empty()) {
      out << lab.out;
    } else {
      std::ofstream file(lab.config.out_path);
      if (!file) throw Error(ErrorKind::InvalidArgument, "cannot write '" + lab.config.out_path + "'");
      file << lab.out;
    }
    return kExitOk;
  } catch (const Error& e) {
    err << "ahm-lab: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "ahm-lab: internal error: " << e.what() << "\n";
    return kExitNumerical;
  }
}

}  // namespace ahm::cli
