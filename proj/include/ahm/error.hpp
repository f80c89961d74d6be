#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ahm {

enum class ErrorKind {
  ZeroEntry,
  AmbiguousClustering,
  NotSquare,
  NonFinite,
  NotSkew,
  NotHermitian,
  NotUnitary,
  NotHadamard,
  NotUnimodular,
  NotPrime,
  BranchUnavailable,
  ComplexBranch,
  WrongBranch,
  NotSymmetricPattern,
  NotCritical,
  NotCirculant,
  NotReal,
  NotSelfAdjoint,
  NotSymmetric,
  InvalidArgument,
  Parse,
  Numerical,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ZeroEntry: return "ZeroEntry";
    case ErrorKind::AmbiguousClustering: return "AmbiguousClustering";
    case ErrorKind::NotSquare: return "NotSquare";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::NotSkew: return "NotSkew";
    case ErrorKind::NotHermitian: return "NotHermitian";
    case ErrorKind::NotUnitary: return "NotUnitary";
    case ErrorKind::NotHadamard: return "NotHadamard";
    case ErrorKind::NotUnimodular: return "NotUnimodular";
    case ErrorKind::NotPrime: return "NotPrime";
    case ErrorKind::BranchUnavailable: return "BranchUnavailable";
    case ErrorKind::ComplexBranch: return "ComplexBranch";
    case ErrorKind::WrongBranch: return "WrongBranch";
    case ErrorKind::NotSymmetricPattern: return "NotSymmetricPattern";
    case ErrorKind::NotCritical: return "NotCritical";
    case ErrorKind::NotCirculant: return "NotCirculant";
    case ErrorKind::NotReal: return "NotReal";
    case ErrorKind::NotSelfAdjoint: return "NotSelfAdjoint";
    case ErrorKind::NotSymmetric: return "NotSymmetric";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Parse: return "Parse";
    case ErrorKind::Numerical: return "Numerical";
  }
  return "Unknown";
}

/// Every precondition failure in the library is reported through this type;
/// `kind()` identifies the violated contract.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised when an entry is (numerically) zero, i.e. the matrix lies outside
/// U(N)* and the 1-norm is not differentiable there.
class ZeroEntryError : public Error {
 public:
  ZeroEntryError(long row, long col)
      : Error(ErrorKind::ZeroEntry,
              "entry (" + std::to_string(row) + "," + std::to_string(col) + ") is zero"),
        row_(row),
        col_(col) {}

  long row() const noexcept { return row_; }
  long col() const noexcept { return col_; }

 private:
  long row_;
  long col_;
};

}  // namespace ahm
