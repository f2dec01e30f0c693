#ifndef AUXGMM_ERROR_HPP
#define AUXGMM_ERROR_HPP

#include <stdexcept>
#include <string>

namespace auxgmm {

enum class ErrorKind {
  // input data
  MalformedRow,
  ParseError,
  InvalidDataset,
  IoError,
  MissingOutcome,
  // configuration / usage
  ConfigError,
  DomainError,
  ShapeMismatch,
  SpecError,
  UnsupportedSpec,
  // numerics
  InsufficientData,
  SingularDesign,
  RankDeficient,
  FitDiverged,
  SingularInformation,
  SingularBread,
  NoConvergence,
};

/// Broad category used by the CLI to choose an exit code.
enum class ErrorCategory { Usage, Data, Numerical };

const char* to_string(ErrorKind kind) noexcept;
ErrorCategory category_of(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  ErrorCategory category() const noexcept { return category_of(kind_); }

 private:
  ErrorKind kind_;
};

}  // namespace auxgmm

#endif  // AUXGMM_ERROR_HPP
