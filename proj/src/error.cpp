#include "auxgmm/error.hpp"

namespace auxgmm {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::MalformedRow: return "MalformedRow";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::InvalidDataset: return "InvalidDataset";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::MissingOutcome: return "MissingOutcome";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::SpecError: return "SpecError";
    case ErrorKind::UnsupportedSpec: return "UnsupportedSpec";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::SingularDesign: return "SingularDesign";
    case ErrorKind::RankDeficient: return "RankDeficient";
    case ErrorKind::FitDiverged: return "FitDiverged";
    case ErrorKind::SingularInformation: return "SingularInformation";
    case ErrorKind::SingularBread: return "SingularBread";
    case ErrorKind::NoConvergence: return "NoConvergence";
  }
  return "Unknown";
}

ErrorCategory category_of(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::MalformedRow:
    case ErrorKind::ParseError:
    case ErrorKind::InvalidDataset:
    case ErrorKind::IoError:
    case ErrorKind::MissingOutcome:
      return ErrorCategory::Data;
    case ErrorKind::ConfigError:
    case ErrorKind::DomainError:
    case ErrorKind::ShapeMismatch:
    case ErrorKind::SpecError:
    case ErrorKind::UnsupportedSpec:
      return ErrorCategory::Usage;
    default:
      return ErrorCategory::Numerical;
  }
}

}  // namespace auxgmm
