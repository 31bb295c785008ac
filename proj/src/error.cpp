#include "probekit/error.hpp"

namespace probekit {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::FileNotFound: return "FileNotFound";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::InvalidTemplate: return "InvalidTemplate";
    case ErrorKind::ProviderError: return "ProviderError";
    case ErrorKind::CacheMiss: return "CacheMiss";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::DuplicateKey: return "DuplicateKey";
    case ErrorKind::TooFewRows: return "TooFewRows";
    case ErrorKind::SingleClass: return "SingleClass";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::MissingEmbedding: return "MissingEmbedding";
    case ErrorKind::ModeMismatch: return "ModeMismatch";
    case ErrorKind::EmptyGrid: return "EmptyGrid";
    case ErrorKind::EmptyTable: return "EmptyTable";
    case ErrorKind::MissingAxis: return "MissingAxis";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message, std::size_t line)
    : std::runtime_error(message), kind_(kind), line_(line) {}

Error Error::with_stage(std::string stage) const {
  Error e = *this;
  e.stage_ = std::move(stage);
  return e;
}

bool is_environment_failure(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::FileNotFound:
    case ErrorKind::ProviderError:
    case ErrorKind::CacheMiss:
    case ErrorKind::IoError:
      return true;
    default:
      return false;
  }
}

}  // namespace probekit
