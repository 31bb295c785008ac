#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace probekit {

enum class ErrorKind {
  FileNotFound,
  ParseError,
  EmptyDataset,
  InvalidTemplate,
  ProviderError,
  CacheMiss,
  DimensionMismatch,
  DuplicateKey,
  TooFewRows,
  SingleClass,
  NonFinite,
  LengthMismatch,
  MissingEmbedding,
  ModeMismatch,
  EmptyGrid,
  EmptyTable,
  MissingAxis,
  InvalidArgument,
  IoError,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library. `stage` is filled in by the pipeline
/// when an error crosses a stage boundary (embed, fit_reducer, ...).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, std::size_t line = 0);

  ErrorKind kind() const noexcept { return kind_; }
  /// 1-based line number for ParseError, 0 otherwise.
  std::size_t line() const noexcept { return line_; }
  const std::string& stage() const noexcept { return stage_; }

  /// Returns a copy tagged with the failing pipeline stage.
  Error with_stage(std::string stage) const;

 private:
  ErrorKind kind_;
  std::size_t line_;
  std::string stage_;
};

/// True for failures caused by the environment (network, files on disk)
/// rather than by how the tool was invoked.
bool is_environment_failure(ErrorKind kind) noexcept;

}  // namespace probekit
