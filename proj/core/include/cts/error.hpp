#pragma once

#include <stdexcept>
#include <string>

namespace cts {

/// Broad failure classes. The CLI maps these onto process exit codes.
enum class ErrorKind {
  argument,    // bad call arguments or configuration
  parse,       // malformed input text
  schema,      // well-formed input that violates the data model
  format,      // bad binary file (magic, version, truncation)
  integrity,   // inconsistent data across artifacts (dims, ids)
  transport,   // embedding service unreachable or misbehaving
  numeric,     // non-finite values during training or checking
  degenerate,  // input admits no valid result (e.g. no negatives)
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define CTS_DEFINE_ERROR(Name, Kind)                                 \
  class Name : public Error {                                        \
   public:                                                           \
    explicit Name(const std::string& what) : Error(Kind, what) {}    \
  }

CTS_DEFINE_ERROR(ArgumentError, ErrorKind::argument);
CTS_DEFINE_ERROR(SchemaError, ErrorKind::schema);
CTS_DEFINE_ERROR(FormatError, ErrorKind::format);
CTS_DEFINE_ERROR(IntegrityError, ErrorKind::integrity);
CTS_DEFINE_ERROR(DegenerateInputError, ErrorKind::degenerate);

#undef CTS_DEFINE_ERROR

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(ErrorKind::parse, "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class TransportError : public Error {
 public:
  static constexpr std::size_t no_batch = static_cast<std::size_t>(-1);

  explicit TransportError(const std::string& what, std::size_t batch = no_batch)
      : Error(ErrorKind::transport, what), batch_(batch) {}

  /// Index of the failed request batch, or `no_batch` if not batch-scoped.
  std::size_t batch_index() const noexcept { return batch_; }

 private:
  std::size_t batch_;
};

class NumericError : public Error {
 public:
  NumericError(const std::string& what, long long step = -1)
      : Error(ErrorKind::numeric, what), step_(step) {}

  /// Training step (or epoch) at which the failure surfaced; -1 if n/a.
  long long step() const noexcept { return step_; }

 private:
  long long step_;
};

}  // namespace cts
