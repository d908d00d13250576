#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace retrobleu {

enum class ErrorCode {
  MalformedJson,
  AlternationViolation,
  EmptyRoute,
  MissingField,
  InvalidField,
  MissingToken,
  InvalidToken,
  MixedRadius,
  ArityMismatch,
  KindMismatch,
  Io,
  BadMagic,
  VersionMismatch,
  CorruptRecord,
  ProbOutOfRange,
  EmptyInput,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries one of the codes above so
// callers (the CLI in particular) can map them to exit statuses.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }
  /// The message without the leading code name.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

}  // namespace retrobleu
