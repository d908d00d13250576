#include "retrobleu/error.hpp"

namespace retrobleu {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedJson: return "MalformedJson";
    case ErrorCode::AlternationViolation: return "AlternationViolation";
    case ErrorCode::EmptyRoute: return "EmptyRoute";
    case ErrorCode::MissingField: return "MissingField";
    case ErrorCode::InvalidField: return "InvalidField";
    case ErrorCode::MissingToken: return "MissingToken";
    case ErrorCode::InvalidToken: return "InvalidToken";
    case ErrorCode::MixedRadius: return "MixedRadius";
    case ErrorCode::ArityMismatch: return "ArityMismatch";
    case ErrorCode::KindMismatch: return "KindMismatch";
    case ErrorCode::Io: return "Io";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::CorruptRecord: return "CorruptRecord";
    case ErrorCode::ProbOutOfRange: return "ProbOutOfRange";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), message_(message) {}

}  // namespace retrobleu
