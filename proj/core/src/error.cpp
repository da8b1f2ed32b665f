#include "plk/error.hpp"

namespace plk {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidShape: return "InvalidShape";
    case ErrorCode::InvalidIndex: return "InvalidIndex";
    case ErrorCode::InvalidPose: return "InvalidPose";
    case ErrorCode::BehindCamera: return "BehindCamera";
    case ErrorCode::InvalidDisparity: return "InvalidDisparity";
    case ErrorCode::InvalidDepth: return "InvalidDepth";
    case ErrorCode::InvalidProbability: return "InvalidProbability";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::EmptyGroundTruth: return "EmptyGroundTruth";
    case ErrorCode::OracleFailure: return "OracleFailure";
    case ErrorCode::DivergedFit: return "DivergedFit";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

namespace {

std::string format_message(ErrorCode code, const std::string& message,
                           std::optional<std::size_t> index) {
  std::string out(to_string(code));
  out += ": ";
  out += message;
  if (index) {
    out += " (index ";
    out += std::to_string(*index);
    out += ")";
  }
  return out;
}

}  // namespace

Error::Error(ErrorCode code, const std::string& message,
             std::optional<std::size_t> index)
    : std::runtime_error(format_message(code, message, index)),
      code_(code),
      index_(index) {}

}  // namespace plk
