#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace plk {

enum class ErrorCode {
  InvalidShape,
  InvalidIndex,
  InvalidPose,
  BehindCamera,
  InvalidDisparity,
  InvalidDepth,
  InvalidProbability,
  InvalidConfig,
  EmptyGroundTruth,
  OracleFailure,
  DivergedFit,
  ParseError,
  IoError,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library. `index()` carries the offending
// element / iteration when the error is tied to one.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<std::size_t> index = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  std::optional<std::size_t> index() const noexcept { return index_; }

 private:
  ErrorCode code_;
  std::optional<std::size_t> index_;
};

}  // namespace plk
