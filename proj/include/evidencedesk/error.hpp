#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace evidencedesk {

enum class ErrorCode {
  kInvalidArgument,
  kDimensionMismatch,
  kZeroVector,
  kUnnormalized,
  kDuplicateKey,
  kNotFound,
  kIo,
  kParse,
  kSchema,
  kVersionMismatch,
  kCorruptFile,
  kSingular,
  kTransport,
  kTimeout,
  kRateLimited,
  kMalformedResponse,
  kUnmatchedRequest,
  kFormatUnrepairable,
  kStageFailed,
};

/// Stable machine-readable name, used in HTTP error bodies and CLI output.
std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace evidencedesk
