#include "evidencedesk/text_util.hpp"

#include "evidencedesk/error.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>

namespace evidencedesk {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kDimensionMismatch: return "dimension_mismatch";
    case ErrorCode::kZeroVector: return "zero_vector";
    case ErrorCode::kUnnormalized: return "unnormalized_vector";
    case ErrorCode::kDuplicateKey: return "duplicate_key";
    case ErrorCode::kNotFound: return "not_found";
    case ErrorCode::kIo: return "io_error";
    case ErrorCode::kParse: return "parse_error";
    case ErrorCode::kSchema: return "schema_violation";
    case ErrorCode::kVersionMismatch: return "version_mismatch";
    case ErrorCode::kCorruptFile: return "corrupt_file";
    case ErrorCode::kSingular: return "singular_system";
    case ErrorCode::kTransport: return "transport_failure";
    case ErrorCode::kTimeout: return "timeout_exhausted";
    case ErrorCode::kRateLimited: return "rate_limited";
    case ErrorCode::kMalformedResponse: return "malformed_response";
    case ErrorCode::kUnmatchedRequest: return "unmatched_request";
    case ErrorCode::kFormatUnrepairable: return "format_unrepairable";
    case ErrorCode::kStageFailed: return "stage_failed";
  }
  return "unknown";
}

namespace util {

std::uint64_t fnv1a64(std::string_view data, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(value));
  return buf;
}

std::string digest(std::string_view data) { return hex64(fnv1a64(data)); }

std::string_view trim(std::string_view s) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(s[i])) !=
        std::tolower(static_cast<unsigned char>(prefix[i]))) {
      return false;
    }
  }
  return true;
}

bool contains_ci(std::string_view haystack, std::string_view needle) {
  return to_lower(haystack).find(to_lower(needle)) != std::string::npos;
}

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.emplace_back(line);
    pos = nl + 1;
  }
  return lines;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace util
}  // namespace evidencedesk
