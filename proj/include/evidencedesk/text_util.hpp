#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace evidencedesk::util {

/// 64-bit FNV-1a. Used for chunk ids, trace ids and digests; not cryptographic.
std::uint64_t fnv1a64(std::string_view data,
                      std::uint64_t basis = 0xcbf29ce484222325ULL);

std::string hex64(std::uint64_t value);

/// hex64(fnv1a64(data)).
std::string digest(std::string_view data);

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);
bool starts_with_ci(std::string_view s, std::string_view prefix);
bool contains_ci(std::string_view haystack, std::string_view needle);

std::vector<std::string> split_lines(std::string_view text);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace evidencedesk::util
