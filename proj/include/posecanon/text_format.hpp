#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace posecanon::text {

/// Shortest decimal string that parses back to exactly `v`.
std::string formatDouble(double v);

/// Strict parse of a full token. Returns false on any trailing characters.
bool parseDouble(std::string_view token, double& out);

std::vector<std::string_view> splitWhitespace(std::string_view line);
std::vector<std::string_view> split(std::string_view line, char sep);

std::string trim(std::string_view s);

/// 64-bit FNV-1a, used for content and config fingerprints.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

std::string toHex(std::uint64_t v);

} // namespace posecanon::text
