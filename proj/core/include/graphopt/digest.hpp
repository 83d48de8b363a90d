#pragma once

#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace graphopt {

/// Hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

/// Content digest used to name artifacts: first 16 hex chars of the SHA-256
/// of the compact JSON dump (object keys are sorted by nlohmann::json).
std::string content_digest(const nlohmann::json& value);

}  // namespace graphopt
