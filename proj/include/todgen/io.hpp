// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <functional>
#include <string>

#include "json.hpp"

namespace todgen {

std::string read_file(const std::filesystem::path& path);

void write_file(const std::filesystem::path& path, const std::string& content);

/// Parses a whole file as JSON, mapping parse failures to ParseError with
/// the file name and position.
nlohmann::json read_json(const std::filesystem::path& path);

nlohmann::json parse_json(const std::string& text, const std::string& origin);

/// Calls `fn(line_number, line)` for each non-empty line; line numbers are
/// 1-based. Handles trailing newlines and CRLF endings.
void for_each_line(const std::string& content,
                   const std::function<void(std::size_t, const std::string&)>& fn);

}  // namespace todgen
