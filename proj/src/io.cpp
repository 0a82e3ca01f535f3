// SPDX-License-Identifier: Apache-2.0
#include "todgen/io.hpp"

#include <fstream>
#include <sstream>

#include "todgen/errors.hpp"

namespace todgen {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    raise(ErrorCode::IoError, "cannot open " + path.string());
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) {
    raise(ErrorCode::IoError, "read failed for " + path.string());
  }
  return buffer.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    raise(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  }
  out << content;
  out.flush();
  if (!out) {
    raise(ErrorCode::IoError, "write failed for " + path.string());
  }
}

nlohmann::json read_json(const std::filesystem::path& path) {
  return parse_json(read_file(path), path.string());
}

nlohmann::json parse_json(const std::string& text, const std::string& origin) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    raise(ErrorCode::ParseError, origin + ": " + e.what());
  }
}

void for_each_line(const std::string& content,
                   const std::function<void(std::size_t, const std::string&)>& fn) {
  std::size_t line_number = 0;
  std::size_t pos = 0;
  while (pos <= content.size()) {
    std::size_t nl = content.find('\n', pos);
    std::string line = nl == std::string::npos ? content.substr(pos)
                                               : content.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ++line_number;
    if (!line.empty()) fn(line_number, line);
    if (nl == std::string::npos) break;
    pos = nl + 1;
  }
}

}  // namespace todgen
