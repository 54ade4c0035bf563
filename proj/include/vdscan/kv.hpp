#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace vdscan::kv {

using Entries = std::vector<std::pair<std::string, std::string>>;

/// Parses `key = value` lines. Blank lines and lines starting with '#' are
/// ignored; keys and values are whitespace-trimmed. Throws InvalidConfig on a
/// line without '='.
Entries parse(std::string_view text, std::string_view source = "<memory>");

Entries read_file(const std::filesystem::path& path);

std::string trim(std::string_view s);

std::vector<std::string> split(std::string_view s, char delimiter);

}  // namespace vdscan::kv
