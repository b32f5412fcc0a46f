#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace minekg::io {

using nlohmann::json;

std::string read_file(const std::filesystem::path& path);

/// Writes atomically enough for our purposes: parent directories are created
/// and the file is replaced in full.
void write_file(const std::filesystem::path& path, std::string_view content);
void append_file(const std::filesystem::path& path, std::string_view content);

/// One JSON object per line; blank lines are skipped. A line that does not
/// parse raises Errc::MalformedFile naming the file and line number.
std::vector<json> read_jsonl(const std::filesystem::path& path);
std::vector<json> parse_jsonl(std::string_view content, std::string_view origin);
std::string to_jsonl(const std::vector<json>& rows);
/// Compact dump; invalid UTF-8 is replaced instead of throwing.
std::string dump(const json& value);

std::string sha256_hex(std::string_view data);

/// Fixed "%.*f" rendering used for CSV and text reports.
std::string format_fixed(double value, int precision);

/// RFC 4180 quoting when the field needs it.
std::string csv_field(std::string_view field);

/// Replaces every byte outside [A-Za-z0-9._-] so the result is a safe file name.
std::string safe_file_name(std::string_view name);

}  // namespace minekg::io
