#pragma once

#include <string>
#include <vector>

namespace editlab {

std::string trim(const std::string& s);

// Trim plus collapse every internal whitespace run to a single space.
std::string normalize_ws(const std::string& s);

std::string lower(const std::string& s);

std::vector<std::string> split_ws(const std::string& s);

// Split on '\n' (a trailing newline does not produce an empty final element).
std::vector<std::string> split_lines(const std::string& s);

std::string join(const std::vector<std::string>& parts, const std::string& sep);

bool starts_with(const std::string& s, const std::string& prefix);
bool ends_with(const std::string& s, const std::string& suffix);

// Read/write whole files; write_file_atomic goes through a temp file + rename.
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace editlab
