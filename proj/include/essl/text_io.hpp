#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace essl {

// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

// Strict parse of a whole field as a finite double; throws ValidationError.
double parse_double(std::string_view text);
long long parse_int(std::string_view text);

std::string_view trim(std::string_view s);
std::vector<std::string_view> split(std::string_view s, char sep);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

// Flat `key = value` text. Blank lines and lines starting with '#' are
// ignored; duplicate keys are a ParseError.
using KeyValueMap = std::map<std::string, std::string, std::less<>>;

KeyValueMap parse_key_values(std::string_view text);
std::string format_key_values(const std::vector<std::pair<std::string, std::string>>& entries);

}  // namespace essl
