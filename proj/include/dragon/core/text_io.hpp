// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace dragon {

/// Shortest decimal representation that parses back to the identical double.
std::string format_double(double value);

/// Parses a full token as a double; throws IoError on malformed input.
double parse_double(std::string_view token);
long long parse_int(std::string_view token);

/// Whitespace tokenization of one line.
std::vector<std::string_view> split_ws(std::string_view line);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

} // namespace dragon
