// SPDX-License-Identifier: Apache-2.0
//
// Flat `key = value` text used by config files.

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace drnet {

/// Ordered (key, value) pairs. Blank lines and '#' comments are skipped;
/// a line without '=' throws FormatError.
std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text);

int64_t parse_int(const std::string& key, const std::string& value);
double parse_double(const std::string& key, const std::string& value);
bool parse_bool(const std::string& key, const std::string& value);
/// Comma-separated integers; `expected` of 0 accepts any count.
std::vector<int64_t> parse_int_list(const std::string& key, const std::string& value, size_t expected = 0);
std::vector<std::string> split(std::string_view text, char sep);

uint64_t fnv1a64(std::string_view bytes, uint64_t seed = 14695981039346656037ull);

}  // namespace drnet
