#pragma once

// Minimal comma-separated reader helpers shared by the dataset and quote files.

#include <string>
#include <string_view>
#include <vector>

namespace annp {

double parse_field(std::string_view text, std::string_view column, std::size_t line);

std::vector<std::size_t> map_header(std::string_view header, const std::vector<std::string>& required,
                                    const std::vector<std::string>& optional, std::vector<long>& optional_pos);

std::vector<std::string_view> split_csv_line(std::string_view line);

}  // namespace annp
