#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace urbanvis::io {

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

// Plain comma splitting; fields in these formats never contain commas or quotes.
std::vector<std::string> split_csv_line(std::string_view line);

// Lines without trailing '\r'. A final line lacking '\n' is still returned.
std::vector<std::string> lines(std::string_view text);

// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double v);

double parse_double(std::string_view field);
long long parse_int(std::string_view field);

}  // namespace urbanvis::io
