#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace probe::csv {

// Quotes only when the field contains a comma, quote or line break.
std::string field(std::string_view s);
std::string join(const std::vector<std::string>& fields);
std::vector<std::string> split(std::string_view line);

// Locale-independent fixed-point text, e.g. fixed(0.96819, 4) == "0.9682".
std::string fixed(double v, int digits);
// Shortest text that parses back to the same double.
std::string exact(double v);
double parse_double(std::string_view s);

}  // namespace probe::csv
