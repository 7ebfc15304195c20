#pragma once

#include <string>
#include <string_view>

namespace dqsim {

// Shortest text that parses back to exactly `value`.
std::string format_exact(double value);

// printf %.9g; the fixed-width time format of the log files.
std::string format_9g(double value);

// Strict full-string parses; throw std::invalid_argument on trailing junk.
double parse_double(std::string_view text);
long long parse_int(std::string_view text);
unsigned long long parse_uint(std::string_view text);

std::string_view trim(std::string_view text);

}  // namespace dqsim
