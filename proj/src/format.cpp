#include "dqsim/format.hpp"

#include <charconv>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace dqsim {

std::string format_exact(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

std::string format_9g(double value) {
  char buf[64];
  const int n = std::snprintf(buf, sizeof buf, "%.9g", value);
  return std::string(buf, static_cast<std::size_t>(n));
}

namespace {

template <typename T>
T parse_number(std::string_view text, const char* kind) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  T value{};
  const auto* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, value);
  if (text.empty() || res.ec != std::errc{} || res.ptr != end) {
    throw std::invalid_argument("not a valid " + std::string(kind) + ": '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace

double parse_double(std::string_view text) { return parse_number<double>(text, "number"); }
long long parse_int(std::string_view text) { return parse_number<long long>(text, "integer"); }
unsigned long long parse_uint(std::string_view text) {
  return parse_number<unsigned long long>(text, "unsigned integer");
}

std::string_view trim(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(" \t\r\n");
  return text.substr(first, last - first + 1);
}

}  // namespace dqsim
