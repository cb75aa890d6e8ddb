#include "sprmip/arch.hpp"

#include <charconv>

#include "sprmip/error.hpp"

namespace sprmip {

namespace {

int parse_positive(std::string_view s, std::string_view whole) {
  int value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || value <= 0) {
    throw MalformedInput("invalid architecture string '" + std::string(whole) +
                         "': '" + std::string(s) + "' is not a positive integer");
  }
  return value;
}

}  // namespace

std::vector<int> parse_arch(std::string_view text) {
  if (text.empty()) throw MalformedInput("empty architecture string");
  std::vector<int> widths;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t dash = text.find('-', start);
    const std::string_view term =
        text.substr(start, dash == std::string_view::npos ? std::string_view::npos
                                                          : dash - start);
    const std::size_t x = term.find('x');
    if (x == std::string_view::npos) {
      throw MalformedInput("invalid architecture string '" + std::string(text) +
                           "': term '" + std::string(term) + "' lacks 'x'");
    }
    const int count = parse_positive(term.substr(0, x), text);
    const int width = parse_positive(term.substr(x + 1), text);
    widths.insert(widths.end(), static_cast<std::size_t>(count), width);
    if (dash == std::string_view::npos) break;
    start = dash + 1;
  }
  return widths;
}

std::string format_arch(std::span<const int> widths) {
  std::string out;
  for (std::size_t i = 0; i < widths.size();) {
    std::size_t j = i;
    while (j < widths.size() && widths[j] == widths[i]) ++j;
    if (!out.empty()) out += '-';
    out += std::to_string(j - i) + "x" + std::to_string(widths[i]);
    i = j;
  }
  return out;
}

}  // namespace sprmip
