#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sprmip {

// Parses hidden-layer notation "LxN-LxN-..." where each term stands for L
// consecutive layers of N neurons: "2x20-3x10" -> {20,20,10,10,10}.
// Throws MalformedInput on empty terms, zero counts, or stray characters.
std::vector<int> parse_arch(std::string_view text);

// Run-length normal form: adjacent equal widths merge into one term.
std::string format_arch(std::span<const int> widths);

}  // namespace sprmip
