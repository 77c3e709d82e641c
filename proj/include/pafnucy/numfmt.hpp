#pragma once

#include <string>
#include <string_view>

namespace pafnucy {

// Shortest decimal representation that parses back to the same double
// (std::to_chars). Used for every text output so files are byte-stable.
std::string format_double(double value);

// Strict double parse; the whole token must be consumed.
bool parse_double(std::string_view token, double& out);

bool parse_int(std::string_view token, long& out);

}  // namespace pafnucy
