#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "rorokit/layout.hpp"

namespace rorokit::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitIo = 2;

/// Runs one command line (args excludes the program name). Machine-readable
/// output goes to `out`, tables and diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Deterministic SVG 1.1 drawing of a document: one rect per segment and one
/// arrow per isdr pair.
std::string render_svg(const Document& doc);

}  // namespace rorokit::cli
