/**
 * @file cli.hpp
 * @brief Subcommand dispatch for the `kirchhoff` tool.
 *
 *   validate | ground | nodal | continuation | doubling | limit | oracle | suite
 *
 * Each takes a config path. Results go to files in the output directory
 * (--out, else $KIRCHHOFF_OUTPUT_DIR, else the config's output_dir);
 * diagnostics go to stderr. Exit status: 0 success, 1 solver failure or
 * failed suite check, 2 configuration error.
 */
#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace kirchhoff {

inline constexpr const char* kOutputDirEnv = "KIRCHHOFF_OUTPUT_DIR";

/// `args` excludes the program name. `out` receives the hypothesis table of
/// `validate`; `err` all diagnostics.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace kirchhoff
