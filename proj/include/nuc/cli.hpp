#pragma once

#include <string>
#include <vector>

namespace nuc {

// Runs one CLI subcommand (generate | calibrate | train | denoise | eval |
// localize). Returns the process exit code; errors print one line on stderr
// as "error: <category>: <message>".
int cli_run(const std::vector<std::string>& args);

}  // namespace nuc
