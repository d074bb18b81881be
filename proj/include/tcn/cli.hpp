#pragma once

#include <string>
#include <vector>

namespace tcn {

// Entry point behind the tcnlab binary; exposed so tests can drive the CLI
// in-process. Exit codes: 0 success, 2 usage, 3 missing input, 4 numerical
// abort.
int cli_main(const std::vector<std::string>& args);

}  // namespace tcn
