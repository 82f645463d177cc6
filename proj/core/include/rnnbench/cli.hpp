#pragma once

#include <string>
#include <vector>

namespace rnnbench {

// Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
// divergence.
int cli_main(const std::vector<std::string>& args);
int cli_main(int argc, char** argv);

}  // namespace rnnbench
