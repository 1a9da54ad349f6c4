#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dmh::cli {

/// Entry point shared by the `dmh` binary and the tests. Returns the process
/// exit code: 0 success, 1 validation, 2 I/O, 3 divergence.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int main(int argc, char** argv);

}  // namespace dmh::cli
