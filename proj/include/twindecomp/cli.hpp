#ifndef TWINDECOMP_CLI_HPP
#define TWINDECOMP_CLI_HPP

namespace twindecomp::cli {

// Entry point behind the twindecomp binary. Exit codes: 0 success,
// 1 data/config error, 2 usage error.
int run(int argc, const char* const* argv);

}  // namespace twindecomp::cli

#endif  // TWINDECOMP_CLI_HPP
