#ifndef AUXGMM_CLI_HPP
#define AUXGMM_CLI_HPP

#include <iosfwd>

namespace auxgmm {

/// Exit codes: 0 success, 1 usage, 2 data, 3 numerical. Failures print a JSON
/// object {"error": {...}} on `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace auxgmm

#endif  // AUXGMM_CLI_HPP
