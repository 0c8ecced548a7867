#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace tomo {

/// Process exit codes of the command-line tool.
enum ExitCode : int {
    exit_ok = 0,
    exit_check_failed = 1,   ///< compare --assert-ordering did not hold
    exit_bad_flags = 2,
    exit_io = 3,
    exit_config = 4,
    exit_runtime = 5,
    exit_missing_checkpoint = 6,
};

class MissingCheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Subcommands: simulate, pretrain, train, reconstruct, evaluate, compare, export.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, const char* const* argv);

}  // namespace tomo
