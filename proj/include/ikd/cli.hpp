#pragma once

#include <iosfwd>
#include <string>

#include "ikd/config.hpp"

namespace ikd {

/// Executes one subcommand against the config, writing every artifact into
/// cfg.out_dir (created on demand). Wall-clock time lands in timing.json;
/// all other outputs depend only on the config, so a rerun reproduces them
/// byte for byte.
///
/// Commands: generate-data, train, predict-eval, track, incremental-run,
/// theory-validate. Returns the process exit code: 0 success, 1 error
/// (message on `err`), 2 a theory-validate verdict outside its acceptance
/// band. Progress lines go to `out`.
int run_command(const std::string& command, const RunConfig& cfg, ExecMode mode,
                std::ostream& out, std::ostream& err);

}  // namespace ikd
