#pragma once

#include "subkam/config.hpp"

namespace subkam {

enum ExitStatus : int { kExitOk = 0, kExitError = 1, kExitFlagged = 2 };

/// Executes c.task and writes manifest.json, config.effective and the task's
/// CSV files into c.out_dir. Never throws: errors become kExitError with the
/// error recorded in the manifest (when the directory is writable) and on stderr.
int run(const RunConfig& c);

}  // namespace subkam
