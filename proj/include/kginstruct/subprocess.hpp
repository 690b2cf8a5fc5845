#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace kgi {

struct ProcessResult {
    int exit_code = -1;
    bool timed_out = false;
    std::string out;
    std::string err;
};

// Runs argv[0] with the given arguments, feeding `stdin_data` on standard
// input and capturing both output streams. On timeout the child is killed
// with SIGKILL and `timed_out` is set. `cwd`, when non-empty, is the child's
// working directory. exec failures surface as exit code 127 with a message
// on the captured stderr.
ProcessResult run_process(const std::vector<std::string>& argv,
                          std::string_view stdin_data,
                          int timeout_ms,
                          const std::filesystem::path& cwd = {});

}  // namespace kgi
