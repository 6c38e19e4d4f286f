#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

namespace dafny_pilot {

struct ProcessResult {
    std::string output;  // stdout and stderr interleaved
    int exit_code = -1;
    bool timed_out = false;
    double duration_s = 0.0;
};

/// Runs argv[0] (resolved through PATH when it has no '/') in its own process
/// group. On timeout the whole group receives SIGKILL and is reaped.
ProcessResult run_process(const std::vector<std::string>& argv, std::chrono::milliseconds timeout,
                          const std::filesystem::path& cwd = {});

/// PATH lookup; empty when not found or not executable.
std::filesystem::path find_executable(const std::string& name);

/// A fresh directory under the system temp dir, removed with its contents
/// when the object is destroyed.
class TempDir {
public:
    explicit TempDir(const std::string& prefix = "dafny-pilot");
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace dafny_pilot
