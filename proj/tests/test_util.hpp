#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>

namespace testutil {

/// Unique-enough scratch path under the system temp dir; callers pick
/// distinct names per test case.
inline std::string tmp_file(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("odm_test_" + name)).string();
}

/// Deletes the held path (and a possible sibling) on scope exit.
struct FileGuard {
    std::string path;

    explicit FileGuard(std::string p) : path(std::move(p)) {}
    ~FileGuard() {
        std::error_code ec;
        std::filesystem::remove(path, ec);
    }
    FileGuard(const FileGuard&) = delete;
    FileGuard& operator=(const FileGuard&) = delete;
};

inline std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace testutil
