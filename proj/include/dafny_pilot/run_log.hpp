#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace dafny_pilot {

/// Append-only audit trail of one run or session. Each record is a JSON
/// object {seq, round, action, hash, ...} with strictly increasing seq
/// starting at 1. Records can also be streamed to a JSON-lines file.
class RunLog {
public:
    RunLog() = default;
    explicit RunLog(const std::filesystem::path& jsonl_file);

    /// Fields of `data` are merged into the record; seq/round/action/hash win.
    uint64_t append(int round, std::string_view action, std::string_view hash,
                    nlohmann::json data = nlohmann::json::object());

    /// Records with seq > n, in order.
    std::vector<nlohmann::json> since(uint64_t n) const;
    std::vector<nlohmann::json> all() const { return since(0); }
    size_t count(std::string_view action) const;
    uint64_t last_seq() const;

private:
    mutable std::mutex mu_;
    std::vector<nlohmann::json> records_;
    std::ofstream sink_;
};

}  // namespace dafny_pilot
