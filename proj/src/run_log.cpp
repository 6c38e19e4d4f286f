#include "dafny_pilot/run_log.hpp"

#include "dafny_pilot/error.hpp"

namespace dafny_pilot {

RunLog::RunLog(const std::filesystem::path& jsonl_file) {
    if (jsonl_file.has_parent_path()) std::filesystem::create_directories(jsonl_file.parent_path());
    sink_.open(jsonl_file, std::ios::out | std::ios::trunc);
    if (!sink_) throw Error(ErrorCode::Io, "cannot open run log " + jsonl_file.string());
}

uint64_t RunLog::append(int round, std::string_view action, std::string_view hash, nlohmann::json data) {
    std::lock_guard lock(mu_);
    nlohmann::json rec = data.is_object() ? std::move(data) : nlohmann::json::object();
    const uint64_t seq = records_.size() + 1;
    rec["seq"] = seq;
    rec["round"] = round;
    rec["action"] = action;
    rec["hash"] = hash;
    if (sink_.is_open()) {
        sink_ << rec.dump() << '\n';
        sink_.flush();
    }
    records_.push_back(std::move(rec));
    return seq;
}

std::vector<nlohmann::json> RunLog::since(uint64_t n) const {
    std::lock_guard lock(mu_);
    if (n >= records_.size()) return {};
    return {records_.begin() + static_cast<std::ptrdiff_t>(n), records_.end()};
}

size_t RunLog::count(std::string_view action) const {
    std::lock_guard lock(mu_);
    size_t c = 0;
    for (const auto& r : records_) {
        if (r.at("action") == action) ++c;
    }
    return c;
}

uint64_t RunLog::last_seq() const {
    std::lock_guard lock(mu_);
    return records_.size();
}

}  // namespace dafny_pilot
