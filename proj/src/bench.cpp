#include "dafny_pilot/bench.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <set>
#include <thread>

#include "dafny_pilot/error.hpp"
#include "dafny_pilot/util.hpp"

namespace dafny_pilot {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::optional<OutcomeKind> outcome_from_string(std::string_view s) {
    for (OutcomeKind k : {OutcomeKind::Success, OutcomeKind::Partial, OutcomeKind::Failure}) {
        if (to_string(k) == s) return k;
    }
    return std::nullopt;
}

template <typename T>
T field(const json& j, const char* name, const std::string& where) {
    if (!j.contains(name)) throw Error(ErrorCode::ParseError, where + ": missing field '" + name + "'");
    try {
        return j.at(name).get<T>();
    } catch (const json::exception&) {
        throw Error(ErrorCode::ParseError, where + ": field '" + name + "' has the wrong type");
    }
}

}  // namespace

std::vector<CorpusCase> load_manifest(const fs::path& path) {
    const std::string text = read_file(path);
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
    }
    if (!root.is_object() || !root.contains("cases") || !root.at("cases").is_array()) {
        throw Error(ErrorCode::ParseError, path.string() + ": expected an object with a 'cases' array");
    }
    const fs::path base = path.parent_path();
    std::vector<CorpusCase> out;
    std::set<std::string> ids;
    size_t index = 0;
    for (const json& j : root.at("cases")) {
        const std::string where = path.filename().string() + " case #" + std::to_string(++index);
        if (!j.is_object()) throw Error(ErrorCode::ParseError, where + ": expected an object");
        CorpusCase c;
        c.id = field<std::string>(j, "id", where);
        if (c.id.empty()) throw Error(ErrorCode::ParseError, where + ": empty id");
        if (!ids.insert(c.id).second) throw Error(ErrorCode::DuplicateId, c.id);

        c.source = base / field<std::string>(j, "source", where);
        const auto task = task_from_string(field<std::string>(j, "task", where));
        if (!task) throw Error(ErrorCode::ParseError, where + ": unknown task");
        c.task = *task;
        const auto expected = outcome_from_string(field<std::string>(j, "expected", where));
        if (!expected) throw Error(ErrorCode::ParseError, where + ": expected must be Success, Partial or Failure");
        c.expected = *expected;

        if (j.contains("target") && !j.at("target").is_null()) {
            const json& t = j.at("target");
            if (!t.is_array() || t.size() != 2 || !t[0].is_number_integer() || !t[1].is_number_integer()) {
                throw Error(ErrorCode::ParseError, where + ": target must be [line, col]");
            }
            c.target = std::make_pair(t[0].get<int>(), t[1].get<int>());
        }
        c.cassette_dir = base / (j.contains("cassettes") ? field<std::string>(j, "cassettes", where)
                                                          : "cases/" + c.id + "/cassettes");
        c.fixture_dir = base / (j.contains("fixtures") ? field<std::string>(j, "fixtures", where)
                                                        : "cases/" + c.id + "/fixtures");
        if (j.contains("tags")) c.tags = field<std::vector<std::string>>(j, "tags", where);
        if (j.contains("options")) {
            const json& o = j.at("options");
            if (o.contains("allow_axioms")) c.allow_axioms = field<bool>(o, "allow_axioms", where);
            if (o.contains("max_rounds")) c.max_rounds = field<int>(o, "max_rounds", where);
        }

        for (const fs::path& p : {c.source, c.cassette_dir, c.fixture_dir}) {
            if (!fs::exists(p)) throw Error(ErrorCode::MissingFile, c.id + ": " + p.string());
        }
        out.push_back(std::move(c));
    }
    return out;
}

size_t BenchReport::successes() const {
    size_t n = 0;
    for (const CaseReport& c : cases) n += c.outcome == OutcomeKind::Success;
    return n;
}

size_t BenchReport::matching_expected() const {
    size_t n = 0;
    for (const CaseReport& c : cases) n += c.outcome == c.expected;
    return n;
}

std::optional<double> BenchReport::success_rate() const {
    if (cases.empty()) return std::nullopt;
    return static_cast<double>(successes()) / static_cast<double>(cases.size());
}

std::optional<double> BenchReport::expected_success_rate() const {
    if (cases.empty()) return std::nullopt;
    size_t n = 0;
    for (const CaseReport& c : cases) n += c.expected == OutcomeKind::Success;
    return static_cast<double>(n) / static_cast<double>(cases.size());
}

std::optional<double> BenchReport::mean_rounds() const {
    if (cases.empty()) return std::nullopt;
    double total = 0;
    for (const CaseReport& c : cases) total += c.rounds_used;
    return total / static_cast<double>(cases.size());
}

namespace {

CaseReport run_case(const CorpusCase& c, const BenchOptions& opts, std::string* verifier_version) {
    CaseReport r;
    r.id = c.id;
    r.expected = c.expected;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        EngineSettings s = opts.settings;
        if (c.allow_axioms) s.loop.allow_axioms = *c.allow_axioms;
        if (c.max_rounds) s.loop.max_rounds = *c.max_rounds;
        if (opts.replay) {
            s.verifier.mode = VerifierMode::Replay;
            s.verifier.fixture_dir = c.fixture_dir;
            s.provider.mode = ProviderMode::Replay;
            s.provider.cassette_dir = c.cassette_dir;
        } else if (s.provider.mode != ProviderMode::Live) {
            s.provider.cassette_dir = c.cassette_dir;
        }
        Verifier verifier(s.verifier);
        if (verifier_version != nullptr) *verifier_version = verifier.version();
        LlmClient llm(s.provider);
        Engine engine(verifier, llm, TemplateSet::builtin(), s.loop);

        const SourceText text = SourceText::load(c.source);
        std::optional<Diagnostic> target;
        if (c.target) {
            Diagnostic d;
            d.span = text.bind(c.target->first, c.target->second, c.target->first, c.target->second);
            target = d;
        }
        const Outcome o = engine.run_task(c.task, text, target);
        r.outcome = o.kind;
        r.reason = o.reason;
        r.rounds_used = o.stats.rounds_used;
        r.axioms_inserted = o.axioms_inserted();
        r.llm_calls = o.stats.llm_calls;
        r.verifier_calls = o.stats.verifier_calls;
    } catch (const std::exception& e) {
        r.outcome = OutcomeKind::Failure;
        r.reason = e.what();
    }
    r.duration_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

}  // namespace

BenchReport run_bench(const std::vector<CorpusCase>& cases, const BenchOptions& opts) {
    BenchReport report;
    report.model_id = opts.settings.provider.model_id;
    report.engine_version = DAFNY_PILOT_VERSION;
    report.verifier_version = "n/a";
    report.cases.resize(cases.size());

    unsigned workers = opts.parallelism;
    if (workers == 0) workers = std::max(1u, std::min(std::thread::hardware_concurrency(), 4u));
    workers = std::min<unsigned>(workers, std::max<size_t>(cases.size(), 1));

    std::vector<std::string> versions(cases.size());
    std::atomic<size_t> next{0};
    auto work = [&] {
        for (size_t i = next++; i < cases.size(); i = next++) {
            report.cases[i] = run_case(cases[i], opts, &versions[i]);
        }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();

    for (const std::string& v : versions) {
        if (!v.empty() && v != "unknown") {
            report.verifier_version = v;
            break;
        }
    }
    return report;
}

json to_json(const BenchReport& r) {
    json cases = json::array();
    for (const CaseReport& c : r.cases) {
        cases.push_back({{"id", c.id},
                         {"expected", to_string(c.expected)},
                         {"outcome", to_string(c.outcome)},
                         {"reason", c.reason},
                         {"rounds_used", c.rounds_used},
                         {"axioms_inserted", c.axioms_inserted},
                         {"llm_calls", c.llm_calls},
                         {"verifier_calls", c.verifier_calls},
                         {"duration_s", c.duration_s}});
    }
    auto opt = [](std::optional<double> v) { return v ? json(*v) : json(nullptr); };
    return json{{"cases", cases},
                {"aggregate",
                 {{"cases", r.cases.size()},
                  {"successes", r.successes()},
                  {"success_rate", opt(r.success_rate())},
                  {"expected_success_rate", opt(r.expected_success_rate())},
                  {"matching_expected", r.matching_expected()},
                  {"mean_rounds", opt(r.mean_rounds())}}},
                {"environment",
                 {{"verifier_version", r.verifier_version},
                  {"model_id", r.model_id},
                  {"engine_version", r.engine_version}}}};
}

namespace {

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

}  // namespace

std::string to_markdown(const BenchReport& r) {
    std::string md = "# Bench report\n\n";
    md += "| case | expected | outcome | rounds | axioms | LLM calls | verifier calls | time (s) |\n";
    md += "|---|---|---|---|---|---|---|---|\n";
    for (const CaseReport& c : r.cases) {
        md += "| " + c.id + " | " + std::string(to_string(c.expected)) + " | " + std::string(to_string(c.outcome)) +
              " | " + std::to_string(c.rounds_used) + " | " + std::to_string(c.axioms_inserted) + " | " +
              std::to_string(c.llm_calls) + " | " + std::to_string(c.verifier_calls) + " | " +
              fmt("%.3f", c.duration_s) + " |\n";
    }
    const auto rate = r.success_rate();
    const auto rounds = r.mean_rounds();
    md += "\n";
    md += "- cases: " + std::to_string(r.cases.size()) + "\n";
    md += "- success rate: " + (rate ? fmt("%.3f", *rate) : std::string("n/a")) + "\n";
    md += "- mean rounds: " + (rounds ? fmt("%.2f", *rounds) : std::string("n/a")) + "\n";
    md += "- outcomes matching the manifest: " + std::to_string(r.matching_expected()) + "/" +
          std::to_string(r.cases.size()) + "\n";
    md += "- verifier: " + r.verifier_version + ", model: " + r.model_id + ", engine: " + r.engine_version + "\n";
    bool any_reason = false;
    for (const CaseReport& c : r.cases) {
        if (c.reason.empty() || c.outcome == OutcomeKind::Success) continue;
        if (!any_reason) md += "\n## Notes\n\n";
        any_reason = true;
        md += "- " + c.id + ": " + c.reason + "\n";
    }
    return md;
}

void write_report(const BenchReport& r, const fs::path& dir) {
    fs::create_directories(dir);
    write_file_atomic(dir / "report.json", to_json(r).dump(2) + "\n");
    write_file_atomic(dir / "report.md", to_markdown(r));
}

}  // namespace dafny_pilot
