// dafny-pilot command-line entry point.
//
// Exit codes: 0 Success, 2 Partial, 3 Failure, 64 usage error, 70 internal
// error. Only the requested artifact goes to stdout; everything else goes to
// stderr.

#include <CLI11.hpp>

#include <csignal>
#include <iostream>
#include <pthread.h>

#include "dafny_pilot/bench.hpp"
#include "dafny_pilot/config.hpp"
#include "dafny_pilot/diff.hpp"
#include "dafny_pilot/error.hpp"
#include "dafny_pilot/repair_loop.hpp"
#include "dafny_pilot/service.hpp"
#include "dafny_pilot/util.hpp"

namespace dp = dafny_pilot;

namespace {

constexpr int kExitSuccess = 0;
constexpr int kExitPartial = 2;
constexpr int kExitFailure = 3;
constexpr int kExitUsage = 64;
constexpr int kExitInternal = 70;

struct Common {
    std::string llm;
    std::string verifier;
    std::string dafny;
    std::vector<std::string> dafny_args;
    double timeout = 0;
    int max_rounds = 0;
    int candidates = 0;
    bool allow_axioms = false;
    bool no_hints = false;
    bool no_witness = false;
    long budget = 0;
    std::string model;
    std::string endpoint;
    std::string api_key_env;
    std::string capture;
    std::string config = dp::kConfigFileName;
    std::string run_log;
};

void add_common(CLI::App& app, Common& c) {
    app.add_option("--llm", c.llm, "Model provider: live, record:DIR or replay:DIR");
    app.add_option("--verifier", c.verifier, "Verifier: subprocess or replay:DIR");
    app.add_option("--dafny", c.dafny, "Dafny executable");
    app.add_option("--dafny-arg", c.dafny_args, "Extra argument passed to Dafny (repeatable)");
    app.add_option("--timeout", c.timeout, "Verifier timeout in seconds")->check(CLI::PositiveNumber);
    app.add_option("--max-rounds", c.max_rounds, "Feedback rounds")->check(CLI::PositiveNumber);
    app.add_option("--candidates", c.candidates, "Model calls per round")->check(CLI::PositiveNumber);
    app.add_flag("--allow-axioms", c.allow_axioms, "Let the loop turn failing lemmas into axioms");
    app.add_flag("--no-hint-commenting", c.no_hints, "Disable commenting out failing calc hints");
    app.add_flag("--no-witness-rewrite", c.no_witness, "Disable the such-that binding rewrite");
    app.add_option("--budget", c.budget, "Prompt token budget")->check(CLI::PositiveNumber);
    app.add_option("--model", c.model, "Model id");
    app.add_option("--endpoint", c.endpoint, "Chat-completions endpoint URL");
    app.add_option("--api-key-env", c.api_key_env, "Environment variable that holds the API key");
    app.add_option("--capture-misses", c.capture, "Write unmatched replay requests and texts here");
    app.add_option("--config", c.config, "Settings file (key = value lines)");
    app.add_option("--run-log", c.run_log, "Write the JSON-lines run log to this file");
}

dp::KeyValues flags_of(const CLI::App& app, const Common& c) {
    dp::KeyValues kv;
    auto given = [&](const char* name) { return app.count(name) > 0; };
    if (given("--llm")) kv["llm"] = c.llm;
    if (given("--verifier")) kv["verifier"] = c.verifier;
    if (given("--dafny")) kv["dafny"] = c.dafny;
    if (given("--dafny-arg")) {
        std::string joined;
        for (const auto& a : c.dafny_args) joined += (joined.empty() ? "" : " ") + a;
        kv["dafny_args"] = joined;
    }
    if (given("--timeout")) kv["timeout"] = std::to_string(c.timeout);
    if (given("--max-rounds")) kv["max_rounds"] = std::to_string(c.max_rounds);
    if (given("--candidates")) kv["candidates"] = std::to_string(c.candidates);
    if (c.allow_axioms) kv["allow_axioms"] = "true";
    if (c.no_hints) kv["hint_commenting"] = "false";
    if (c.no_witness) kv["witness_rewrite"] = "false";
    if (given("--budget")) kv["budget"] = std::to_string(c.budget);
    if (given("--model")) kv["model"] = c.model;
    if (given("--endpoint")) kv["endpoint"] = c.endpoint;
    if (given("--api-key-env")) kv["api_key_env"] = c.api_key_env;
    if (given("--capture-misses")) kv["capture_misses"] = c.capture;
    return kv;
}

std::optional<std::pair<int, int>> parse_target(const std::string& s) {
    const size_t colon = s.find(':');
    if (colon == std::string::npos) return std::nullopt;
    try {
        const int line = std::stoi(s.substr(0, colon));
        const int col = std::stoi(s.substr(colon + 1));
        if (line < 1 || col < 1) return std::nullopt;
        return std::make_pair(line, col);
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

void warn_on_version_mismatch(dp::Verifier& v) {
    if (v.config().mode != dp::VerifierMode::Subprocess || !v.config().expected_version) return;
    if (!v.version_matches_expected()) {
        std::cerr << "warning: Dafny reports version '" << v.version() << "', expected "
                  << *v.config().expected_version << "\n";
    }
}

int exit_code_for(dp::OutcomeKind k) {
    switch (k) {
        case dp::OutcomeKind::Success: return kExitSuccess;
        case dp::OutcomeKind::Partial: return kExitPartial;
        case dp::OutcomeKind::Failure: return kExitFailure;
    }
    return kExitFailure;
}

int run_task_command(dp::TaskKind task, const std::string& file, const std::string& target_text,
                     const std::string& format, bool write, const dp::EngineSettings& s, const Common& c) {
    const dp::SourceText text = dp::SourceText::load(file);
    std::optional<dp::Diagnostic> target;
    if (!target_text.empty()) {
        const auto t = parse_target(target_text);
        if (!t) throw dp::Error(dp::ErrorCode::InvalidArgument, "--target expects LINE:COL");
        dp::Diagnostic d;
        d.span = text.bind(t->first, t->second, t->first, t->second);
        target = d;
    }
    dp::Verifier verifier(s.verifier);
    warn_on_version_mismatch(verifier);
    dp::LlmClient llm(s.provider);
    std::unique_ptr<dp::RunLog> log = c.run_log.empty() ? std::make_unique<dp::RunLog>()
                                                        : std::make_unique<dp::RunLog>(c.run_log);
    dp::Engine engine(verifier, llm, dp::TemplateSet::builtin(), s.loop, log.get());
    const dp::Outcome o = engine.run_task(task, text, target);

    const std::string diff =
        dp::unified_diff(text.content(), o.final_text.content(), "a/" + text.path(), "b/" + text.path());
    if (format == "patch") {
        std::cout << diff;
    } else if (format == "json") {
        std::cout << dp::to_json(o).dump(2) << "\n";
    } else {
        std::cout << dp::to_string(o.kind) << " after " << o.stats.rounds_used << " round(s)";
        if (!o.reason.empty()) std::cout << ": " << o.reason;
        std::cout << "\n";
        for (const dp::Attempt& a : o.attempts) {
            std::cout << "  round " << a.round << ": " << dp::to_string(a.candidate.kind) << ", "
                      << dp::to_string(a.result.status) << ", " << a.residual_errors << " error(s), "
                      << a.axioms_inserted << " axiom(s)";
            for (const std::string& h : a.heuristics_applied) std::cout << ", " << h;
            std::cout << "\n";
        }
    }
    if (write && o.kind == dp::OutcomeKind::Success && !o.patch.empty()) {
        o.final_text.save(file);
    }
    std::cerr << dp::to_string(o.kind) << " (rounds: " << o.stats.rounds_used << ", model calls: "
              << o.stats.llm_calls << ", verifier runs: " << o.stats.verifier_calls
              << ", axioms: " << o.axioms_inserted() << ")\n";
    return exit_code_for(o.kind);
}

int serve_command(const std::string& host, int port, const std::string& ui, const dp::EngineSettings& s) {
    // Handle SIGINT/SIGTERM synchronously on this thread.
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);

    dp::ServiceConfig cfg;
    cfg.host = host;
    cfg.port = port;
    cfg.settings = s;
    cfg.ui_dir = ui;
    dp::Service service(cfg);
    const int bound = service.start();
    std::cerr << "listening on http://" << host << ":" << bound << "\n";
    if (host != "127.0.0.1" && host != "localhost" && host != "::1") {
        std::cerr << "warning: the service has no authentication; do not expose it beyond this machine\n";
    }
    int sig = 0;
    sigwait(&set, &sig);
    service.stop();
    return kExitSuccess;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"LLM-assisted proof suggestions for Dafny programs", "dafny-pilot"};
    app.set_version_flag("--version", DAFNY_PILOT_VERSION);
    app.require_subcommand(1);
    Common common;

    std::string file;
    std::string target;
    std::string format = "patch";
    bool write = false;

    struct TaskCmd {
        const char* name;
        dp::TaskKind task;
        const char* help;
    };
    const TaskCmd task_cmds[] = {
        {"fix", dp::TaskKind::Repair, "Repair a failing program"},
        {"lemmas", dp::TaskKind::LemmaInference, "Suggest lemmas and calls that make the program verify"},
        {"prove", dp::TaskKind::ProofInference, "Suggest a proof for a failing lemma"},
    };
    std::map<CLI::App*, dp::TaskKind> task_of;
    for (const TaskCmd& t : task_cmds) {
        CLI::App* sub = app.add_subcommand(t.name, t.help);
        sub->add_option("file", file, "Dafny source file")->required()->check(CLI::ExistingFile);
        sub->add_option("--target", target, "Diagnostic position LINE:COL to work on");
        sub->add_option("--format", format, "Output: patch, json or text")
            ->check(CLI::IsMember({"patch", "json", "text"}));
        sub->add_flag("--write", write, "Apply a successful result to the file in place");
        add_common(*sub, common);
        task_of[sub] = t.task;
    }

    CLI::App* explain = app.add_subcommand("explain", "Explain a verifier error in plain language");
    explain->add_option("file", file, "Dafny source file")->required()->check(CLI::ExistingFile);
    explain->add_option("--target", target, "Diagnostic position LINE:COL to explain");
    add_common(*explain, common);

    std::string requirement;
    std::string requirement_file;
    CLI::App* translate = app.add_subcommand("translate", "Translate a natural-language requirement into Dafny");
    auto* text_opt = translate->add_option("--text", requirement, "Requirement text");
    auto* file_opt = translate->add_option("--file", requirement_file, "File holding the requirement")
                         ->check(CLI::ExistingFile);
    text_opt->excludes(file_opt);
    file_opt->excludes(text_opt);
    add_common(*translate, common);

    std::string manifest;
    std::string out_dir = "bench-report";
    bool replay = false;
    unsigned jobs = 0;
    CLI::App* bench = app.add_subcommand("bench", "Run the corpus in a manifest and write a report");
    bench->add_option("manifest", manifest, "Manifest JSON file")->required()->check(CLI::ExistingFile);
    bench->add_flag("--replay", replay, "Replay each case's fixtures and cassettes");
    bench->add_option("--out", out_dir, "Directory for report.json and report.md");
    bench->add_option("--jobs", jobs, "Parallel cases (default: cores, at most 4)");
    add_common(*bench, common);

    std::string host = "127.0.0.1";
    int port = 8765;
    std::string ui_dir;
    CLI::App* serve = app.add_subcommand("serve", "Start the local HTTP service");
    serve->add_option("--host", host, "Bind address");
    serve->add_option("--port", port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535));
    serve->add_option("--ui", ui_dir, "Directory served under /ui/")->check(CLI::ExistingDirectory);
    add_common(*serve, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    CLI::App* sub = app.get_subcommands().front();
    try {
        const dp::EngineSettings s = dp::resolve_settings(common.config, flags_of(*sub, common));
        if (auto it = task_of.find(sub); it != task_of.end()) {
            return run_task_command(it->second, file, target, format, write, s, common);
        }
        if (sub == explain || sub == translate) {
            dp::Verifier verifier(s.verifier);
            dp::LlmClient llm(s.provider);
            std::unique_ptr<dp::RunLog> log = common.run_log.empty() ? std::make_unique<dp::RunLog>()
                                                                     : std::make_unique<dp::RunLog>(common.run_log);
            dp::Engine engine(verifier, llm, dp::TemplateSet::builtin(), s.loop, log.get());
            dp::TextTaskInput in;
            if (sub == translate) {
                if (requirement.empty() && requirement_file.empty()) {
                    std::cerr << "translate needs --text or --file\n" << translate->help();
                    return kExitUsage;
                }
                in.nl_spec = requirement_file.empty() ? requirement : dp::read_file(requirement_file);
                try {
                    std::cout << engine.run_text_task(dp::TaskKind::Nl2Spec, in);
                } catch (const dp::Error& e) {
                    if (e.code() != dp::ErrorCode::NoCodeFound && e.code() != dp::ErrorCode::PrecheckFailed) throw;
                    std::cerr << e.what() << "\n";
                    return kExitFailure;
                }
                return kExitSuccess;
            }
            const dp::SourceText text = dp::SourceText::load(file);
            in.source = text;
            if (!target.empty()) {
                const auto t = parse_target(target);
                if (!t) throw dp::Error(dp::ErrorCode::InvalidArgument, "--target expects LINE:COL");
                dp::Diagnostic d;
                d.span = text.bind(t->first, t->second, t->first, t->second);
                for (const dp::Diagnostic& e : verifier.verify(text).errors()) {
                    if (e.span.start_line == t->first) {
                        d = e;
                        break;
                    }
                }
                in.diagnostic = d;
            } else {
                const dp::VerificationResult r = verifier.verify(text);
                if (r.verified()) {
                    std::cerr << "the program verifies; nothing to explain\n";
                    return kExitSuccess;
                }
                const auto errors = r.errors();
                if (errors.empty()) {
                    std::cerr << "the verifier reported " << dp::to_string(r.status) << " without diagnostics\n";
                    return kExitFailure;
                }
                in.diagnostic = errors.front();
            }
            std::cout << engine.run_text_task(dp::TaskKind::Explain, in);
            return kExitSuccess;
        }
        if (sub == bench) {
            dp::BenchOptions opts;
            opts.settings = s;
            opts.replay = replay;
            opts.parallelism = jobs;
            const auto cases = dp::load_manifest(manifest);
            const dp::BenchReport report = dp::run_bench(cases, opts);
            dp::write_report(report, out_dir);
            std::cerr << report.successes() << "/" << report.cases.size() << " succeeded; "
                      << report.matching_expected() << "/" << report.cases.size()
                      << " match the manifest; report written to " << out_dir << "\n";
            return report.matching_expected() == report.cases.size() ? kExitSuccess : kExitFailure;
        }
        if (sub == serve) return serve_command(host, port, ui_dir, s);
    } catch (const dp::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        switch (e.code()) {
            case dp::ErrorCode::InvalidArgument:
            case dp::ErrorCode::MissingFile:
            case dp::ErrorCode::ParseError:
            case dp::ErrorCode::DuplicateId:
            case dp::ErrorCode::AuthMissing: return kExitUsage;
            default: return kExitInternal;
        }
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitInternal;
}
