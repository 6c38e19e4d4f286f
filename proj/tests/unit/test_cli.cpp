#include <doctest.h>

#include <json.hpp>

#include "dafny_pilot/run_log.hpp"
#include "dafny_pilot/source.hpp"
#include "helpers.hpp"

using namespace dafny_pilot;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string out;  // stdout only
    std::string err;
};

std::string quote(const std::string& s) {
    std::string q = "'";
    for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
    return q + "'";
}

/// Runs `bin args...` in `cwd` with stdout and stderr kept apart.
Run run(const std::string& bin, const std::vector<std::string>& args, const fs::path& cwd) {
    std::string cmd = quote(bin);
    for (const std::string& a : args) cmd += " " + quote(a);
    cmd += " 2>" + quote((cwd / "stderr.txt").string());
    const ProcessResult p = run_process({"/bin/sh", "-c", cmd}, std::chrono::seconds(60), cwd);
    Run r;
    r.code = p.exit_code;
    r.out = p.output;
    r.err = test::read(cwd / "stderr.txt");
    return r;
}

Run cli(const std::vector<std::string>& args, const fs::path& cwd) { return run(DAFNY_PILOT_BIN, args, cwd); }

std::vector<std::string> replay_flags(const std::string& id) {
    return {"--verifier", "replay:" + (test::case_dir(id) / "fixtures").string(), "--llm",
            "replay:" + (test::case_dir(id) / "cassettes").string()};
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

size_t count_actions(const fs::path& jsonl, const std::string& action) {
    size_t n = 0;
    const std::string content = test::read(jsonl);
    for (std::string_view line : split_lines(content)) {
        if (json::parse(line).at("action") == action) ++n;
    }
    return n;
}

fs::path only_file_with_suffix(const fs::path& dir, const std::string& suffix) {
    fs::path found;
    size_t n = 0;
    for (const auto& e : fs::directory_iterator(dir)) {
        const std::string name = e.path().filename().string();
        if (name.size() >= suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
            found = e.path();
            ++n;
        }
    }
    REQUIRE(n == 1);
    return found;
}

}  // namespace

TEST_CASE("usage errors exit 64") {
    TempDir cwd;
    CHECK(cli({}, cwd.path()).code == 64);
    CHECK(cli({"fix"}, cwd.path()).code == 64);
    CHECK(cli({"fix", "/nonexistent.dfy"}, cwd.path()).code == 64);
    CHECK(cli({"frobnicate"}, cwd.path()).code == 64);
    const fs::path src = test::case_dir("verified-max") / "source.dfy";
    CHECK(cli({"fix", src.string(), "--format", "yaml"}, cwd.path()).code == 64);
    CHECK(cli(concat({"fix", src.string(), "--target", "x"}, replay_flags("verified-max")), cwd.path()).code == 64);
    CHECK(cli({"fix", src.string(), "--llm", "replay"}, cwd.path()).code == 64);

    test::write(cwd.path() / "dafny-pilot.toml", "max_rounds = many\n");
    const Run bad_config = cli(concat({"fix", src.string()}, replay_flags("verified-max")), cwd.path());
    CHECK(bad_config.code == 64);
    CHECK(bad_config.err.find("max_rounds") != std::string::npos);
}

TEST_CASE("verified files are a no-op for every task command") {
    for (const char* id : {"verified-max", "verified-sum", "verified-abs"}) {
        for (const char* cmd : {"fix", "lemmas", "prove"}) {
            TempDir cwd;
            const fs::path src = test::case_dir(id) / "source.dfy";
            const std::string before = test::read(src);
            const fs::path log = cwd.path() / "run.jsonl";
            const Run r = cli(concat({cmd, src.string(), "--write", "--run-log", log.string()}, replay_flags(id)),
                              cwd.path());
            CAPTURE(id);
            CAPTURE(cmd);
            CAPTURE(r.err);
            CHECK(r.code == 0);
            CHECK(r.out.empty());
            CHECK(count_actions(log, "llm_call") == 0);
            CHECK(count_actions(log, "outcome") == 1);
            CHECK(test::read(src) == before);
        }
    }
}

TEST_CASE("exit codes follow the outcome and --write only applies successes") {
    SUBCASE("success writes the file") {
        TempDir cwd;
        const fs::path file = cwd.path() / "factor0.dfy";
        fs::copy_file(test::case_dir("factor0") / "source.dfy", file);
        const Run r = cli(concat({"prove", file.string(), "--write", "--format", "text"}, replay_flags("factor0")),
                          cwd.path());
        CAPTURE(r.err);
        CHECK(r.code == 0);
        CHECK(r.out.rfind("Success after 1 round(s)", 0) == 0);
        CHECK(r.out.find("comment_failing_hints, rewrite_witness_bindings") != std::string::npos);
        CHECK(test::read(file).find("var a :| x == p*a;") != std::string::npos);
    }
    SUBCASE("partial leaves the file alone") {
        TempDir cwd;
        const fs::path file = cwd.path() / "p.dfy";
        fs::copy_file(test::case_dir("partial-two-asserts") / "source.dfy", file);
        const std::string before = test::read(file);
        const Run r = cli(concat({"fix", file.string(), "--write", "--max-rounds", "1"},
                                 replay_flags("partial-two-asserts")),
                          cwd.path());
        CAPTURE(r.err);
        CHECK(r.code == 2);
        CHECK(r.out.rfind("--- a/", 0) == 0);
        CHECK(test::read(file) == before);
    }
    SUBCASE("failure") {
        TempDir cwd;
        const fs::path src = test::case_dir("failure-prose-only") / "source.dfy";
        const Run r = cli(concat({"fix", src.string(), "--format", "json"}, replay_flags("failure-prose-only")),
                          cwd.path());
        CHECK(r.code == 3);
        const json j = json::parse(r.out);
        CHECK(j.at("outcome") == "Failure");
        CHECK(j.at("llm_calls") == 3);
        CHECK(j.at("diff") == "");
    }
    SUBCASE("a replay miss is an internal error") {
        TempDir cwd;
        const fs::path src = test::case_dir("factor0") / "source.dfy";
        const Run r = cli(concat({"fix", src.string()}, replay_flags("factor0")), cwd.path());
        CHECK(r.code == 70);
        CHECK(r.err.find("ReplayMiss") != std::string::npos);
    }
}

TEST_CASE("bench exit code reflects the manifest") {
    TempDir cwd;
    const Run ok = cli({"bench", (test::corpus_dir() / "manifest.json").string(), "--replay", "--out", "report"},
                       cwd.path());
    CAPTURE(ok.err);
    CHECK(ok.code == 0);
    const json report = json::parse(test::read(cwd.path() / "report" / "report.json"));
    CHECK(report.at("aggregate").at("matching_expected") == 11);
    CHECK(fs::exists(cwd.path() / "report" / "report.md"));

    // Claim a success that the corpus does not deliver.
    json manifest = json::parse(test::read(test::corpus_dir() / "manifest.json"));
    json& cases = manifest.at("cases");
    json wrong = json::array();
    for (json c : cases) {
        if (c.at("id") != "failure-prose-only") continue;
        const std::string dir = (test::corpus_dir() / "cases" / "failure-prose-only").string();
        c["source"] = dir + "/source.dfy";
        c["cassettes"] = dir + "/cassettes";
        c["fixtures"] = dir + "/fixtures";
        c["expected"] = "Success";
        wrong.push_back(c);
    }
    test::write(cwd.path() / "wrong.json", json{{"cases", wrong}}.dump());
    CHECK(cli({"bench", (cwd.path() / "wrong.json").string(), "--replay", "--out", "r2"}, cwd.path()).code == 3);
}

TEST_CASE("capture, author and replay a new case") {
    TempDir cwd;
    const fs::path work = cwd.path();
    const fs::path fixtures = work / "fixtures";
    const fs::path cassettes = work / "cassettes";
    const fs::path capture = work / "capture";
    fs::create_directories(cassettes);
    const fs::path src = work / "m.dfy";
    test::write(src, "method M() {\n  assert false;\n}\n");
    test::write(work / "fail.txt",
                "m.dfy(2,3): Error: assertion might not hold\n\nDafny program verifier finished with 0 verified, 1 error\n");
    test::write(work / "ok.txt", "\nDafny program verifier finished with 1 verified, 0 errors\n");
    test::write(work / "reply.txt", "```dafny\nmethod M() {\n  assert true;\n}\n```\n");

    const Run hash = run(AUTHOR_BIN, {"hash", src.string()}, work);
    CHECK(hash.code == 0);
    CHECK(hash.out == SourceText::load(src).content_hash() + "\n");
    REQUIRE(run(AUTHOR_BIN, {"fixture", src.string(), (work / "fail.txt").string(), "--out", fixtures.string()}, work)
                .code == 0);

    const std::vector<std::string> args = {"fix", src.string(), "--verifier", "replay:" + fixtures.string(), "--llm",
                                           "replay:" + cassettes.string(), "--capture-misses", capture.string()};
    const Run first = cli(args, work);
    CHECK(first.code == 70);
    const fs::path request = only_file_with_suffix(capture, ".request.json");
    REQUIRE(run(AUTHOR_BIN, {"cassette", request.string(), (work / "reply.txt").string(), "--out", cassettes.string()},
                work)
                .code == 0);
    fs::remove(request);

    const Run second = cli(args, work);
    CHECK(second.code == 70);
    const fs::path text = only_file_with_suffix(capture, ".dfy");
    REQUIRE(run(AUTHOR_BIN, {"fixture", text.string(), (work / "ok.txt").string(), "--out", fixtures.string()}, work)
                .code == 0);

    const Run third = cli(args, work);
    CAPTURE(third.err);
    CHECK(third.code == 0);
    CHECK(third.out.find("+  assert true;") != std::string::npos);
}

TEST_CASE("the API key never reaches the output") {
    TempDir cwd;
    ::setenv("DAFNY_PILOT_CLI_KEY", "sk-cli-secret-987", 1);
    const fs::path src = test::case_dir("factor0") / "source.dfy";
    const Run r = cli({"prove", src.string(), "--verifier", "replay:" + (test::case_dir("factor0") / "fixtures").string(),
                       "--api-key-env", "DAFNY_PILOT_CLI_KEY", "--endpoint", "http://127.0.0.1:9/v1/chat/completions",
                       "--run-log", (cwd.path() / "log.jsonl").string()},
                      cwd.path());
    ::unsetenv("DAFNY_PILOT_CLI_KEY");
    CHECK(r.code == 70);
    CHECK((r.out + r.err).find("sk-cli-secret-987") == std::string::npos);
    CHECK(test::read(cwd.path() / "log.jsonl").find("sk-cli-secret-987") == std::string::npos);
}
