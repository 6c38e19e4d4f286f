#include <doctest.h>

#include <functional>

#include "dafny_pilot/error.hpp"
#include "dafny_pilot/heuristics.hpp"
#include "dafny_pilot/repair_loop.hpp"
#include "helpers.hpp"

using namespace dafny_pilot;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const char* kKeyEnv = "DAFNY_PILOT_LOOP_TEST_KEY";

struct Replay {
    explicit Replay(const std::string& id, LoopConfig loop = {}) {
        VerifierConfig vc;
        vc.mode = VerifierMode::Replay;
        vc.fixture_dir = test::case_dir(id) / "fixtures";
        verifier = std::make_unique<Verifier>(vc);
        ProviderConfig pc;
        pc.mode = ProviderMode::Replay;
        pc.cassette_dir = test::case_dir(id) / "cassettes";
        llm = std::make_unique<LlmClient>(pc);
        engine = std::make_unique<Engine>(*verifier, *llm, TemplateSet::builtin(), loop, &log);
        source = SourceText::load(test::case_dir(id) / "source.dfy");
    }
    RunLog log;
    std::unique_ptr<Verifier> verifier;
    std::unique_ptr<LlmClient> llm;
    std::unique_ptr<Engine> engine;
    SourceText source;
};

LoopConfig with_axioms() {
    LoopConfig c;
    c.allow_axioms = true;
    return c;
}

/// Answers every request through a callback, like a provider would.
class FunctionTransport : public HttpTransport {
public:
    explicit FunctionTransport(std::function<std::string()> next) : next_(std::move(next)) {}
    HttpReply post_json(const std::string&, const std::string&, const std::vector<std::pair<std::string, std::string>>&,
                        double) override {
        ++requests;
        const json body{{"choices", {{{"message", {{"role", "assistant"}, {"content", next_()}}}, {"finish_reason", "stop"}}}}};
        return HttpReply{200, body.dump()};
    }
    size_t requests = 0;

private:
    std::function<std::string()> next_;
};

Attempt attempt(size_t residual, size_t axioms, size_t bytes, int round) {
    Attempt a;
    a.residual_errors = residual;
    a.axioms_inserted = axioms;
    a.patch_size_bytes = bytes;
    a.round = round;
    return a;
}

size_t count_of(const std::string& hay, const std::string& needle) {
    size_t n = 0;
    for (size_t p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
    return n;
}

}  // namespace

TEST_CASE("property: score_attempts picks the lexicographic minimum, earliest on ties") {
    CHECK_THROWS_AS(score_attempts({}), Error);
    test::Rng rng(7);
    for (int iter = 0; iter < 300; ++iter) {
        std::vector<Attempt> as;
        const size_t n = 1 + rng.below(8);
        for (size_t i = 0; i < n; ++i) {
            as.push_back(attempt(rng.below(3), rng.below(3), rng.below(3), 1 + static_cast<int>(rng.below(2))));
        }
        const size_t best = score_attempts(as);
        const auto key = [&](size_t i) {
            return std::make_tuple(as[i].residual_errors, as[i].axioms_inserted, as[i].patch_size_bytes, as[i].round);
        };
        for (size_t i = 0; i < n; ++i) {
            REQUIRE(key(best) <= key(i));
            if (i < best) REQUIRE(key(i) != key(best));
        }
    }
}

TEST_CASE("coincidence-count succeeds in one round with three axioms") {
    Replay r("coincidence-count", with_axioms());
    const Outcome o = r.engine->run_task(TaskKind::LemmaInference, r.source);
    CHECK(o.kind == OutcomeKind::Success);
    CHECK(o.stats.rounds_used == 1);
    CHECK(o.stats.llm_calls == 1);
    CHECK(o.axioms_inserted() == 3);
    REQUIRE(o.best);
    CHECK(o.attempts[*o.best].heuristics_applied == std::vector<std::string>{kAxiomatize});
    CHECK(count_of(o.final_text.content(), "lemma {:axiom}") == 3);
    CHECK(o.final_text.content().find("VERIFIER_ERROR") == std::string::npos);
    CHECK(apply_patch(o.original, o.patch).content() == o.final_text.content());
    CHECK(o.stats.soundness_checks == 1);
    CHECK(r.log.count("llm_call") == 1);
    CHECK(r.log.all().back().at("action") == "outcome");
}

TEST_CASE("without axioms the same reply leaves the postconditions open") {
    LoopConfig c;
    c.max_rounds = 1;
    Replay r("coincidence-count", c);
    const Outcome o = r.engine->run_task(TaskKind::LemmaInference, r.source);
    CHECK(o.kind == OutcomeKind::Failure);
    REQUIRE(o.attempts.size() == 1);
    CHECK(o.attempts[0].residual_errors == 3);
    CHECK(o.axioms_inserted() == 0);
    for (const Attempt& a : o.attempts) {
        CHECK(a.axioms_inserted == 0);
        CHECK(a.text.content().find("{:axiom}") == std::string::npos);
    }
    CHECK(r.llm->calls() == 1);
}

TEST_CASE("round two sees the round-one code and its diagnostic") {
    Replay r("coincidence-count-feedback", with_axioms());
    const Outcome o = r.engine->run_task(TaskKind::LemmaInference, r.source);
    CHECK(o.kind == OutcomeKind::Success);
    CHECK(o.stats.rounds_used == 2);
    CHECK(o.stats.llm_calls == 2);
    REQUIRE(o.attempts.size() == 2);

    std::vector<json> prompts;
    for (const json& rec : r.log.all()) {
        if (rec.at("action") == "prompt") prompts.push_back(rec);
    }
    REQUIRE(prompts.size() == 2);
    CHECK(prompts[1].at("round") == 2);
    const std::string user = prompts[1].at("messages").at(1).at("content");
    const Attempt& first = o.attempts[0];
    CHECK(user.find(first.text.content()) != std::string::npos);
    REQUIRE(first.result.errors().size() == 1);
    CHECK(first.result.errors()[0].category == DiagnosticCategory::InvariantNotMaintained);
    CHECK(user.find("line 38, column 12: " + marker_message(first.result.errors()[0])) != std::string::npos);
    CHECK(prompts[0].at("messages").at(1).at("content").get<std::string>().find("previous attempt") ==
          std::string::npos);
}

TEST_CASE("factor0 is closed by the two syntactic heuristics") {
    Replay r("factor0");
    const Outcome o = r.engine->run_task(TaskKind::ProofInference, r.source);
    CHECK(o.kind == OutcomeKind::Success);
    REQUIRE(o.best);
    CHECK(o.attempts[*o.best].heuristics_applied ==
          std::vector<std::string>{kCommentFailingHints, kRewriteWitnessBindings});
    const std::string& text = o.final_text.content();
    CHECK(text.find("var a :| x == p*a;") != std::string::npos);
    CHECK(text.find("var b :| y == p*b;") != std::string::npos);
    CHECK(text.find("/* { assert y == p * b; } */") != std::string::npos);
    CHECK(o.axioms_inserted() == 0);
}

TEST_CASE("partial and failure outcomes") {
    SUBCASE("partial keeps the best attempt") {
        LoopConfig c;
        c.max_rounds = 1;
        Replay r("partial-two-asserts", c);
        const Outcome o = r.engine->run_task(TaskKind::Repair, r.source);
        CHECK(o.kind == OutcomeKind::Partial);
        CHECK(o.initial_errors == 2);
        REQUIRE(o.best);
        CHECK(o.attempts[*o.best].residual_errors == 1);
        CHECK(o.final_text.content() != o.original.content());
    }
    SUBCASE("prose-only replies") {
        Replay r("failure-prose-only");
        const Outcome o = r.engine->run_task(TaskKind::Repair, r.source);
        CHECK(o.kind == OutcomeKind::Failure);
        CHECK(o.attempts.empty());
        CHECK(o.stats.llm_calls == 3);
        CHECK(o.final_text.content() == o.original.content());
        CHECK(o.patch.edits.empty());
    }
    SUBCASE("syntax errors never reach full verification") {
        Replay r("failure-syntax");
        const Outcome o = r.engine->run_task(TaskKind::ProofInference, r.source);
        CHECK(o.kind == OutcomeKind::Failure);
        CHECK(o.reason == "no attempt reduced the error count (1)");
        CHECK(o.stats.verifier_calls == 1);
        CHECK(r.verifier->stats().verify_calls == 1);
        for (const Attempt& a : o.attempts) CHECK(a.candidate.precheck.state != PrecheckState::Passed);
    }
}

TEST_CASE("an already verified file makes no model calls") {
    for (const char* id : {"verified-max", "verified-sum", "verified-abs"}) {
        Replay r(id);
        const Outcome o = r.engine->run_task(TaskKind::Repair, r.source);
        CHECK(o.kind == OutcomeKind::Success);
        CHECK(o.stats.llm_calls == 0);
        CHECK(o.stats.rounds_used == 0);
        CHECK(o.patch.edits.empty());
        CHECK(r.log.count("llm_call") == 0);
    }
}

TEST_CASE("prompt over the budget") {
    LoopConfig c;
    c.budget_tokens = 10;
    Replay r("coincidence-count", c);
    try {
        r.engine->run_task(TaskKind::LemmaInference, r.source);
        FAIL("expected BudgetExhausted");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::BudgetExhausted);
    }
    CHECK(r.llm->calls() == 0);
}

TEST_CASE("loop configuration validation") {
    LoopConfig c;
    CHECK_NOTHROW(c.validate());
    c.max_rounds = 0;
    CHECK_THROWS_AS(c.validate(), Error);
    c = {};
    c.rewrite_threshold = 1.5;
    CHECK_THROWS_AS(c.validate(), Error);
    c = {};
    c.candidates_per_round = 0;
    CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("property: call bounds and the axiom policy hold for arbitrary replies") {
    ::setenv(kKeyEnv, "sk-loop-test", 1);
    TempDir bin;
    VerifierConfig vc;
    vc.executable = test::install_fake_dafny(bin.path());
    vc.timeout_s = 20;
    Verifier verifier(vc);

    const std::string source =
        "lemma A(x: int)\n"
        "  ensures x == x\n"
        "{\n"
        "  assert false;\n"
        "}\n"
        "\n"
        "method M(x: int)\n"
        "{\n"
        "  assert false;\n"
        "  assert x == x;\n"
        "}\n";
    const SourceText text("prop.dfy", source);

    // Reply shapes: prose, unchanged file, syntax error, partial fix, full fix,
    // and a lemma body that still fails.
    std::string no_m = source;
    no_m.replace(no_m.find("  assert false;\n  assert x"), 16, "");
    std::string no_both = no_m;
    no_both.replace(no_both.find("  assert false;\n"), 16, "");
    std::string broken = source;
    broken.replace(broken.find("  assert x == x;"), 16, "  parse error here");
    const std::vector<std::string> replies = {
        "I cannot help with that.",
        "```dafny\n" + source + "```\n",
        "```dafny\n" + broken + "```\n",
        "```dafny\n" + no_m + "```\n",
        "```dafny\n" + no_both + "```\n",
        "```dafny\nlemma A(x: int)\n  ensures x == x\n{\n  assert false;\n  assert true;\n}\n```\n",
    };

    test::Rng rng(2024);
    for (int iter = 0; iter < 12; ++iter) {
        LoopConfig cfg;
        cfg.max_rounds = 1 + static_cast<int>(rng.below(3));
        cfg.candidates_per_round = 1 + static_cast<int>(rng.below(2));
        cfg.allow_axioms = rng.below(2) == 1;
        cfg.enable_hint_commenting = rng.below(2) == 1;
        cfg.enable_witness_rewrite = rng.below(2) == 1;

        ProviderConfig pc;
        pc.api_key_env = kKeyEnv;
        pc.backoff_base = std::chrono::milliseconds(1);
        auto transport = std::make_shared<FunctionTransport>([&] { return replies[rng.below(replies.size())]; });
        LlmClient llm(pc, transport);
        Engine engine(verifier, llm, TemplateSet::builtin(), cfg);

        const size_t verify_before = verifier.stats().verify_calls;
        const Outcome o = engine.run_task(TaskKind::Repair, text);
        CAPTURE(iter);
        CAPTURE(o.reason);

        const size_t max_llm = static_cast<size_t>(cfg.max_rounds * cfg.candidates_per_round);
        REQUIRE(o.stats.llm_calls <= max_llm);
        REQUIRE(o.stats.llm_calls == transport->requests);
        const size_t per_candidate = 1 + static_cast<size_t>(cfg.enabled_heuristics());
        REQUIRE(o.stats.verifier_calls <= 1 + max_llm * per_candidate);
        REQUIRE(o.stats.soundness_checks <= 1);
        REQUIRE(verifier.stats().verify_calls - verify_before == o.stats.verifier_calls + o.stats.soundness_checks);
        REQUIRE(o.stats.rounds_used <= cfg.max_rounds);

        if (!cfg.allow_axioms) {
            REQUIRE(o.axioms_inserted() == 0);
            for (const Attempt& a : o.attempts) REQUIRE(a.axiomatized.empty());
            REQUIRE(o.final_text.content().find("{:axiom}") == std::string::npos);
        }
        REQUIRE(count_of(o.final_text.content(), "{:axiom}") == o.axioms_inserted());
        if (o.kind == OutcomeKind::Success) {
            const bool clean = o.final_text.content().find("assert false") == std::string::npos;
            REQUIRE((clean || o.axioms_inserted() > 0));
        }
        if (o.kind == OutcomeKind::Failure) REQUIRE(o.final_text.content() == source);
    }
    ::unsetenv(kKeyEnv);
}
