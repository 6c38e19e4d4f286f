#include <doctest.h>

#include "dafny_pilot/error.hpp"
#include "dafny_pilot/marker.hpp"
#include "dafny_pilot/prompt.hpp"
#include "helpers.hpp"

using namespace dafny_pilot;

namespace {

const char* kLemmaSystemText =
    "You are a software expert specializing in formal methods using the Dafny programming language. "
    "You receive the following program where a loop invariant could not be proven. The verifier error "
    "message is inside // VERIFIER ERROR ... //. Your task is to create lemmas and insert them into the "
    "code to facilitate verification.";

PromptTemplate tiny_template() {
    return parse_template(
        "---\ntask: Repair\nversion: t1\n---\n[system]\nsys\n[user]\nSource:\n{ANNOTATED_SOURCE}\n"
        "{EXEMPLARS}\n{FEEDBACK}\nEnd.\n",
        ".");
}

std::string numbered_source(int lines, int marker_line) {
    std::string s;
    for (int i = 1; i <= lines; ++i) {
        if (i == marker_line) s += marker_comment("boom") + "\n";
        s += "  line " + std::to_string(i) + " with some text to take up room\n";
    }
    return s;
}

Exemplar ex(int priority, size_t size) {
    return Exemplar{"e" + std::to_string(priority), std::string(size, 'x') + "\n", priority};
}

}  // namespace

TEST_CASE("builtin templates cover every task") {
    const TemplateSet set = TemplateSet::builtin();
    for (TaskKind k : {TaskKind::LemmaInference, TaskKind::ProofInference, TaskKind::Repair, TaskKind::Explain,
                       TaskKind::Nl2Spec}) {
        CHECK_NOTHROW(set.get(k));
    }
    CHECK(set.get(TaskKind::LemmaInference).system_text == kLemmaSystemText);
    CHECK_FALSE(set.get(TaskKind::ProofInference).exemplars.empty());
}

TEST_CASE("lemma inference prompt for the coincidence-count source") {
    const SourceText src = SourceText::load(test::case_dir("coincidence-count") / "source.dfy");
    Diagnostic d;
    d.span = src.bind(14, 12, 14, 12);
    d.message = "this invariant could not be proved to be maintained by the loop";
    d.category = DiagnosticCategory::InvariantNotMaintained;
    d.related.push_back({d.span, "loop invariant violation", RelatedKind::Message});

    PromptContext ctx;
    ctx.annotated_source = insert_error_marker(src, d).content();
    ctx.diagnostics = {d};
    const RenderedPrompt p = render_prompt(TemplateSet::builtin().get(TaskKind::LemmaInference), ctx, 1);
    REQUIRE(p.messages.size() == 2);
    CHECK(p.messages[0].role == Role::System);
    CHECK(p.messages[0].content == kLemmaSystemText);
    const std::string& user = p.messages[1].content;
    CHECK(user.find("// VERIFIER_ERROR loop invariant violation. This invariant could not be proved to be "
                    "maintained by the loop //\n invariant c + |multiset(a[m..]) * multiset(b[n..])|") !=
          std::string::npos);
    // Round 1 has no feedback section and leaves no placeholder behind.
    CHECK(user.find("previous attempt") == std::string::npos);
    CHECK(user.find('{' + std::string("FEEDBACK}")) == std::string::npos);
    CHECK(p.token_estimate == estimate_tokens(p.messages));
}

TEST_CASE("feedback renders from round 2 on") {
    PromptContext ctx;
    ctx.annotated_source = "x\n";
    Feedback fb;
    fb.previous_round = 1;
    fb.previous_code = "lemma L() {}\n";
    Diagnostic d;
    d.span.start_line = 3;
    d.span.start_col = 4;
    d.message = "assertion might not hold";
    fb.diagnostics = {d};
    ctx.feedback = fb;
    const PromptTemplate t = tiny_template();
    CHECK(render_prompt(t, ctx, 1).messages[1].content.find("previous attempt") == std::string::npos);
    const std::string r2 = render_prompt(t, ctx, 2).messages[1].content;
    CHECK(r2.find("Your previous attempt (round 1) did not verify.") != std::string::npos);
    CHECK(r2.find("lemma L() {}") != std::string::npos);
    CHECK(r2.find("// VERIFIER_ERROR line 3, column 4: assertion might not hold //") != std::string::npos);
}

TEST_CASE("missing context fields") {
    const PromptTemplate t = tiny_template();
    try {
        render_prompt(t, PromptContext{}, 1);
        FAIL("expected MissingContextField");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MissingContextField);
    }
}

TEST_CASE("template parsing errors") {
    CHECK_THROWS_AS(parse_template("no front matter", "."), Error);
    CHECK_THROWS_AS(parse_template("---\ntask: Bogus\n---\n[system]\na\n[user]\nb\n", "."), Error);
    CHECK_THROWS_AS(parse_template("---\ntask: Repair\n---\n[system]\na\n[user]\n{NOPE}\n", "."), Error);
    CHECK_THROWS_AS(parse_template("---\ntask: Repair\n---\n[system]\na\n", "."), Error);
    PromptTemplate dup = tiny_template();
    dup.exemplars = {ex(1, 1), ex(1, 2)};
    CHECK_THROWS_AS(dup.validate(), Error);
}

TEST_CASE("budget drops exemplars lowest priority first") {
    PromptTemplate t = tiny_template();
    t.exemplars = {ex(5, 400), ex(1, 400), ex(9, 400)};
    PromptContext ctx;
    ctx.annotated_source = "short\n";
    const RenderedPrompt full = render_prompt(t, ctx, 1);
    CHECK(fit_to_budget(full, full.token_estimate).active_exemplars.size() == 3);

    const RenderedPrompt two = fit_to_budget(full, full.token_estimate - 50);
    CHECK(two.active_exemplars == std::vector<size_t>{0, 2});
    CHECK(two.token_estimate <= full.token_estimate - 50);

    const RenderedPrompt one = fit_to_budget(full, full.token_estimate - 150);
    CHECK(one.active_exemplars == std::vector<size_t>{2});
}

TEST_CASE("budget then windows the source around the marker") {
    PromptTemplate t = tiny_template();
    t.exemplars = {ex(1, 100)};
    PromptContext ctx;
    ctx.annotated_source = numbered_source(200, 120);
    const RenderedPrompt full = render_prompt(t, ctx, 1);
    const size_t budget = full.token_estimate / 4;
    const RenderedPrompt fitted = fit_to_budget(full, budget);
    CHECK(fitted.token_estimate <= budget);
    CHECK(fitted.active_exemplars.empty());
    REQUIRE(fitted.window_radius);
    const std::string& user = fitted.messages[1].content;
    CHECK(user.find("VERIFIER_ERROR boom") != std::string::npos);
    CHECK(user.find("line 120 with") != std::string::npos);
    CHECK(user.find("line 1 with") == std::string::npos);
    CHECK(user.find("lines omitted") != std::string::npos);

    CHECK_THROWS_AS(fit_to_budget(full, 5), Error);
    CHECK_THROWS_AS(fit_to_budget(full, 0), Error);
}

TEST_CASE("property: fitted prompts never exceed the budget and keep the marker") {
    test::Rng rng(99);
    PromptTemplate t = tiny_template();
    t.exemplars = {ex(3, 300), ex(7, 120), ex(2, 50)};
    for (int iter = 0; iter < 60; ++iter) {
        PromptContext ctx;
        const int lines = 5 + static_cast<int>(rng.below(150));
        ctx.annotated_source = numbered_source(lines, 1 + static_cast<int>(rng.below(lines)));
        const RenderedPrompt full = render_prompt(t, ctx, 1);
        const size_t budget = 40 + rng.below(full.token_estimate + 10);
        try {
            const RenderedPrompt f = fit_to_budget(full, budget);
            REQUIRE(f.token_estimate <= budget);
            REQUIRE(f.messages[1].content.find("VERIFIER_ERROR boom") != std::string::npos);
        } catch (const Error& e) {
            REQUIRE(e.code() == ErrorCode::CannotFit);
        }
    }
}
