#include <doctest.h>

#include "dafny_pilot/diff.hpp"
#include "dafny_pilot/error.hpp"
#include "dafny_pilot/source.hpp"
#include "helpers.hpp"

using namespace dafny_pilot;

namespace {

const char* kProgram =
    "type pos = x | 1 <= x witness 1\n"
    "\n"
    "ghost predicate IsFactor(p: pos, x: pos) {\n"
    "  exists q :: p * q == x }\n"
    "\n"
    "lemma {:axiom} Given(x: int)\n"
    "  ensures x * 0 == 0\n"
    "\n"
    "lemma Factor0(p: pos, y: pos, x: pos)\n"
    "    requires exists a :: x == p*a\n"
    "    ensures IsFactor(p, y + x) {\n"
    "  var s := \"} not a brace\";\n"
    "  // } nor this\n"
    "}\n"
    "\n"
    "class Counter {\n"
    "  var n: nat\n"
    "  method Inc() modifies this { n := n + 1; }\n"
    "}\n";

}  // namespace

TEST_CASE("line index and positions") {
    const SourceText t("a.dfy", "ab\ncd\n\nef");
    CHECK(t.line_count() == 4);
    CHECK(t.line(1) == "ab");
    CHECK(t.line(3) == "");
    CHECK(t.line(4) == "ef");
    CHECK(t.offset_of(2, 2) == 4);
    CHECK(t.position_of(4) == std::pair{2, 2});
    CHECK_THROWS_AS(t.line(5), Error);
    CHECK_THROWS_AS(t.offset_of(1, 0), Error);
    CHECK_THROWS_AS(t.offset_of(1, 9), Error);
}

TEST_CASE("bind clamps out-of-range positions") {
    const SourceText t("a.dfy", "abc\nde\n");
    const Span s = t.bind(9, 9, 9, 9);
    CHECK(s.start_line == 2);
    CHECK(s.start_col == 3);
    const Span z = t.bind(1, 0, 1, 0);
    CHECK(z.start_col == 1);
    CHECK(z.start_off == 0);
}

TEST_CASE("content hash follows content") {
    const SourceText a("a.dfy", "x");
    const SourceText b("b.dfy", "x");
    const SourceText c("a.dfy", "y");
    CHECK(a.content_hash() == b.content_hash());
    CHECK(a.content_hash() != c.content_hash());
    CHECK(a.content_hash().size() == 64);
}

TEST_CASE("CRLF files load normalised and save with CRLF") {
    dafny_pilot::TempDir dir;
    const auto p = dir.path() / "crlf.dfy";
    test::write(p, "method M()\r\n{\r\n}\r\n");
    const SourceText t = SourceText::load(p);
    CHECK(t.line_ending() == LineEnding::CRLF);
    CHECK(t.content() == "method M()\n{\n}\n");
    const auto out = dir.path() / "out.dfy";
    t.save(out);
    CHECK(test::read(out) == "method M()\r\n{\r\n}\r\n");
}

TEST_CASE("apply_patch rejects stale, overlapping and out-of-range edits") {
    const SourceText t("a.dfy", "0123456789");
    Patch p = make_patch(t, {make_edit(t, 2, 4, "X"), make_edit(t, 6, 6, "Y")});
    CHECK(apply_patch(t, p).content() == "01X45Y6789");

    const SourceText other = t.with_content("changed");
    CHECK_THROWS_AS(apply_patch(other, p), Error);
    try {
        apply_patch(other, p);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::StaleBase);
    }

    Patch overlap = make_patch(t, {make_edit(t, 2, 5, "A"), make_edit(t, 4, 6, "B")});
    try {
        apply_patch(t, overlap);
        FAIL("expected OverlappingEdits");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::OverlappingEdits);
    }
    CHECK_THROWS_AS(make_edit(t, 5, 20, ""), Error);
}

TEST_CASE("two insertions at one offset keep their order") {
    const SourceText t("a.dfy", "ab");
    const Patch p = make_patch(t, {make_insertion(t, 1, "1"), make_insertion(t, 1, "2")});
    CHECK(apply_patch(t, p).content() == "a12b");
}

TEST_CASE("property: patch locality") {
    // Bytes outside every edit span survive unchanged and in order.
    test::Rng rng(42);
    for (int iter = 0; iter < 300; ++iter) {
        std::string content;
        const size_t len = 1 + rng.below(80);
        for (size_t i = 0; i < len; ++i) content.push_back("ab\n{}; "[rng.below(7)]);
        const SourceText t("p.dfy", content);

        std::vector<Edit> edits;
        size_t cursor = 0;
        while (cursor <= content.size() && edits.size() < 4) {
            const size_t start = cursor + rng.below(content.size() - cursor + 1);
            const size_t end = start + rng.below(content.size() - start + 1);
            edits.push_back(make_edit(t, start, end, std::string(rng.below(4), 'Z')));
            cursor = end + 1;
            if (rng.below(3) == 0) break;
        }
        const Patch p = make_patch(t, edits);
        const std::string out = apply_patch(t, p).content();

        size_t in_pos = 0;
        size_t out_pos = 0;
        for (const Edit& e : p.edits) {
            const size_t keep = e.span.start_off - in_pos;
            REQUIRE(out.compare(out_pos, keep, content, in_pos, keep) == 0);
            out_pos += keep + e.replacement.size();
            in_pos = e.span.end_off;
        }
        REQUIRE(out.substr(out_pos) == content.substr(in_pos));
    }
}

TEST_CASE("property: line diff patch reproduces the target") {
    test::Rng rng(7);
    const char* pool[] = {"lemma L()", "{", "}", "  assert x;", "", "method M()", "  x := 1;"};
    for (int iter = 0; iter < 200; ++iter) {
        auto gen = [&] {
            std::string s;
            const size_t n = rng.below(10);
            for (size_t i = 0; i < n; ++i) s += std::string(pool[rng.below(7)]) + "\n";
            if (rng.below(4) == 0 && !s.empty()) s.pop_back();
            return s;
        };
        const std::string a = gen();
        const std::string b = gen();
        const SourceText t("d.dfy", a);
        const Patch p = line_diff_patch(t, b);
        REQUIRE(apply_patch(t, p).content() == b);
        if (a == b) REQUIRE(p.empty());
    }
}

TEST_CASE("unified diff of identical texts is empty") {
    CHECK(unified_diff("a\nb\n", "a\nb\n", "a/x", "b/x").empty());
    const std::string d = unified_diff("a\nb\n", "a\nc\n", "a/x", "b/x");
    CHECK(d.find("--- a/x") != std::string::npos);
    CHECK(d.find("-b\n") != std::string::npos);
    CHECK(d.find("+c\n") != std::string::npos);
}

TEST_CASE("declaration scanner") {
    const SourceText t("f.dfy", kProgram);
    const auto decls = scan_declarations(t);
    std::vector<std::string> names;
    for (const auto& d : decls) names.push_back(d.name);
    CHECK(names == std::vector<std::string>{"pos", "IsFactor", "Given", "Factor0", "Counter"});

    const auto given = find_declaration(t, "Given");
    REQUIRE(given);
    CHECK(given->kind == DeclarationKind::Lemma);
    CHECK(given->has_axiom_attribute);
    CHECK_FALSE(given->body);

    const auto f0 = find_declaration(t, "Factor0");
    REQUIRE(f0);
    REQUIRE(f0->body);
    // Braces inside strings and comments do not close the body.
    const std::string body(t.content().substr(f0->body->start_off, f0->body->length()));
    CHECK(body.front() == '{');
    CHECK(body.back() == '}');
    CHECK(body.find("nor this") != std::string::npos);

    CHECK(find_declaration(t, "IsFactor")->kind == DeclarationKind::GhostPredicate);

    const auto inc = find_declaration(t, "Inc");
    REQUIRE(inc);
    CHECK(inc->kind == DeclarationKind::Method);
    const auto enclosing = find_enclosing_declaration(t, *inc->body);
    REQUIRE(enclosing);
    CHECK(enclosing->name == "Inc");
}
