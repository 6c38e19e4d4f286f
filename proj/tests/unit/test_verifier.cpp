#include <doctest.h>

#include <fstream>

#include "dafny_pilot/error.hpp"
#include "dafny_pilot/verifier.hpp"
#include "helpers.hpp"

using namespace dafny_pilot;
namespace fs = std::filesystem;

namespace {

VerifierConfig replay_config(const fs::path& dir) {
    VerifierConfig c;
    c.mode = VerifierMode::Replay;
    c.fixture_dir = dir;
    return c;
}

}  // namespace

TEST_CASE("replay serves the corpus fixtures by content hash") {
    Verifier v(replay_config(test::case_dir("coincidence-count") / "fixtures"));
    const SourceText src = SourceText::load(test::case_dir("coincidence-count") / "source.dfy");
    const VerificationResult r = v.verify(src);
    CHECK(r.status == VerificationStatus::Failed);
    REQUIRE(r.errors().size() == 1);
    CHECK(r.errors()[0].span.start_line == 14);
    CHECK(r.errors()[0].span.start_col == 12);
    CHECK(r.errors()[0].category == DiagnosticCategory::InvariantNotMaintained);
    CHECK(v.version() == "4.3.0");
    CHECK(v.version_matches_expected());
    CHECK(v.stats().verify_calls == 1);
}

TEST_CASE("replay resolve derives from the verify fixture") {
    Verifier v(replay_config(test::case_dir("failure-syntax") / "fixtures"));
    const SourceText ok = SourceText::load(test::case_dir("failure-syntax") / "source.dfy");
    const VerificationResult r = v.resolve(ok);
    CHECK(r.status == VerificationStatus::Verified);
    CHECK(r.diagnostics.empty());
    CHECK(v.stats().resolve_calls == 1);
}

TEST_CASE("replay miss reports the hash and captures the text") {
    TempDir fixtures;
    TempDir capture;
    VerifierConfig c = replay_config(fixtures.path());
    c.capture_dir = capture.path();
    Verifier v(c);
    const SourceText t("x.dfy", "method M() {}\n");
    try {
        v.verify(t);
        FAIL("expected ReplayMiss");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ReplayMiss);
        CHECK(std::string(e.what()).find(t.content_hash()) != std::string::npos);
    }
    CHECK(test::read(capture.path() / (t.content_hash() + ".dfy")) == t.content());
}

TEST_CASE("fixture write and reload round trip") {
    TempDir dir;
    const SourceText t("x.dfy", "method M() {\n  assert false;\n}\n");
    const VerificationResult r = result_from_output(
        t, "x.dfy(2,3): Error: assertion might not hold\n\nDafny program verifier finished with 0 verified, 1 error\n",
        "4.3.0", 0.5);
    write_fixture(dir.path(), t.content_hash(), r, false);
    Verifier v(replay_config(dir.path()));
    const VerificationResult back = v.verify(t);
    CHECK(back.status == r.status);
    CHECK(back.diagnostics == r.diagnostics);
    CHECK(back.raw_output == r.raw_output);
    CHECK(back.duration_s == doctest::Approx(0.5));
}

TEST_CASE("fixture naming a different hash is rejected") {
    TempDir dir;
    const SourceText t("x.dfy", "a\n");
    test::write(fixture_path(dir.path(), t.content_hash(), false),
                R"({"content_hash":"deadbeef","status":"Verified","diagnostics":[]})");
    Verifier v(replay_config(dir.path()));
    CHECK_THROWS_AS(v.verify(t), Error);
}

TEST_CASE("replay config requires an existing directory") {
    CHECK_THROWS_AS(Verifier(replay_config("/nonexistent/fixtures")), Error);
    VerifierConfig bad;
    bad.timeout_s = 0;
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("subprocess verifier against a fake dafny") {
    TempDir bin;
    const fs::path dafny = test::install_fake_dafny(bin.path());
    TempDir record;
    VerifierConfig c;
    c.executable = dafny;
    c.timeout_s = 10;
    c.record_dir = record.path();
    Verifier v(c);
    CHECK(v.version() == "4.3.0.0");
    CHECK(v.version_matches_expected());

    const SourceText good("good.dfy", "method M() {}\n");
    CHECK(v.verify(good).status == VerificationStatus::Verified);

    const SourceText bad("bad.dfy", "method M() {\n  assert false;\n}\n");
    const VerificationResult r = v.verify(bad);
    CHECK(r.status == VerificationStatus::Failed);
    REQUIRE(r.errors().size() == 1);
    CHECK(r.errors()[0].span.start_line == 2);
    CHECK(r.errors()[0].category == DiagnosticCategory::AssertionViolation);
    CHECK(r.verifier_version == "4.3.0.0");
    CHECK(fs::exists(fixture_path(record.path(), bad.content_hash(), false)));

    const VerificationResult res = v.resolve(bad);
    CHECK(res.status == VerificationStatus::Verified);
    CHECK(fs::exists(fixture_path(record.path(), bad.content_hash(), true)));

    const SourceText broken("p.dfy", "method M() {\n  parse error here\n}\n");
    const VerificationResult pr = v.resolve(broken);
    CHECK(pr.status == VerificationStatus::Failed);
    REQUIRE(pr.errors().size() == 1);
    CHECK(pr.errors()[0].category == DiagnosticCategory::SyntaxOrResolution);
}

TEST_CASE("subprocess timeout") {
    TempDir bin;
    VerifierConfig c;
    c.executable = test::install_fake_dafny(bin.path());
    c.timeout_s = 0.3;
    Verifier v(c);
    const auto t0 = std::chrono::steady_clock::now();
    const VerificationResult r = v.verify(SourceText("slow.dfy", "// SLEEP\n"));
    CHECK(r.status == VerificationStatus::Timeout);
    CHECK(std::chrono::steady_clock::now() - t0 < std::chrono::seconds(4));
}

TEST_CASE("missing executable") {
    VerifierConfig c;
    c.executable = "/nonexistent/dafny";
    Verifier v(c);
    try {
        v.verify(SourceText("a.dfy", ""));
        FAIL("expected VerifierNotFound");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::VerifierNotFound);
    }
}

TEST_CASE("version mismatch is detectable") {
    TempDir bin;
    VerifierConfig c;
    c.executable = test::install_fake_dafny(bin.path());
    c.expected_version = "4.8";
    Verifier v(c);
    CHECK_FALSE(v.version_matches_expected());
}
