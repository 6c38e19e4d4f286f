// dafny-pilot-author: turns captured replay misses into corpus files.
//
//   hash FILE                         content hash used as the fixture key
//   fixture TEXT RAW --out DIR        verifier output RAW for TEXT -> <hash>.json
//   cassette REQUEST RESPONSE --out DIR
//                                     append RESPONSE (model text) to the
//                                     cassette of a captured <key>.request.json

#include <CLI11.hpp>

#include <iostream>

#include "dafny_pilot/error.hpp"
#include "dafny_pilot/llm.hpp"
#include "dafny_pilot/util.hpp"
#include "dafny_pilot/verifier.hpp"

namespace dp = dafny_pilot;

int main(int argc, char** argv) {
    CLI::App app{"Authoring helper for replay fixtures and cassettes", "dafny-pilot-author"};
    app.require_subcommand(1);

    std::string file;
    CLI::App* hash = app.add_subcommand("hash", "Print the content hash of a Dafny file");
    hash->add_option("file", file)->required()->check(CLI::ExistingFile);

    std::string raw;
    std::string out;
    bool resolve_only = false;
    std::string version = "4.3.0";
    double duration = 0.0;
    CLI::App* fixture = app.add_subcommand("fixture", "Write a verifier replay fixture");
    fixture->add_option("text", file)->required()->check(CLI::ExistingFile);
    fixture->add_option("raw", raw, "File with the verifier's output")->required()->check(CLI::ExistingFile);
    fixture->add_option("--out", out)->required();
    fixture->add_flag("--resolve", resolve_only, "Fixture for a resolution-only run");
    fixture->add_option("--version", version);
    fixture->add_option("--duration", duration);

    std::string request;
    std::string response;
    std::string finish = "stop";
    CLI::App* cassette = app.add_subcommand("cassette", "Append a response to a cassette");
    cassette->add_option("request", request, "Captured <key>.request.json")->required()->check(CLI::ExistingFile);
    cassette->add_option("response", response, "File with the model's reply")->required()->check(CLI::ExistingFile);
    cassette->add_option("--out", out)->required();
    cassette->add_option("--finish", finish)->check(CLI::IsMember({"stop", "length", "other"}));

    CLI11_PARSE(app, argc, argv);
    try {
        if (hash->parsed()) {
            std::cout << dp::SourceText::load(file).content_hash() << "\n";
        } else if (fixture->parsed()) {
            const dp::SourceText text = dp::SourceText::load(file);
            const dp::VerificationResult r = dp::result_from_output(text, dp::read_file(raw), version, duration);
            dp::write_fixture(out, text.content_hash(), r, resolve_only);
            std::cout << dp::fixture_path(out, text.content_hash(), resolve_only).string() << " "
                      << dp::to_string(r.status) << " " << r.error_count() << " error(s)\n";
        } else if (cassette->parsed()) {
            const nlohmann::json snap = nlohmann::json::parse(dp::read_file(request));
            const std::string key = dp::sha256_hex(snap.dump());
            const auto path = dp::cassette_path(out, key);
            dp::Cassette c;
            if (std::filesystem::exists(path)) {
                c = dp::Cassette::load(path);
            } else {
                c.key = key;
                c.request_snapshot = snap;
            }
            dp::CompletionResponse r;
            r.text = dp::read_file(response);
            r.finish_reason = dp::finish_reason_from_string(finish);
            r.provenance.source_id = key + "#" + std::to_string(c.responses.size());
            c.responses.push_back(r);
            c.save(path, "OPENAI_API_KEY");
            std::cout << path.string() << " (" << c.responses.size() << " response(s))\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
