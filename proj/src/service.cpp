#include "dafny_pilot/service.hpp"

#include <httplib.h>

#include <random>
#include <regex>

#include "dafny_pilot/diff.hpp"
#include "dafny_pilot/error.hpp"
#include "dafny_pilot/marker.hpp"
#include "dafny_pilot/repair_loop.hpp"
#include "dafny_pilot/util.hpp"

namespace dafny_pilot {

using nlohmann::json;

struct IssuedCandidate {
    size_t index = 0;
    int round = 1;
    Attempt attempt;
    Patch patch;  // session text at issue time -> attempt text
    std::string diff;
    std::string display_code;
    std::string state = "pending";  // pending | accepted | rejected | stale
};

struct Session {
    std::string id;
    TaskKind task = TaskKind::LemmaInference;
    EngineSettings settings;
    SourceText current;
    VerificationResult last;
    std::vector<IssuedCandidate> candidates;
    int round = 0;
    std::optional<Feedback> feedback;

    RunLog events;
    std::unique_ptr<Verifier> verifier;
    std::unique_ptr<LlmClient> llm;
    std::unique_ptr<Engine> engine;
    std::mutex mu;  // held by the one mutating request
};

struct Service::Server {
    httplib::Server http;
};

namespace {

ServiceReply error_reply(int status, std::string_view message) {
    return {status, json{{"error", message}}};
}

std::string new_session_id() {
    static std::mutex mu;
    static std::mt19937_64 rng{std::random_device{}()};
    std::lock_guard lock(mu);
    char buf[33];
    std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(rng()),
                  static_cast<unsigned long long>(rng()));
    return buf;
}

std::optional<TaskKind> parse_task(const std::string& s) {
    if (auto t = task_from_string(s)) return t;
    static const std::map<std::string, TaskKind> aliases = {
        {"lemmas", TaskKind::LemmaInference}, {"prove", TaskKind::ProofInference}, {"fix", TaskKind::Repair}};
    const auto it = aliases.find(to_lower(s));
    if (it == aliases.end()) return std::nullopt;
    return it->second;
}

json diagnostics_json(const std::vector<Diagnostic>& diags) {
    json out = json::array();
    for (const Diagnostic& d : diags) out.push_back(to_json(d));
    return out;
}

json candidate_json(const IssuedCandidate& c) {
    return json{{"index", c.index},
                {"kind", to_string(c.attempt.candidate.kind)},
                {"display_code", c.display_code},
                {"diff", c.diff},
                {"round", c.round},
                {"state", c.state},
                {"status", to_string(c.attempt.result.status)},
                {"residual_errors", c.attempt.residual_errors},
                {"axioms_inserted", c.attempt.axioms_inserted},
                {"heuristics_applied", c.attempt.heuristics_applied}};
}

int status_for(const Error& e) {
    switch (e.code()) {
        case ErrorCode::MissingContextField:
        case ErrorCode::InvalidArgument:
        case ErrorCode::BudgetExhausted:
        case ErrorCode::SpanOutOfRange: return 422;
        case ErrorCode::StaleBase:
        case ErrorCode::OverlappingEdits: return 409;
        case ErrorCode::ReplayMiss:
        case ErrorCode::NetworkError:
        case ErrorCode::ProviderError:
        case ErrorCode::AuthMissing:
        case ErrorCode::VerifierNotFound: return 502;
        default: return 500;
    }
}

}  // namespace

Service::Service(ServiceConfig cfg) : cfg_(std::move(cfg)), server_(std::make_unique<Server>()) { setup_routes(); }

Service::~Service() { stop(); }

void Service::setup_routes() {
    auto forward = [this](const httplib::Request& req, httplib::Response& res) {
        std::map<std::string, std::string> query;
        for (const auto& [k, v] : req.params) query[k] = v;
        const ServiceReply r = handle(req.method, req.path, req.body, query);
        res.status = r.status;
        res.set_content(r.body.dump(), "application/json");
    };
    auto& http = server_->http;
    http.Get(R"(/v1/.*)", forward);
    http.Post(R"(/v1/.*)", forward);
    if (!cfg_.ui_dir.empty()) {
        http.set_mount_point("/ui", cfg_.ui_dir.string());
        http.Get("/ui", [](const httplib::Request&, httplib::Response& res) { res.set_redirect("/ui/"); });
    }
}

int Service::start() {
    auto& http = server_->http;
    port_ = cfg_.port == 0 ? http.bind_to_any_port(cfg_.host) : (http.bind_to_port(cfg_.host, cfg_.port) ? cfg_.port : -1);
    if (port_ < 0) throw Error(ErrorCode::Io, "cannot bind " + cfg_.host + ":" + std::to_string(cfg_.port));
    thread_ = std::thread([this] { server_->http.listen_after_bind(); });
    server_->http.wait_until_ready();
    return port_;
}

void Service::run() {
    auto& http = server_->http;
    port_ = cfg_.port == 0 ? http.bind_to_any_port(cfg_.host) : (http.bind_to_port(cfg_.host, cfg_.port) ? cfg_.port : -1);
    if (port_ < 0) throw Error(ErrorCode::Io, "cannot bind " + cfg_.host + ":" + std::to_string(cfg_.port));
    http.listen_after_bind();
}

void Service::stop() {
    if (server_) server_->http.stop();
    if (thread_.joinable()) thread_.join();
}

std::shared_ptr<Session> Service::find(const std::string& id) {
    std::lock_guard lock(sessions_mu_);
    const auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
}

ServiceReply Service::handle(const std::string& method, const std::string& path, const std::string& body,
                             const std::map<std::string, std::string>& query) {
    static const std::regex session_re(R"(^/v1/sessions/([0-9a-f]+)/(suggest|verify|events)$)");
    static const std::regex decide_re(R"(^/v1/sessions/([0-9a-f]+)/candidates/([^/]+)/(accept|reject)$)");
    try {
        if (path == "/v1/health") {
            if (method != "GET") return error_reply(405, "method not allowed");
            return health();
        }
        if (path == "/v1/sessions") {
            if (method != "POST") return error_reply(405, "method not allowed");
            return create_session(body);
        }
        std::smatch m;
        if (std::regex_match(path, m, session_re)) {
            const std::string op = m[2].str();
            const auto s = find(m[1].str());
            if (!s) return error_reply(404, "unknown session");
            if (op == "events") {
                if (method != "GET") return error_reply(405, "method not allowed");
                return events(*s, query);
            }
            if (method != "POST") return error_reply(405, "method not allowed");
            std::unique_lock lock(s->mu, std::try_to_lock);
            if (!lock.owns_lock()) return error_reply(409, "the session is busy with another request");
            return op == "suggest" ? suggest(*s) : verify(*s);
        }
        if (std::regex_match(path, m, decide_re)) {
            if (method != "POST") return error_reply(405, "method not allowed");
            const auto s = find(m[1].str());
            if (!s) return error_reply(404, "unknown session");
            std::unique_lock lock(s->mu, std::try_to_lock);
            if (!lock.owns_lock()) return error_reply(409, "the session is busy with another request");
            return decide(*s, m[2].str(), m[3].str() == "accept");
        }
        return error_reply(404, "no such endpoint");
    } catch (const Error& e) {
        return {status_for(e), json{{"error", e.what()}, {"code", to_string(e.code())}}};
    } catch (const std::exception& e) {
        return error_reply(500, e.what());
    }
}

ServiceReply Service::health() {
    return {200, json{{"status", "ok"},
                      {"engine_version", DAFNY_PILOT_VERSION},
                      {"model_id", cfg_.settings.provider.model_id},
                      {"verifier_mode", cfg_.settings.verifier.mode == VerifierMode::Replay ? "replay" : "subprocess"}}};
}

ServiceReply Service::create_session(const std::string& body) {
    const json req = json::parse(body, nullptr, false);
    if (req.is_discarded() || !req.is_object()) return error_reply(422, "body must be a JSON object");
    if (!req.contains("source") || !req.at("source").is_string()) return error_reply(422, "'source' must be a string");
    const std::string task_name = req.value("task", std::string("LemmaInference"));
    const auto task = parse_task(task_name);
    if (!task || *task == TaskKind::Explain || *task == TaskKind::Nl2Spec) {
        return error_reply(422, "'task' must be LemmaInference, ProofInference or Repair");
    }
    const std::string path = req.contains("path") && req.at("path").is_string() ? req.at("path").get<std::string>()
                                                                                 : std::string("source.dfy");

    auto s = std::make_shared<Session>();
    s->id = new_session_id();
    s->task = *task;
    s->settings = cfg_.settings;
    if (req.contains("options")) {
        const json& o = req.at("options");
        if (!o.is_object()) return error_reply(422, "'options' must be an object");
        KeyValues kv;
        for (const auto& [k, v] : o.items()) kv[k] = v.is_string() ? v.get<std::string>() : v.dump();
        try {
            apply_settings(s->settings, kv);
            s->settings.loop.validate();
        } catch (const Error& e) {
            return error_reply(422, e.what());
        }
    }
    std::string source = req.at("source").get<std::string>();
    // Same normalization as loading a file.
    for (size_t p = source.find("\r\n"); p != std::string::npos; p = source.find("\r\n", p)) source.erase(p, 1);
    s->current = SourceText(path, std::move(source));

    s->verifier = std::make_unique<Verifier>(s->settings.verifier);
    s->llm = std::make_unique<LlmClient>(s->settings.provider);
    s->engine = std::make_unique<Engine>(*s->verifier, *s->llm, TemplateSet::builtin(), s->settings.loop, &s->events);

    s->events.append(0, "session_created", s->current.content_hash(), {{"task", to_string(s->task)}});
    s->last = s->verifier->verify(s->current);
    s->events.append(0, "verify", s->current.content_hash(),
                     {{"status", to_string(s->last.status)}, {"errors", s->last.error_count()}});
    {
        std::lock_guard lock(sessions_mu_);
        sessions_[s->id] = s;
    }
    return {200, json{{"id", s->id},
                      {"status", to_string(s->last.status)},
                      {"diagnostics", diagnostics_json(s->last.errors())}}};
}

ServiceReply Service::suggest(Session& s) {
    const int round = s.round + 1;
    if (s.last.verified()) {
        s.events.append(round, "suggest_skipped", s.current.content_hash(), {{"reason", "already verified"}});
        return {200, json{{"round", s.round}, {"candidates", json::array()}, {"note", "the program already verifies"}}};
    }
    const std::vector<Diagnostic> errors = s.last.errors();
    if (errors.empty()) return error_reply(422, "the verifier reported no diagnostic to work on");
    const Diagnostic& target = errors.front();
    const SourceText annotated = insert_error_marker(s.current, target);

    PromptContext ctx;
    ctx.annotated_source = annotated.content();
    ctx.diagnostics = errors;
    ctx.feedback = s.feedback;
    RenderedPrompt prompt;
    try {
        prompt = fit_to_budget(render_prompt(TemplateSet::builtin().get(s.task), ctx, round),
                               s.settings.loop.budget_tokens);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::CannotFit) throw Error(ErrorCode::BudgetExhausted, e.what());
        throw;
    }
    s.round = round;
    s.events.append(round, "prompt", annotated.content_hash(),
                    {{"token_estimate", prompt.token_estimate}, {"messages", messages_to_json(prompt.messages)}});

    json issued = json::array();
    std::string note;
    for (int c = 0; c < s.settings.loop.candidates_per_round; ++c) {
        const CompletionResponse response = s.llm->complete(prompt);
        s.events.append(round, "llm_call", annotated.content_hash(), {{"source_id", response.provenance.source_id}});
        std::vector<Candidate> cands;
        try {
            cands = candidates_from_response(s.current, response, &target, s.settings.loop.rewrite_threshold);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NoCodeFound && e.code() != ErrorCode::UnplaceableSnippet) throw;
            note = e.what();
            s.events.append(round, "no_candidate", annotated.content_hash(), {{"reason", note}});
            continue;
        }
        if (cands.empty()) {
            note = "the suggestion does not change the file";
            continue;
        }
        Attempt a = s.engine->evaluate_candidate(s.current, merge_candidates(s.current, cands), round);
        IssuedCandidate ic;
        ic.index = s.candidates.size();
        ic.round = round;
        ic.patch = line_diff_patch(s.current, a.text.content());
        ic.diff = unified_diff(s.current.content(), a.text.content(), "a/" + s.current.path(), "b/" + s.current.path());
        for (const Edit& e : ic.patch.edits) {
            if (e.replacement.empty()) continue;
            if (!ic.display_code.empty()) ic.display_code += "\n";
            ic.display_code += e.replacement;
        }
        ic.attempt = std::move(a);
        s.events.append(round, "candidate_issued", ic.attempt.text.content_hash(),
                        {{"index", ic.index}, {"kind", to_string(ic.attempt.candidate.kind)}});
        issued.push_back(candidate_json(ic));
        s.candidates.push_back(std::move(ic));
    }
    json out{{"round", round}, {"candidates", issued}};
    if (!note.empty()) out["note"] = note;
    return {200, out};
}

ServiceReply Service::decide(Session& s, const std::string& index_text, bool accept) {
    size_t index = 0;
    try {
        size_t used = 0;
        const long long v = std::stoll(index_text, &used);
        if (used != index_text.size() || v < 0) return error_reply(422, "candidate index must be a non-negative integer");
        index = static_cast<size_t>(v);
    } catch (const std::exception&) {
        return error_reply(422, "candidate index must be a non-negative integer");
    }
    if (index >= s.candidates.size()) return error_reply(404, "unknown candidate");
    IssuedCandidate& c = s.candidates[index];
    if (c.state != "pending" || c.patch.base_hash != s.current.content_hash()) {
        return error_reply(409, "candidate " + std::to_string(index) + " is " +
                                    (c.state == "pending" ? std::string("stale") : c.state));
    }
    if (!accept) {
        c.state = "rejected";
        s.feedback = feedback_from_attempt(c.attempt, "The developer rejected this suggestion.");
        s.events.append(s.round, "reject", s.current.content_hash(), {{"index", index}});
        return {200, json{{"index", index}, {"state", c.state}}};
    }

    s.current = apply_patch(s.current, c.patch);
    c.state = "accepted";
    for (IssuedCandidate& other : s.candidates) {
        if (other.state == "pending") other.state = "stale";
    }
    s.feedback.reset();
    s.events.append(s.round, "accept", s.current.content_hash(), {{"index", index}});
    s.last = s.verifier->verify(s.current);
    s.events.append(s.round, "verify", s.current.content_hash(),
                    {{"status", to_string(s.last.status)}, {"errors", s.last.error_count()}});
    return {200, json{{"index", index},
                      {"state", c.state},
                      {"status", to_string(s.last.status)},
                      {"content_hash", s.current.content_hash()},
                      {"source", s.current.content()},
                      {"diagnostics", diagnostics_json(s.last.errors())}}};
}

ServiceReply Service::verify(Session& s) {
    s.last = s.verifier->verify(s.current);
    s.events.append(s.round, "verify", s.current.content_hash(),
                    {{"status", to_string(s.last.status)}, {"errors", s.last.error_count()}});
    json j = to_json(s.last);
    j["diagnostics"] = diagnostics_json(s.last.errors());
    return {200, j};
}

ServiceReply Service::events(Session& s, const std::map<std::string, std::string>& query) {
    uint64_t since = 0;
    if (const auto it = query.find("since"); it != query.end()) {
        try {
            size_t used = 0;
            const long long v = std::stoll(it->second, &used);
            if (used != it->second.size() || v < 0) return error_reply(422, "'since' must be a non-negative integer");
            since = static_cast<uint64_t>(v);
        } catch (const std::exception&) {
            return error_reply(422, "'since' must be a non-negative integer");
        }
    }
    return {200, json{{"events", s.events.since(since)}, {"last_seq", s.events.last_seq()}}};
}

}  // namespace dafny_pilot
