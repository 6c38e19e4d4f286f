#include "dafny_pilot/repair_loop.hpp"

#include <set>
#include <tuple>

#include "dafny_pilot/diff.hpp"
#include "dafny_pilot/error.hpp"
#include "dafny_pilot/heuristics.hpp"
#include "dafny_pilot/marker.hpp"

namespace dafny_pilot {

using nlohmann::json;

void LoopConfig::validate() const {
    if (max_rounds < 1) throw Error(ErrorCode::InvalidArgument, "max_rounds must be >= 1");
    if (candidates_per_round < 1) throw Error(ErrorCode::InvalidArgument, "candidates_per_round must be >= 1");
    if (verify_timeout_s <= 0) throw Error(ErrorCode::InvalidArgument, "verify timeout must be positive");
    if (budget_tokens == 0) throw Error(ErrorCode::InvalidArgument, "token budget must be positive");
    if (rewrite_threshold <= 0 || rewrite_threshold > 1) {
        throw Error(ErrorCode::InvalidArgument, "rewrite threshold must be in (0, 1]");
    }
}

int LoopConfig::enabled_heuristics() const {
    return int(enable_hint_commenting) + int(enable_witness_rewrite) + int(allow_axioms);
}

size_t score_attempts(const std::vector<Attempt>& attempts) {
    if (attempts.empty()) throw Error(ErrorCode::InvalidArgument, "no attempts to score");
    auto key = [](const Attempt& a) {
        return std::make_tuple(a.residual_errors, a.axioms_inserted, a.patch_size_bytes, a.round);
    };
    size_t best = 0;
    for (size_t i = 1; i < attempts.size(); ++i) {
        if (key(attempts[i]) < key(attempts[best])) best = i;
    }
    return best;
}

std::string_view to_string(OutcomeKind k) {
    switch (k) {
        case OutcomeKind::Success: return "Success";
        case OutcomeKind::Partial: return "Partial";
        case OutcomeKind::Failure: return "Failure";
    }
    return "Failure";
}

size_t Outcome::axioms_inserted() const {
    if (kind == OutcomeKind::Failure || !best) return 0;
    return attempts.at(*best).axioms_inserted;
}

json to_json(const Attempt& a) {
    json diags = json::array();
    for (const Diagnostic& d : a.result.errors()) diags.push_back(to_json(d));
    return json{{"round", a.round},
                {"candidate_kind", to_string(a.candidate.kind)},
                {"provenance", {{"source_id", a.candidate.provenance.source_id}, {"round", a.candidate.provenance.round}}},
                {"precheck", to_string(a.candidate.precheck.state)},
                {"heuristics_applied", a.heuristics_applied},
                {"status", to_string(a.result.status)},
                {"residual_errors", a.residual_errors},
                {"axioms_inserted", a.axioms_inserted},
                {"axiomatized", a.axiomatized},
                {"patch_size_bytes", a.patch_size_bytes},
                {"content_hash", a.text.content_hash()},
                {"errors", diags}};
}

json to_json(const Outcome& o) {
    json attempts = json::array();
    for (const Attempt& a : o.attempts) attempts.push_back(to_json(a));
    json j{{"outcome", to_string(o.kind)},
           {"reason", o.reason},
           {"rounds_used", o.stats.rounds_used},
           {"axioms_inserted", o.axioms_inserted()},
           {"initial_errors", o.initial_errors},
           {"llm_calls", o.stats.llm_calls},
           {"verifier_calls", o.stats.verifier_calls},
           {"precheck_calls", o.stats.precheck_calls},
           {"soundness_checks", o.stats.soundness_checks},
           {"final_hash", o.final_text.content_hash()},
           {"diff", unified_diff(o.original.content(), o.final_text.content(), "a/" + o.original.path(),
                                 "b/" + o.original.path())},
           {"attempts", attempts}};
    j["best"] = o.best ? json(*o.best) : json(nullptr);
    return j;
}

Feedback feedback_from_attempt(const Attempt& a, std::string note) {
    Feedback fb;
    fb.previous_round = a.round;
    fb.previous_code = a.text.content();
    fb.diagnostics = a.result.errors();
    fb.note = std::move(note);
    return fb;
}

Engine::Engine(Verifier& verifier, LlmClient& llm, TemplateSet templates, LoopConfig cfg, RunLog* log)
    : verifier_(verifier), llm_(llm), templates_(std::move(templates)), cfg_(cfg), log_(log) {
    cfg_.validate();
}

void Engine::log(int round, std::string_view action, std::string_view hash, json data) {
    if (log_ != nullptr) log_->append(round, action, hash, std::move(data));
}

VerificationResult Engine::verify(const SourceText& text, int round, std::string_view why) {
    ++stats_.verifier_calls;
    VerificationResult r = verifier_.verify(text);
    log(round, "verify", text.content_hash(),
        {{"purpose", why}, {"status", to_string(r.status)}, {"errors", r.error_count()}});
    return r;
}

Precheck Engine::precheck(const SourceText& text, int round) {
    ++stats_.precheck_calls;
    Precheck p = syntax_precheck(verifier_, text);
    log(round, "precheck", text.content_hash(),
        {{"state", to_string(p.state)}, {"errors", p.diagnostics.size()}});
    return p;
}

bool Engine::soundness_check(const SourceText& text) {
    ++stats_.soundness_checks;
    const VerificationResult r = verifier_.verify(text);
    log(0, "soundness_check", text.content_hash(), {{"status", to_string(r.status)}});
    return r.verified();
}

namespace {

/// Result stand-in for a text that did not pass the precheck: its syntax
/// errors are the residual errors.
VerificationResult failed_precheck_result(const Precheck& p) {
    VerificationResult r;
    r.status = VerificationStatus::Failed;
    r.diagnostics = p.diagnostics;
    if (r.diagnostics.empty()) {
        r.status = VerificationStatus::CrashedOrUnparsable;
    }
    return r;
}

std::vector<std::string> lemmas_with_errors(const SourceText& text, const std::vector<Diagnostic>& errors) {
    std::vector<std::string> names;
    std::set<std::string> seen;
    const std::vector<DeclarationInfo> decls = all_declarations(text);
    for (const Diagnostic& raw : errors) {
        const Diagnostic d = bind_to(raw, text);
        const DeclarationInfo* lemma = nullptr;
        for (const DeclarationInfo& decl : decls) {
            if (decl.kind == DeclarationKind::Lemma && decl.extent.contains(d.span)) lemma = &decl;
        }
        if (lemma != nullptr && seen.insert(lemma->name).second) names.push_back(lemma->name);
    }
    return names;
}

size_t residual(const VerificationResult& r) {
    const size_t n = r.error_count();
    // A run that produced no usable diagnostics still counts as failing.
    return r.verified() ? 0 : std::max<size_t>(n, 1);
}

}  // namespace

Attempt Engine::evaluate_candidate(const SourceText& original, Candidate candidate, int round) {
    Attempt a;
    a.round = round;
    SourceText text = apply_patch(original, candidate.patch);
    log(round, "apply", text.content_hash(),
        {{"candidate_kind", to_string(candidate.kind)}, {"patch_bytes", candidate.patch.size_bytes()}});

    bool ran_full_verify = false;
    auto check = [&](const SourceText& t) {
        const Precheck p = precheck(t, round);
        if (p.state != PrecheckState::Passed) {
            ran_full_verify = false;
            return std::make_pair(p, failed_precheck_result(p));
        }
        ran_full_verify = true;
        return std::make_pair(p, verify(t, round, "candidate"));
    };

    auto [first_precheck, result] = check(text);
    candidate.precheck = first_precheck;

    auto apply_heuristic = [&](const char* name, SourceText next) {
        a.heuristics_applied.emplace_back(name);
        log(round, "heuristic", next.content_hash(), {{"name", name}});
        text = std::move(next);
        result = check(text).second;
    };

    if (!result.verified() && cfg_.enable_hint_commenting) {
        HeuristicResult h = comment_failing_hints(text, result.errors());
        if (h.changed) apply_heuristic(kCommentFailingHints, std::move(h.text));
    }
    if (!result.verified() && cfg_.enable_witness_rewrite) {
        HeuristicResult h = rewrite_witness_bindings_everywhere(text);
        if (h.changed) apply_heuristic(kRewriteWitnessBindings, std::move(h.text));
    }
    if (!result.verified() && cfg_.allow_axioms && ran_full_verify) {
        const std::vector<std::string> names = lemmas_with_errors(text, result.errors());
        SourceText next = text;
        for (const std::string& n : names) next = axiomatize(next, n);
        if (next.content_hash() != text.content_hash()) {
            a.axiomatized = names;
            apply_heuristic(kAxiomatize, std::move(next));
        }
    }

    a.candidate = std::move(candidate);
    a.result = std::move(result);
    a.residual_errors = residual(a.result);
    a.axioms_inserted = a.axiomatized.size();
    a.patch_size_bytes = line_diff_patch(original, text.content()).size_bytes();
    a.text = std::move(text);
    log(round, "attempt", a.text.content_hash(),
        {{"status", to_string(a.result.status)},
         {"residual_errors", a.residual_errors},
         {"axioms_inserted", a.axioms_inserted},
         {"heuristics_applied", a.heuristics_applied}});
    return a;
}

Outcome Engine::run_task(TaskKind task, const SourceText& text, const std::optional<Diagnostic>& target_in) {
    if (task != TaskKind::LemmaInference && task != TaskKind::ProofInference && task != TaskKind::Repair) {
        throw Error(ErrorCode::InvalidArgument, std::string(to_string(task)) + " is a text task");
    }
    const PromptTemplate& tmpl = templates_.get(task);

    Outcome out;
    out.original = text;
    out.final_text = text;
    log(0, "start", text.content_hash(), {{"task", to_string(task)}, {"path", text.path()}});

    const VerificationResult initial = verify(text, 0, "initial");
    const auto finish = [&](Outcome& o) -> Outcome& {
        o.stats = stats_;
        log(o.stats.rounds_used, "outcome", o.final_text.content_hash(),
            {{"outcome", to_string(o.kind)}, {"reason", o.reason}, {"llm_calls", o.stats.llm_calls}});
        return o;
    };
    if (initial.verified()) {
        out.kind = OutcomeKind::Success;
        out.patch = make_patch(text, {});
        out.reason = "already verified";
        return finish(out);
    }

    const std::vector<Diagnostic> errors = initial.errors();
    out.initial_errors = residual(initial);
    std::optional<Diagnostic> target;
    if (target_in) {
        target = bind_to(*target_in, text);
    } else if (!errors.empty()) {
        target = errors.front();
    }
    if (!target) {
        out.kind = OutcomeKind::Failure;
        out.reason = "verifier status " + std::string(to_string(initial.status)) + " without diagnostics";
        return finish(out);
    }

    const SourceText annotated = insert_error_marker(text, *target);
    PromptContext ctx;
    ctx.annotated_source = annotated.content();
    ctx.diagnostics = errors;

    std::string no_code_reason;
    for (int round = 1; round <= cfg_.max_rounds; ++round) {
        stats_.rounds_used = round;
        if (round > 1 && !out.attempts.empty()) {
            // Feed back the best attempt of the previous round.
            std::vector<Attempt> prev;
            for (const Attempt& a : out.attempts) {
                if (a.round == round - 1) prev.push_back(a);
            }
            if (!prev.empty()) ctx.feedback = feedback_from_attempt(prev[score_attempts(prev)]);
        }

        RenderedPrompt prompt;
        try {
            prompt = fit_to_budget(render_prompt(tmpl, ctx, round), cfg_.budget_tokens);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::CannotFit) throw Error(ErrorCode::BudgetExhausted, e.what());
            throw;
        }
        log(round, "prompt", annotated.content_hash(),
            {{"task", to_string(task)},
             {"token_estimate", prompt.token_estimate},
             {"messages", messages_to_json(prompt.messages)}});

        for (int c = 0; c < cfg_.candidates_per_round; ++c) {
            ++stats_.llm_calls;
            const CompletionResponse response = llm_.complete(prompt);
            log(round, "llm_call", annotated.content_hash(),
                {{"source_id", response.provenance.source_id},
                 {"finish_reason", to_string(response.finish_reason)}});

            std::vector<Candidate> cands;
            try {
                cands = candidates_from_response(text, response, &*target, cfg_.rewrite_threshold);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::NoCodeFound && e.code() != ErrorCode::UnplaceableSnippet) throw;
                no_code_reason = e.what();
                log(round, "no_candidate", annotated.content_hash(), {{"reason", e.what()}});
                continue;
            }
            if (cands.empty()) {
                no_code_reason = "the suggestion does not change the file";
                log(round, "no_candidate", annotated.content_hash(), {{"reason", no_code_reason}});
                continue;
            }
            Candidate merged = merge_candidates(text, cands);
            log(round, "candidate", text.content_hash(),
                {{"kind", to_string(merged.kind)}, {"edits", merged.patch.edits.size()}});

            out.attempts.push_back(evaluate_candidate(text, std::move(merged), round));
            const Attempt& a = out.attempts.back();
            if (a.result.verified() && soundness_check(a.text)) {
                out.kind = OutcomeKind::Success;
                out.best = out.attempts.size() - 1;
                out.final_text = a.text;
                out.patch = line_diff_patch(text, a.text.content());
                out.reason.clear();
                stats_.rounds_used = round;
                return finish(out);
            }
        }
    }

    if (out.attempts.empty()) {
        out.kind = OutcomeKind::Failure;
        out.reason = no_code_reason.empty() ? "no candidates were produced" : no_code_reason;
        out.patch = make_patch(text, {});
        return finish(out);
    }
    out.best = score_attempts(out.attempts);
    const Attempt& best = out.attempts[*out.best];
    if (best.residual_errors < out.initial_errors) {
        out.kind = OutcomeKind::Partial;
        out.final_text = best.text;
        out.patch = line_diff_patch(text, best.text.content());
        out.reason = std::to_string(best.residual_errors) + " of " + std::to_string(out.initial_errors) +
                     " errors remain after " + std::to_string(stats_.rounds_used) + " rounds";
    } else {
        out.kind = OutcomeKind::Failure;
        out.patch = make_patch(text, {});
        out.reason = "no attempt reduced the error count (" + std::to_string(out.initial_errors) + ")";
    }
    return finish(out);
}

std::string Engine::run_text_task(TaskKind task, const TextTaskInput& input) {
    const PromptTemplate& tmpl = templates_.get(task);
    PromptContext ctx;
    if (task == TaskKind::Explain) {
        if (!input.source || !input.diagnostic) {
            throw Error(ErrorCode::MissingContextField, "explain needs a source file and a diagnostic");
        }
        const Diagnostic d = bind_to(*input.diagnostic, *input.source);
        ctx.annotated_source = insert_error_marker(*input.source, d).content();
        ctx.diagnostics = {d};
    } else if (task == TaskKind::Nl2Spec) {
        if (!input.nl_spec) throw Error(ErrorCode::MissingContextField, "nl_spec");
        ctx.nl_spec = *input.nl_spec;
    } else {
        throw Error(ErrorCode::InvalidArgument, std::string(to_string(task)) + " is not a text task");
    }

    RenderedPrompt prompt;
    try {
        prompt = fit_to_budget(render_prompt(tmpl, ctx, 1), cfg_.budget_tokens);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::CannotFit) throw Error(ErrorCode::BudgetExhausted, e.what());
        throw;
    }
    log(1, "prompt", "", {{"task", to_string(task)}, {"messages", messages_to_json(prompt.messages)}});
    ++stats_.llm_calls;
    const CompletionResponse response = llm_.complete(prompt);
    log(1, "llm_call", "", {{"source_id", response.provenance.source_id}});

    if (task == TaskKind::Explain) return response.text;

    const std::vector<std::string_view> snippets = extract_code_blocks(response.text);
    if (snippets.empty()) throw Error(ErrorCode::NoCodeFound, "the response contains no code");
    std::string code(snippets.front());
    if (code.empty() || code.back() != '\n') code += '\n';
    const Precheck p = precheck(SourceText("<nl2spec>", code), 1);
    if (p.state != PrecheckState::Passed) {
        std::string msg = "the translated declaration does not resolve";
        if (!p.diagnostics.empty()) msg += ": " + describe(p.diagnostics.front());
        throw Error(ErrorCode::PrecheckFailed, msg);
    }
    return code;
}

}  // namespace dafny_pilot
