#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dafny_pilot/diagnostic.hpp"

namespace dafny_pilot {

enum class TaskKind { LemmaInference, ProofInference, Repair, Explain, Nl2Spec };

std::string_view to_string(TaskKind t);
std::optional<TaskKind> task_from_string(std::string_view s);

enum class Placeholder { AnnotatedSource, Diagnostics, Exemplars, Feedback, NlSpec };

std::string_view placeholder_name(Placeholder p);

struct Exemplar {
    std::string title;
    std::string text;
    int priority = 0;  // higher survives longer under budget pressure
};

struct PromptTemplate {
    TaskKind task = TaskKind::LemmaInference;
    std::string version;
    std::string system_text;
    std::string user_skeleton;
    std::vector<Exemplar> exemplars;

    /// Placeholders used by user_skeleton, in first-use order. Throws
    /// TemplateError for names outside the fixed set.
    std::vector<Placeholder> placeholders() const;
    /// Unknown placeholders or duplicate exemplar priorities throw TemplateError.
    void validate() const;
};

/// Template file: a front-matter block between "---" lines (task, version,
/// and "exemplar: <priority> | <title> | <relative path>" entries), then a
/// "[system]" section and a "[user]" section.
PromptTemplate parse_template(std::string_view file_text, const std::filesystem::path& base_dir);
PromptTemplate load_template(const std::filesystem::path& path);

/// One template per task kind.
class TemplateSet {
public:
    static TemplateSet load_dir(const std::filesystem::path& dir);
    /// Templates shipped under the data directory.
    static TemplateSet builtin();

    void add(PromptTemplate t);
    const PromptTemplate& get(TaskKind task) const;

private:
    std::map<TaskKind, PromptTemplate> templates_;
};

/// Directory holding templates/, exemplars/ and classification rules.
/// DAFNY_PILOT_DATA_DIR overrides the compiled-in location.
std::filesystem::path data_dir();

enum class Role { System, User, Assistant };
std::string_view to_string(Role r);

struct Message {
    Role role = Role::User;
    std::string content;

    friend bool operator==(const Message&, const Message&) = default;
};

struct Feedback {
    int previous_round = 1;
    std::string previous_code;
    std::vector<Diagnostic> diagnostics;
    std::string note;
};

struct PromptContext {
    std::optional<std::string> annotated_source;
    std::vector<Diagnostic> diagnostics;
    std::optional<Feedback> feedback;
    std::optional<std::string> nl_spec;
};

struct RenderedPrompt {
    std::vector<Message> messages;
    size_t token_estimate = 0;
    TaskKind task = TaskKind::LemmaInference;
    int round = 1;

    // Inputs kept so fit_to_budget can re-render.
    PromptTemplate source_template;
    PromptContext context;
    std::vector<size_t> active_exemplars;  // indices into source_template.exemplars
    std::optional<int> window_radius;      // lines kept around the marker
};

/// ceil(bytes / 4) over all message contents. A heuristic, not a tokenizer.
size_t estimate_tokens(const std::vector<Message>& messages);

/// Throws MissingContextField when the skeleton needs a context field that is
/// absent.
RenderedPrompt render_prompt(const PromptTemplate& tmpl, const PromptContext& ctx, int round = 1);

/// Drops exemplars lowest-priority first, then narrows the annotated source
/// around its marker line, until the estimate fits. Throws CannotFit.
RenderedPrompt fit_to_budget(const RenderedPrompt& prompt, size_t budget_tokens);

/// The {FEEDBACK} text for a previous round.
std::string render_feedback(const Feedback& fb);

nlohmann::json messages_to_json(const std::vector<Message>& messages);

}  // namespace dafny_pilot
