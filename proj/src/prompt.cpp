#include "dafny_pilot/prompt.hpp"

#include <algorithm>
#include <array>
#include <cstdlib>
#include <set>

#include "dafny_pilot/error.hpp"
#include "dafny_pilot/marker.hpp"
#include "dafny_pilot/util.hpp"

namespace dafny_pilot {

namespace fs = std::filesystem;

namespace {

constexpr std::array<std::pair<TaskKind, std::string_view>, 5> kTaskNames = {{
    {TaskKind::LemmaInference, "LemmaInference"},
    {TaskKind::ProofInference, "ProofInference"},
    {TaskKind::Repair, "Repair"},
    {TaskKind::Explain, "Explain"},
    {TaskKind::Nl2Spec, "Nl2Spec"},
}};

constexpr std::array<std::pair<Placeholder, std::string_view>, 5> kPlaceholders = {{
    {Placeholder::AnnotatedSource, "ANNOTATED_SOURCE"},
    {Placeholder::Diagnostics, "DIAGNOSTICS"},
    {Placeholder::Exemplars, "EXEMPLARS"},
    {Placeholder::Feedback, "FEEDBACK"},
    {Placeholder::NlSpec, "NL_SPEC"},
}};

std::optional<Placeholder> placeholder_from_name(std::string_view name) {
    for (const auto& [p, n] : kPlaceholders) {
        if (n == name) return p;
    }
    return std::nullopt;
}

// Occurrences of "{NAME}" where NAME is uppercase letters and underscores.
struct PlaceholderUse {
    size_t offset;
    size_t length;
    std::string name;
};

std::vector<PlaceholderUse> find_placeholders(std::string_view s) {
    std::vector<PlaceholderUse> out;
    for (size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '{') continue;
        size_t j = i + 1;
        while (j < s.size() && (std::isupper(static_cast<unsigned char>(s[j])) || s[j] == '_')) ++j;
        if (j > i + 1 && j < s.size() && s[j] == '}') {
            out.push_back(PlaceholderUse{i, j + 1 - i, std::string(s.substr(i + 1, j - i - 1))});
            i = j;
        }
    }
    return out;
}

std::string render_exemplars(const PromptTemplate& tmpl, const std::vector<size_t>& active) {
    std::string out;
    for (size_t idx : active) {
        const Exemplar& e = tmpl.exemplars[idx];
        if (!out.empty()) out += "\n";
        out += "### Example: " + e.title + "\n```dafny\n" + e.text;
        if (!e.text.empty() && e.text.back() != '\n') out += "\n";
        out += "```\n";
    }
    return out;
}

std::string render_diagnostics(const std::vector<Diagnostic>& diags) {
    std::string out;
    for (const Diagnostic& d : diags) out += "- " + describe(d) + "\n";
    return out.empty() ? "(none)\n" : out;
}

std::string window_source(const std::string& source, std::optional<int> radius) {
    if (!radius) return source;
    const auto lines = split_lines(source);
    if (lines.empty()) return source;
    size_t marker = lines.size() / 2;
    for (size_t i = 0; i < lines.size(); ++i) {
        if (is_marker_line(lines[i])) {
            marker = i;
            break;
        }
    }
    const size_t r = static_cast<size_t>(std::max(*radius, 0));
    const size_t first = marker > r ? marker - r : 0;
    const size_t last = std::min(lines.size() - 1, marker + 1 + r);
    std::string out;
    if (first > 0) out += "// ... (" + std::to_string(first) + " lines omitted) ...\n";
    for (size_t i = first; i <= last; ++i) {
        out.append(lines[i]);
        out += "\n";
    }
    if (last + 1 < lines.size()) {
        out += "// ... (" + std::to_string(lines.size() - 1 - last) + " lines omitted) ...\n";
    }
    return out;
}

std::string strip_final_newline(std::string s) {
    while (!s.empty() && s.back() == '\n') s.pop_back();
    return s;
}

// Substitutes placeholders in one pass; a placeholder that is alone on its
// line and renders empty removes the line.
std::string substitute(const std::string& skeleton, const std::map<std::string, std::string>& values) {
    std::string out;
    size_t cursor = 0;
    for (const PlaceholderUse& use : find_placeholders(skeleton)) {
        const std::string& value = values.at(use.name);
        size_t start = use.offset;
        size_t end = use.offset + use.length;
        const size_t line_begin = skeleton.rfind('\n', start == 0 ? 0 : start - 1);
        const size_t ls = (line_begin == std::string::npos || start == 0) ? 0 : line_begin + 1;
        const size_t le = skeleton.find('\n', end);
        const bool alone = trim(std::string_view(skeleton).substr(ls, (le == std::string::npos ? skeleton.size() : le) - ls)) ==
                           std::string_view(skeleton).substr(use.offset, use.length);
        if (value.empty() && alone) {
            start = ls;
            end = le == std::string::npos ? skeleton.size() : le + 1;
            out.append(skeleton, cursor, start - cursor);
        } else {
            out.append(skeleton, cursor, start - cursor);
            out += strip_final_newline(value);
        }
        cursor = end;
    }
    out.append(skeleton, cursor, std::string::npos);
    return out;
}

RenderedPrompt render_with(const PromptTemplate& tmpl, const PromptContext& ctx, int round,
                           std::vector<size_t> active, std::optional<int> radius) {
    std::map<std::string, std::string> values;
    for (Placeholder p : tmpl.placeholders()) {
        const std::string name(placeholder_name(p));
        switch (p) {
            case Placeholder::AnnotatedSource:
                if (!ctx.annotated_source) {
                    throw Error(ErrorCode::MissingContextField, "annotated_source");
                }
                values[name] = window_source(*ctx.annotated_source, radius);
                break;
            case Placeholder::Diagnostics:
                values[name] = render_diagnostics(ctx.diagnostics);
                break;
            case Placeholder::Exemplars:
                values[name] = render_exemplars(tmpl, active);
                break;
            case Placeholder::Feedback:
                values[name] = ctx.feedback && round > 1 ? render_feedback(*ctx.feedback) : "";
                break;
            case Placeholder::NlSpec:
                if (!ctx.nl_spec) throw Error(ErrorCode::MissingContextField, "nl_spec");
                values[name] = *ctx.nl_spec;
                break;
        }
    }
    RenderedPrompt p;
    p.messages.push_back(Message{Role::System, tmpl.system_text});
    p.messages.push_back(Message{Role::User, substitute(tmpl.user_skeleton, values)});
    p.token_estimate = estimate_tokens(p.messages);
    p.task = tmpl.task;
    p.round = round;
    p.source_template = tmpl;
    p.context = ctx;
    p.active_exemplars = std::move(active);
    p.window_radius = radius;
    return p;
}

}  // namespace

std::string_view to_string(TaskKind t) {
    for (const auto& [k, n] : kTaskNames) {
        if (k == t) return n;
    }
    return "LemmaInference";
}

std::optional<TaskKind> task_from_string(std::string_view s) {
    for (const auto& [k, n] : kTaskNames) {
        if (n == s) return k;
    }
    return std::nullopt;
}

std::string_view placeholder_name(Placeholder p) {
    for (const auto& [k, n] : kPlaceholders) {
        if (k == p) return n;
    }
    return "";
}

std::string_view to_string(Role r) {
    switch (r) {
        case Role::System: return "system";
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
    }
    return "user";
}

std::vector<Placeholder> PromptTemplate::placeholders() const {
    std::vector<Placeholder> out;
    for (const PlaceholderUse& use : find_placeholders(user_skeleton)) {
        const auto p = placeholder_from_name(use.name);
        if (!p) throw Error(ErrorCode::TemplateError, "unknown placeholder {" + use.name + "}");
        if (std::find(out.begin(), out.end(), *p) == out.end()) out.push_back(*p);
    }
    return out;
}

void PromptTemplate::validate() const {
    (void)placeholders();
    std::set<int> priorities;
    for (const Exemplar& e : exemplars) {
        if (!priorities.insert(e.priority).second) {
            throw Error(ErrorCode::TemplateError,
                        "duplicate exemplar priority " + std::to_string(e.priority));
        }
    }
}

PromptTemplate parse_template(std::string_view file_text, const fs::path& base_dir) {
    const auto lines = split_lines(file_text);
    size_t i = 0;
    if (lines.empty() || trim(lines[0]) != "---") {
        throw Error(ErrorCode::TemplateError, "template must start with a '---' front-matter block");
    }
    PromptTemplate t;
    bool have_task = false;
    for (i = 1; i < lines.size() && trim(lines[i]) != "---"; ++i) {
        const std::string_view line = trim(lines[i]);
        if (line.empty() || line.front() == '#') continue;
        const size_t colon = line.find(':');
        if (colon == std::string_view::npos) {
            throw Error(ErrorCode::TemplateError, "bad front-matter line: " + std::string(line));
        }
        const std::string_view key = trim(line.substr(0, colon));
        const std::string_view value = trim(line.substr(colon + 1));
        if (key == "task") {
            const auto task = task_from_string(value);
            if (!task) throw Error(ErrorCode::TemplateError, "unknown task " + std::string(value));
            t.task = *task;
            have_task = true;
        } else if (key == "version") {
            t.version = std::string(value);
        } else if (key == "exemplar") {
            const size_t bar1 = value.find('|');
            const size_t bar2 = value.find('|', bar1 == std::string_view::npos ? 0 : bar1 + 1);
            if (bar1 == std::string_view::npos || bar2 == std::string_view::npos) {
                throw Error(ErrorCode::TemplateError, "exemplar needs '<priority> | <title> | <path>'");
            }
            Exemplar e;
            e.priority = std::stoi(std::string(trim(value.substr(0, bar1))));
            e.title = std::string(trim(value.substr(bar1 + 1, bar2 - bar1 - 1)));
            e.text = read_file(base_dir / std::string(trim(value.substr(bar2 + 1))));
            t.exemplars.push_back(std::move(e));
        }
        // Other keys (placeholders: ...) are informational.
    }
    if (i >= lines.size()) throw Error(ErrorCode::TemplateError, "unterminated front matter");
    if (!have_task) throw Error(ErrorCode::TemplateError, "front matter lacks 'task'");

    std::string* section = nullptr;
    std::string system;
    std::string user;
    for (++i; i < lines.size(); ++i) {
        const std::string_view line = lines[i];
        if (trim(line) == "[system]") {
            section = &system;
            continue;
        }
        if (trim(line) == "[user]") {
            section = &user;
            continue;
        }
        if (section == nullptr) {
            if (is_blank(line)) continue;
            throw Error(ErrorCode::TemplateError, "text before the first section");
        }
        section->append(line);
        section->push_back('\n');
    }
    t.system_text = strip_final_newline(system);
    t.user_skeleton = strip_final_newline(user);
    if (t.system_text.empty() || t.user_skeleton.empty()) {
        throw Error(ErrorCode::TemplateError, "template needs [system] and [user] sections");
    }
    t.validate();
    return t;
}

PromptTemplate load_template(const fs::path& path) {
    return parse_template(read_file(path), path.parent_path());
}

void TemplateSet::add(PromptTemplate t) {
    const TaskKind k = t.task;
    if (templates_.count(k) != 0) {
        throw Error(ErrorCode::TemplateError, "second template for task " + std::string(to_string(k)));
    }
    templates_.emplace(k, std::move(t));
}

const PromptTemplate& TemplateSet::get(TaskKind task) const {
    auto it = templates_.find(task);
    if (it == templates_.end()) {
        throw Error(ErrorCode::TemplateError, "no template for task " + std::string(to_string(task)));
    }
    return it->second;
}

TemplateSet TemplateSet::load_dir(const fs::path& dir) {
    TemplateSet set;
    std::set<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().extension() == ".tmpl") files.insert(e.path());
    }
    for (const fs::path& p : files) set.add(load_template(p));
    for (const auto& [k, name] : kTaskNames) {
        (void)set.get(k);
    }
    return set;
}

TemplateSet TemplateSet::builtin() { return load_dir(data_dir() / "templates"); }

fs::path data_dir() {
    if (const char* env = std::getenv("DAFNY_PILOT_DATA_DIR"); env != nullptr && *env != '\0') {
        return fs::path(env);
    }
    return fs::path(DAFNY_PILOT_DEFAULT_DATA_DIR);
}

size_t estimate_tokens(const std::vector<Message>& messages) {
    size_t bytes = 0;
    for (const Message& m : messages) bytes += m.content.size();
    return (bytes + 3) / 4;
}

RenderedPrompt render_prompt(const PromptTemplate& tmpl, const PromptContext& ctx, int round) {
    std::vector<size_t> all(tmpl.exemplars.size());
    for (size_t i = 0; i < all.size(); ++i) all[i] = i;
    return render_with(tmpl, ctx, round, std::move(all), std::nullopt);
}

RenderedPrompt fit_to_budget(const RenderedPrompt& prompt, size_t budget_tokens) {
    if (budget_tokens == 0) throw Error(ErrorCode::InvalidArgument, "budget_tokens must be > 0");
    if (prompt.token_estimate <= budget_tokens) return prompt;

    const PromptTemplate& tmpl = prompt.source_template;
    std::vector<size_t> active = prompt.active_exemplars;
    RenderedPrompt current = prompt;
    while (!active.empty()) {
        auto lowest = std::min_element(active.begin(), active.end(), [&](size_t a, size_t b) {
            return tmpl.exemplars[a].priority < tmpl.exemplars[b].priority;
        });
        active.erase(lowest);
        current = render_with(tmpl, prompt.context, prompt.round, active, prompt.window_radius);
        if (current.token_estimate <= budget_tokens) return current;
    }

    if (prompt.context.annotated_source) {
        const size_t lines = split_lines(*prompt.context.annotated_source).size();
        int hi = prompt.window_radius.value_or(static_cast<int>(lines));
        int lo = 0;
        // Largest radius that fits.
        std::optional<RenderedPrompt> best;
        while (lo <= hi) {
            const int mid = lo + (hi - lo) / 2;
            RenderedPrompt r = render_with(tmpl, prompt.context, prompt.round, active, mid);
            if (r.token_estimate <= budget_tokens) {
                best = std::move(r);
                lo = mid + 1;
            } else {
                hi = mid - 1;
            }
        }
        if (best) return *best;
    }
    throw Error(ErrorCode::CannotFit, "prompt needs at least " + std::to_string(current.token_estimate) +
                                          " tokens; budget is " + std::to_string(budget_tokens));
}

std::string render_feedback(const Feedback& fb) {
    std::string out = "Your previous attempt (round " + std::to_string(fb.previous_round) +
                      ") did not verify.\n";
    if (!fb.note.empty()) out += fb.note + "\n";
    if (!fb.previous_code.empty()) {
        out += "```dafny\n" + fb.previous_code;
        if (fb.previous_code.back() != '\n') out += "\n";
        out += "```\n";
    }
    if (!fb.diagnostics.empty()) {
        out += "The verifier reported:\n";
        for (const Diagnostic& d : fb.diagnostics) {
            out += marker_comment("line " + std::to_string(d.span.start_line) + ", column " +
                                  std::to_string(d.span.start_col) + ": " + marker_message(d)) +
                   "\n";
        }
    }
    return out;
}

nlohmann::json messages_to_json(const std::vector<Message>& messages) {
    nlohmann::json arr = nlohmann::json::array();
    for (const Message& m : messages) arr.push_back({{"role", to_string(m.role)}, {"content", m.content}});
    return arr;
}

}  // namespace dafny_pilot
