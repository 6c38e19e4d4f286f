#include "dafny_pilot/diagnostic.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <utility>

#include "dafny_pilot/error.hpp"

namespace dafny_pilot {

namespace {
constexpr std::array<std::pair<DiagnosticCategory, std::string_view>, 8> kCategoryNames = {{
    {DiagnosticCategory::InvariantNotMaintained, "InvariantNotMaintained"},
    {DiagnosticCategory::InvariantOnEntry, "InvariantOnEntry"},
    {DiagnosticCategory::PostconditionViolation, "PostconditionViolation"},
    {DiagnosticCategory::PreconditionViolation, "PreconditionViolation"},
    {DiagnosticCategory::AssertionViolation, "AssertionViolation"},
    {DiagnosticCategory::TerminationFailure, "TerminationFailure"},
    {DiagnosticCategory::SyntaxOrResolution, "SyntaxOrResolution"},
    {DiagnosticCategory::Other, "Other"},
}};

std::string flatten_newlines(std::string_view s) {
    std::string out;
    for (size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\r') continue;
        if (s[i] == '\n') {
            out += "; ";
        } else {
            out.push_back(s[i]);
        }
    }
    return out;
}
}  // namespace

std::string_view to_string(Severity s) { return s == Severity::Error ? "error" : "warning"; }

std::string_view to_string(DiagnosticCategory c) {
    for (const auto& [cat, name] : kCategoryNames) {
        if (cat == c) return name;
    }
    return "Other";
}

std::optional<DiagnosticCategory> category_from_string(std::string_view s) {
    for (const auto& [cat, name] : kCategoryNames) {
        if (name == s) return cat;
    }
    return std::nullopt;
}

std::string marker_message(const Diagnostic& diag) {
    std::string out;
    for (const RelatedInfo& r : diag.related) {
        if (r.kind != RelatedKind::Message) continue;
        out += r.message;
        out += ". ";
    }
    std::string main = diag.message;
    if (!out.empty() && !main.empty()) {
        main[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(main[0])));
    }
    out += main;
    return flatten_newlines(out);
}

std::string describe(const Diagnostic& diag) {
    return "line " + std::to_string(diag.span.start_line) + ", column " +
           std::to_string(diag.span.start_col) + ": " + marker_message(diag) + " [" +
           std::string(to_string(diag.category)) + "]";
}

Diagnostic bind_to(const Diagnostic& diag, const SourceText& text) {
    Diagnostic out = diag;
    const Span& s = diag.span;
    out.span = text.bind(s.start_line, s.start_col, s.end_line, s.end_col);
    for (RelatedInfo& r : out.related) {
        r.span = text.bind(r.span.start_line, r.span.start_col, r.span.end_line, r.span.end_col);
    }
    return out;
}

std::vector<Diagnostic> errors_by_position(const std::vector<Diagnostic>& diags) {
    std::vector<Diagnostic> out;
    for (const Diagnostic& d : diags) {
        if (d.is_error()) out.push_back(d);
    }
    std::stable_sort(out.begin(), out.end(), [](const Diagnostic& a, const Diagnostic& b) {
        return std::pair(a.span.start_line, a.span.start_col) <
               std::pair(b.span.start_line, b.span.start_col);
    });
    return out;
}

nlohmann::json to_json(const Span& s) {
    return nlohmann::json{{"start_line", s.start_line}, {"start_col", s.start_col},
                          {"end_line", s.end_line},     {"end_col", s.end_col},
                          {"start_off", s.start_off},   {"end_off", s.end_off}};
}

Span span_from_json(const nlohmann::json& j) {
    Span s;
    s.start_line = j.at("start_line").get<int>();
    s.start_col = j.at("start_col").get<int>();
    s.end_line = j.value("end_line", s.start_line);
    s.end_col = j.value("end_col", s.start_col);
    s.start_off = j.value("start_off", size_t{0});
    s.end_off = j.value("end_off", s.start_off);
    return s;
}

nlohmann::json to_json(const Diagnostic& d) {
    nlohmann::json related = nlohmann::json::array();
    for (const RelatedInfo& r : d.related) {
        related.push_back({{"span", to_json(r.span)},
                           {"message", r.message},
                           {"kind", r.kind == RelatedKind::Message ? "message" : "location"}});
    }
    return nlohmann::json{{"severity", to_string(d.severity)},
                          {"span", to_json(d.span)},
                          {"message", d.message},
                          {"category", to_string(d.category)},
                          {"related", related}};
}

Diagnostic diagnostic_from_json(const nlohmann::json& j) {
    Diagnostic d;
    d.severity = j.at("severity").get<std::string>() == "warning" ? Severity::Warning : Severity::Error;
    d.span = span_from_json(j.at("span"));
    d.message = j.at("message").get<std::string>();
    const auto cat = category_from_string(j.at("category").get<std::string>());
    if (!cat) {
        throw Error(ErrorCode::ParseError, "unknown category " + j.at("category").dump());
    }
    d.category = *cat;
    if (j.contains("related")) {
        for (const auto& r : j.at("related")) {
            d.related.push_back(RelatedInfo{
                span_from_json(r.at("span")), r.at("message").get<std::string>(),
                r.value("kind", "location") == "message" ? RelatedKind::Message
                                                         : RelatedKind::Location});
        }
    }
    return d;
}

}  // namespace dafny_pilot
