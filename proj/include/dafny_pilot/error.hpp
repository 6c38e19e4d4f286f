#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dafny_pilot {

enum class ErrorCode {
    // source-model
    StaleBase,
    OverlappingEdits,
    SpanOutOfRange,
    // dafny-adapter
    VerifierNotFound,
    ReplayMiss,
    // prompt-engine
    MissingContextField,
    CannotFit,
    TemplateError,
    // llm-client
    AuthMissing,
    NetworkError,
    ProviderError,
    // suggestion
    NoCodeFound,
    UnplaceableSnippet,
    NoSuchLemma,
    PrecheckFailed,
    // repair-loop
    BudgetExhausted,
    // corpus-bench
    DuplicateId,
    MissingFile,
    ParseError,
    // general
    InvalidArgument,
    Io,
};

std::string_view to_string(ErrorCode code);

/// Every engine failure surfaces as this exception type; the code is the
/// stable part callers switch on, the message is for humans.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace dafny_pilot
