#include "dafny_pilot/error.hpp"

namespace dafny_pilot {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::StaleBase: return "StaleBase";
        case ErrorCode::OverlappingEdits: return "OverlappingEdits";
        case ErrorCode::SpanOutOfRange: return "SpanOutOfRange";
        case ErrorCode::VerifierNotFound: return "VerifierNotFound";
        case ErrorCode::ReplayMiss: return "ReplayMiss";
        case ErrorCode::MissingContextField: return "MissingContextField";
        case ErrorCode::CannotFit: return "CannotFit";
        case ErrorCode::TemplateError: return "TemplateError";
        case ErrorCode::AuthMissing: return "AuthMissing";
        case ErrorCode::NetworkError: return "NetworkError";
        case ErrorCode::ProviderError: return "ProviderError";
        case ErrorCode::NoCodeFound: return "NoCodeFound";
        case ErrorCode::UnplaceableSnippet: return "UnplaceableSnippet";
        case ErrorCode::NoSuchLemma: return "NoSuchLemma";
        case ErrorCode::PrecheckFailed: return "PrecheckFailed";
        case ErrorCode::BudgetExhausted: return "BudgetExhausted";
        case ErrorCode::DuplicateId: return "DuplicateId";
        case ErrorCode::MissingFile: return "MissingFile";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

}  // namespace dafny_pilot
