#include "kginstruct/errors.hpp"

namespace kgi {

const char* err_name(Err code) {
    switch (code) {
        case Err::MissingFile: return "missing file";
        case Err::ParseError: return "parse error";
        case Err::DanglingReference: return "dangling reference";
        case Err::MissingImage: return "missing image";
        case Err::NoTriples: return "no triples";
        case Err::ExhaustedRetries: return "exhausted retries";
        case Err::NoImages: return "no images";
        case Err::NoDistractor: return "no distractor";
        case Err::InsufficientDistractors: return "insufficient distractors";
        case Err::MissingAsset: return "missing asset";
        case Err::BadAsset: return "bad asset";
        case Err::RendererFailure: return "renderer failure";
        case Err::RendererTimeout: return "renderer timeout";
        case Err::BackendUnavailable: return "backend unavailable";
        case Err::EmptyBackendResponse: return "empty backend response";
        case Err::GrammarViolation: return "grammar violation";
        case Err::Unparseable: return "unparseable";
        case Err::JudgeUnavailable: return "judge unavailable";
        case Err::ScoreParseFailure: return "score parse failure";
        case Err::ConfigError: return "config error";
        case Err::Cancelled: return "cancelled";
    }
    return "unknown error";
}

}  // namespace kgi
