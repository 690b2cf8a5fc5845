#pragma once

#include <stdexcept>
#include <string>

namespace kgi {

enum class Err {
    // ingest
    MissingFile,
    ParseError,
    DanglingReference,
    MissingImage,
    // sampler
    NoTriples,
    ExhaustedRetries,
    // taskgen
    NoImages,
    NoDistractor,
    InsufficientDistractors,
    // render
    MissingAsset,
    BadAsset,
    RendererFailure,
    RendererTimeout,
    // instruct / backends
    BackendUnavailable,
    EmptyBackendResponse,
    GrammarViolation,
    // evalkit
    Unparseable,
    JudgeUnavailable,
    ScoreParseFailure,
    // cli / config
    ConfigError,
    Cancelled,
};

const char* err_name(Err code);

// Carries a machine-readable code plus, where it applies, a 1-based input
// line number (ParseError and friends).
class Error : public std::runtime_error {
public:
    Error(Err code, std::string message, long line = -1)
        : std::runtime_error(line >= 0 ? std::string(err_name(code)) + " at line " +
                                             std::to_string(line) + ": " + message
                                       : std::string(err_name(code)) + ": " + message),
          code_(code),
          line_(line) {}

    Err code() const { return code_; }
    long line() const { return line_; }

private:
    Err code_;
    long line_;
};

}  // namespace kgi
