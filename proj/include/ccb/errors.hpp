#pragma once
#include <stdexcept>
#include <string>

namespace ccb {

// Structural problems in an input file or block: missing fields, duplicate
// statements, invariant violations found while building domain objects.
struct SchemaViolationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numeric text that cannot be normalized to an exact decimal.
struct NumberFormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A phase-1 schema block whose section structure is unusable: missing
// fences, no TARGETS line, an empty or ambiguous target list. Recoverable
// line-level problems are returned as defects instead.
struct SchemaParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Transport-level failure talking to an LLM backend. Aborts the affected
// backend's run; never used for model misbehavior.
struct BackendError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A scripted backend saw a prompt with no transcript entry. Subclass of
// BackendError so generic handlers still work, but the harness scores the
// single affected record as NoAnswer instead of aborting the run.
struct TranscriptMissError : BackendError {
    using BackendError::BackendError;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidRangeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct EmptyInputError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

}  // namespace ccb
