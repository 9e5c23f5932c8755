#pragma once
#include "ccb/calcdsl.hpp"
#include "ccb/errors.hpp"
#include "ccb/indicators.hpp"
#include "ccb/schema.hpp"
#include "ccb/statements.hpp"

#include "json.hpp"

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

// The dual-phase calculation pipeline. Phase 1 asks the model to read the
// document and emit a calculation schema; phase 2 asks it to write a DSL
// program against that schema, executes the program, and feeds formatted
// diagnostics back until validation passes or the iteration budget runs out.
// Direct and CoT baselines answer from the document in one call using
// FINAL_ANSWER marker lines.

namespace ccb::potloop {

// ---------------------------------------------------------------------------
// Backends

struct DecodingParams {
    double temperature = 0.0;
};

class LlmBackend {
public:
    virtual ~LlmBackend() = default;
    virtual std::string complete(const std::string& prompt, const DecodingParams& params) = 0;
    virtual std::string model_id() const = 0;
};

/// Replays a recorded transcript: a JSON list of {prompt_key, reply} with
/// prompt_key = fnv1a64_hex(prompt). Unmatched prompts throw
/// TranscriptMissError; loading rejects conflicting duplicate keys.
class ScriptedBackend : public LlmBackend {
public:
    explicit ScriptedBackend(const nlohmann::json& transcript,
                             std::string model_id = "scripted");
    static ScriptedBackend from_file(const std::string& path,
                                     std::string model_id = "scripted");

    std::string complete(const std::string& prompt, const DecodingParams& params) override;
    std::string model_id() const override { return model_id_; }

private:
    std::map<std::string, std::string> replies_;
    std::string model_id_;
};

/// Wraps a backend and records every exchange, for building transcripts.
class RecordingBackend : public LlmBackend {
public:
    explicit RecordingBackend(LlmBackend& inner) : inner_(inner) {}

    std::string complete(const std::string& prompt, const DecodingParams& params) override;
    std::string model_id() const override { return inner_.model_id(); }

    nlohmann::json transcript() const { return transcript_; }

private:
    LlmBackend& inner_;
    nlohmann::json transcript_ = nlohmann::json::array();
};

/// Adapts a plain function; the workhorse for simulated models in tests.
class CallbackBackend : public LlmBackend {
public:
    using Fn = std::function<std::string(const std::string&)>;
    CallbackBackend(Fn fn, std::string model_id)
        : fn_(std::move(fn)), model_id_(std::move(model_id)) {}

    std::string complete(const std::string& prompt, const DecodingParams&) override {
        return fn_(prompt);
    }
    std::string model_id() const override { return model_id_; }

private:
    Fn fn_;
    std::string model_id_;
};

/// OpenAI-style chat completion client configured from the environment:
/// CCB_LLM_ENDPOINT (http://host:port), CCB_LLM_MODEL, CCB_LLM_API_KEY.
class HttpBackend : public LlmBackend {
public:
    HttpBackend(std::string endpoint, std::string model, std::string api_key);
    static HttpBackend from_env();

    std::string complete(const std::string& prompt, const DecodingParams& params) override;
    std::string model_id() const override { return model_; }

private:
    std::string endpoint_;
    std::string model_;
    std::string api_key_;
};

// ---------------------------------------------------------------------------
// Queries and prompts

enum class Paradigm { Direct, CoT, PoT };

std::string_view to_string(Paradigm paradigm);        // "direct" | "cot" | "pot"
std::string_view display_name(Paradigm paradigm);     // "Direct" | "CoT" | "PoT"
std::optional<Paradigm> paradigm_from_string(std::string_view s);

struct QueryContext {
    std::string document_text;
    std::vector<indicators::IndicatorId> targets;  // non-empty
    std::string company_id;
    int fiscal_year = 0;
    statements::Scope scope = statements::Scope::Consolidated;
};

inline constexpr std::string_view kPromptsVersion = "ccb-prompts/1";

enum class PromptKind { Phase1, Phase2Initial, Phase2Fix, Direct, Cot };

std::string build_phase1_prompt(const QueryContext& ctx);
std::string build_phase2_prompt(const schema::CalculationSchema& s);
std::string build_phase2_fix_prompt(const schema::CalculationSchema& s,
                                    const std::string& prior_code,
                                    const std::string& diagnostics);
std::string build_direct_prompt(const QueryContext& ctx);
std::string build_cot_prompt(const QueryContext& ctx);

/// Classifies a prompt by its version tag line; simulated backends dispatch
/// on this instead of guessing from prose.
std::optional<PromptKind> prompt_kind(std::string_view prompt);

/// Value of a "### NAME: value" header line.
std::optional<std::string> prompt_field(std::string_view prompt, std::string_view name);

/// Body between a "### NAME" line and the next "### " header (or the end).
std::string prompt_section(std::string_view prompt, std::string_view name);

// ---------------------------------------------------------------------------
// Phase 1

struct Phase1Failure {
    std::string raw_output;
    std::vector<schema::Defect> defects;  // empty when the block was unusable
    std::string message;
};

using Phase1Result = std::variant<schema::CalculationSchema, Phase1Failure>;

struct LoopConfig {
    int max_depth = 3;  // phase-2 iteration budget T, 1..10
    double temperature = 0.0;
    bool retry_phase1 = false;  // one re-ask with defect feedback on failure
};

Phase1Result run_phase1(LlmBackend& backend, const QueryContext& ctx,
                        const LoopConfig& cfg = {});

// ---------------------------------------------------------------------------
// Phase 2

enum class ResultDefectKind { ExecutionFailed, MissingTarget, NonFiniteValue };

struct ResultDefect {
    ResultDefectKind kind;
    std::string subject;

    bool operator==(const ResultDefect&) const = default;
};

std::string_view to_string(ResultDefectKind kind);

/// Pass (empty) iff the outcome has no exceptions and carries one finite
/// result named after each target. Any exception collapses to a single
/// ExecutionFailed defect; per-target defects are reported only for
/// exception-free outcomes.
std::vector<ResultDefect> validate_results(const calcdsl::ExecutionOutcome& outcome,
                                           const std::vector<indicators::IndicatorId>& targets);

std::string format_result_defects(const std::vector<ResultDefect>& defects);

struct Iteration {
    std::string code_text;
    std::variant<calcdsl::DslProgram, std::vector<calcdsl::ExceptionRecord>> parse;
    calcdsl::ExecutionOutcome outcome;
    std::optional<std::string> feedback;  // diagnostics sent to the next iteration
};

enum class Terminal { Success, Exhausted };

struct LoopTrace {
    std::vector<Iteration> iterations;
    Terminal terminal = Terminal::Exhausted;
};

/// A backend failure mid-loop, with the iterations completed so far.
struct LoopBackendError : BackendError {
    LoopBackendError(const std::string& message, LoopTrace trace)
        : BackendError(message), partial_trace(std::move(trace)) {}
    LoopTrace partial_trace;
};

/// Runs the generate→execute→diagnose cycle until validate_results passes
/// or cfg.max_depth iterations have run. The schema must validate cleanly.
std::pair<calcdsl::ExecutionOutcome, LoopTrace> run_phase2(
    LlmBackend& backend, const schema::CalculationSchema& s, const LoopConfig& cfg = {});

// ---------------------------------------------------------------------------
// Baselines and dispatch

/// A parsed FINAL_ANSWER value. Percent answers arrive divided by 100 with
/// unit_text "%"; other unit words are kept verbatim and left to the match
/// policy.
struct Answer {
    Decimal value;
    std::string unit_text;

    bool operator==(const Answer&) const = default;
};

using AnswerMap = std::map<indicators::IndicatorId, Answer>;

/// Extracts FINAL_ANSWER lines from a reply; the last line per target wins.
/// Unparseable lines are skipped (the target stays unanswered).
AnswerMap extract_final_answers(std::string_view reply,
                                const std::vector<indicators::IndicatorId>& targets);

AnswerMap run_direct(LlmBackend& backend, const QueryContext& ctx,
                     const LoopConfig& cfg = {});
AnswerMap run_cot(LlmBackend& backend, const QueryContext& ctx,
                  const LoopConfig& cfg = {});

struct QueryRun {
    AnswerMap answers;  // absent target = NoAnswer
    std::optional<LoopTrace> trace;  // PoT only
    std::optional<std::string> failure_note;
    bool transcript_miss = false;
};

/// Dispatches one query. Model misbehavior (bad schema, exhausted loop,
/// transcript miss) degrades to unanswered targets; transport failures other
/// than a transcript miss propagate as BackendError.
QueryRun run_query(LlmBackend& backend, const QueryContext& ctx, Paradigm paradigm,
                   const LoopConfig& cfg = {});

}  // namespace ccb::potloop
