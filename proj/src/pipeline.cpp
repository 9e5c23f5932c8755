#include "ccb/pipeline.hpp"

#include "ccb/util.hpp"

#include "httplib.h"

#include <algorithm>
#include <cstdlib>
#include <set>

namespace ccb::potloop {

// ---------------------------------------------------------------------------
// Backends

ScriptedBackend::ScriptedBackend(const nlohmann::json& transcript, std::string model_id)
    : model_id_(std::move(model_id)) {
    if (!transcript.is_array()) throw IoError("transcript must be a JSON list");
    try {
        for (const auto& entry : transcript) {
            auto key = entry.at("prompt_key").get<std::string>();
            auto reply = entry.at("reply").get<std::string>();
            auto [it, inserted] = replies_.emplace(std::move(key), std::move(reply));
            if (!inserted && it->second != entry.at("reply").get<std::string>())
                throw IoError("conflicting transcript entries for prompt key " + it->first);
        }
    } catch (const nlohmann::json::exception& err) {
        throw IoError(std::string("malformed transcript entry: ") + err.what());
    }
}

ScriptedBackend ScriptedBackend::from_file(const std::string& path, std::string model_id) {
    nlohmann::json transcript;
    try {
        transcript = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& err) {
        throw IoError("cannot parse transcript " + path + ": " + err.what());
    }
    return ScriptedBackend(transcript, std::move(model_id));
}

std::string ScriptedBackend::complete(const std::string& prompt, const DecodingParams&) {
    std::string key = fnv1a64_hex(prompt);
    auto it = replies_.find(key);
    if (it == replies_.end())
        throw TranscriptMissError("no transcript entry for prompt key " + key);
    return it->second;
}

std::string RecordingBackend::complete(const std::string& prompt,
                                       const DecodingParams& params) {
    std::string reply = inner_.complete(prompt, params);
    std::string key = fnv1a64_hex(prompt);
    for (const auto& entry : transcript_)
        if (entry.at("prompt_key") == key) return reply;
    transcript_.push_back({{"prompt_key", key}, {"reply", reply}});
    return reply;
}

HttpBackend::HttpBackend(std::string endpoint, std::string model, std::string api_key)
    : endpoint_(std::move(endpoint)), model_(std::move(model)), api_key_(std::move(api_key)) {
    if (!endpoint_.starts_with("http://"))
        throw BackendError("only http:// endpoints are supported, got: " + endpoint_);
}

HttpBackend HttpBackend::from_env() {
    const char* endpoint = std::getenv("CCB_LLM_ENDPOINT");
    const char* model = std::getenv("CCB_LLM_MODEL");
    const char* key = std::getenv("CCB_LLM_API_KEY");
    if (!endpoint || !*endpoint) throw BackendError("CCB_LLM_ENDPOINT not set");
    if (!model || !*model) throw BackendError("CCB_LLM_MODEL not set");
    return HttpBackend(endpoint, model, key ? key : "");
}

std::string HttpBackend::complete(const std::string& prompt, const DecodingParams& params) {
    httplib::Client client(endpoint_);
    client.set_connection_timeout(10, 0);
    client.set_read_timeout(120, 0);

    nlohmann::json body{
        {"model", model_},
        {"temperature", params.temperature},
        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
    };
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    auto res = client.Post("/v1/chat/completions", headers, body.dump(), "application/json");
    if (!res)
        throw BackendError("no response from " + endpoint_ + ": " +
                           httplib::to_string(res.error()));
    if (res->status != 200)
        throw BackendError("endpoint returned status " + std::to_string(res->status));
    try {
        nlohmann::json reply = nlohmann::json::parse(res->body);
        return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& err) {
        throw BackendError(std::string("unexpected completion payload: ") + err.what());
    }
}

// ---------------------------------------------------------------------------
// Prompts

std::string_view to_string(Paradigm paradigm) {
    switch (paradigm) {
        case Paradigm::Direct: return "direct";
        case Paradigm::CoT: return "cot";
        case Paradigm::PoT: return "pot";
    }
    return "";
}

std::string_view display_name(Paradigm paradigm) {
    switch (paradigm) {
        case Paradigm::Direct: return "Direct";
        case Paradigm::CoT: return "CoT";
        case Paradigm::PoT: return "PoT";
    }
    return "";
}

std::optional<Paradigm> paradigm_from_string(std::string_view s) {
    if (s == "direct") return Paradigm::Direct;
    if (s == "cot") return Paradigm::CoT;
    if (s == "pot") return Paradigm::PoT;
    return std::nullopt;
}

namespace {

std::string join_targets(const std::vector<indicators::IndicatorId>& targets) {
    std::string out;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        if (i) out += ", ";
        out += indicators::to_string(targets[i]);
    }
    return out;
}

std::string context_headers(const QueryContext& ctx) {
    std::string out;
    out += "### COMPANY: " + ctx.company_id + "\n";
    out += "### YEAR: " + std::to_string(ctx.fiscal_year) + "\n";
    out += "### SCOPE: " + std::string(statements::to_string(ctx.scope)) + "\n";
    out += "### TARGETS: " + join_targets(ctx.targets) + "\n";
    return out;
}

constexpr std::string_view kAnswerInstructions =
    "Reply with one line per target indicator, in exactly this form and with "
    "no other text on those lines:\n"
    "FINAL_ANSWER <target id> = <value> [unit]\n"
    "Write percentages with a % sign, turnover days as a plain number of "
    "days, and currency amounts as plain numbers.\n";

}  // namespace

std::string build_phase1_prompt(const QueryContext& ctx) {
    std::string out = "[ccb-prompts/1 phase1]\n### TASK\n";
    out +=
        "Read the financial statements in the DOCUMENT section. For each "
        "target indicator, find every line item its calculation needs, "
        "prior-year balances included. Respond with exactly one block in "
        "this format:\n"
        "===SCHEMA===\n"
        "TARGETS: <the target ids, comma separated>\n"
        "VAR <lowercase_name> = <value exactly as written in the document> "
        "# <statement kind>/<scope>/<year>/<label exactly as written>\n"
        "FORMULA <target id> = <arithmetic over your VAR names>\n"
        "===END===\n"
        "One VAR line per number. Formulas may use + - * /, avg(...), "
        "abs(...), min(...), max(...), and the constant DAYS = 365. "
        "Statement kinds are balance_sheet, income_statement, cash_flow; "
        "scopes are consolidated, parent. Do not convert or round values; "
        "copy them exactly as printed.\n";
    out += context_headers(ctx);
    out += "### DOCUMENT\n";
    out += ctx.document_text;
    return out;
}

std::string build_phase2_prompt(const schema::CalculationSchema& s) {
    std::string out = "[ccb-prompts/1 phase2]\n### TASK\n";
    out +=
        "Write a calculation program for the schema below. One statement "
        "per line: `name = expression` or `output name`. Expressions may "
        "use + - * /, avg(...), abs(...), min(...), max(...), parentheses, "
        "the constant DAYS = 365, and lowercase identifiers. Emit exactly "
        "one `output <target id>` line per target, where the assigned name "
        "is the target id. Reply with the program only, no prose.\n";
    out += "### SCHEMA\n";
    out += schema::render_schema(s);
    return out;
}

std::string build_phase2_fix_prompt(const schema::CalculationSchema& s,
                                    const std::string& prior_code,
                                    const std::string& diagnostics) {
    std::string out = "[ccb-prompts/1 phase2-fix]\n### TASK\n";
    out +=
        "Your previous calculation program did not produce valid results. "
        "Using the schema, the prior code, and the diagnostics below, reply "
        "with the complete corrected program only, same language rules as "
        "before.\n";
    out += "### SCHEMA\n";
    out += schema::render_schema(s);
    out += "### PRIOR CODE\n";
    out += prior_code;
    if (!prior_code.ends_with('\n')) out += "\n";
    out += "### DIAGNOSTICS\n";
    out += diagnostics;
    return out;
}

std::string build_direct_prompt(const QueryContext& ctx) {
    std::string out = "[ccb-prompts/1 direct]\n### TASK\n";
    out += "Compute each target indicator from the financial statements in "
           "the DOCUMENT section. Answer immediately, without showing any "
           "working. ";
    out += kAnswerInstructions;
    out += context_headers(ctx);
    out += "### DOCUMENT\n";
    out += ctx.document_text;
    return out;
}

std::string build_cot_prompt(const QueryContext& ctx) {
    std::string out = "[ccb-prompts/1 cot]\n### TASK\n";
    out += "Compute each target indicator from the financial statements in "
           "the DOCUMENT section. Reason step by step: name the line items "
           "you use, carry out the arithmetic, then finish. ";
    out += kAnswerInstructions;
    out += context_headers(ctx);
    out += "### DOCUMENT\n";
    out += ctx.document_text;
    return out;
}

std::optional<PromptKind> prompt_kind(std::string_view prompt) {
    std::size_t eol = prompt.find('\n');
    std::string_view first = prompt.substr(0, eol == std::string_view::npos ? prompt.size() : eol);
    if (first == "[ccb-prompts/1 phase1]") return PromptKind::Phase1;
    if (first == "[ccb-prompts/1 phase2]") return PromptKind::Phase2Initial;
    if (first == "[ccb-prompts/1 phase2-fix]") return PromptKind::Phase2Fix;
    if (first == "[ccb-prompts/1 direct]") return PromptKind::Direct;
    if (first == "[ccb-prompts/1 cot]") return PromptKind::Cot;
    return std::nullopt;
}

std::optional<std::string> prompt_field(std::string_view prompt, std::string_view name) {
    std::string prefix = "### " + std::string(name) + ":";
    std::size_t pos = 0;
    while (pos <= prompt.size()) {
        std::size_t eol = prompt.find('\n', pos);
        std::size_t end = eol == std::string_view::npos ? prompt.size() : eol;
        std::string_view line = prompt.substr(pos, end - pos);
        if (line.starts_with(prefix))
            return std::string(trim(line.substr(prefix.size())));
        if (eol == std::string_view::npos) break;
        pos = eol + 1;
    }
    return std::nullopt;
}

std::string prompt_section(std::string_view prompt, std::string_view name) {
    std::string header = "### " + std::string(name);
    std::size_t pos = 0;
    while (pos <= prompt.size()) {
        std::size_t eol = prompt.find('\n', pos);
        std::size_t end = eol == std::string_view::npos ? prompt.size() : eol;
        if (prompt.substr(pos, end - pos) == header) {
            if (eol == std::string_view::npos) return "";
            std::size_t body_begin = eol + 1;
            std::size_t next = prompt.find("\n### ", eol);
            std::size_t body_end = next == std::string_view::npos ? prompt.size() : next;
            return std::string(prompt.substr(body_begin, body_end - body_begin));
        }
        if (eol == std::string_view::npos) break;
        pos = eol + 1;
    }
    return "";
}

// ---------------------------------------------------------------------------
// Phase 1

namespace {

Phase1Result interpret_phase1_reply(const std::string& reply) {
    try {
        schema::ParsedSchema parsed = schema::parse_schema(reply);
        if (parsed.defects.empty()) return std::move(parsed.schema);
        return Phase1Failure{reply, std::move(parsed.defects), "schema block has defects"};
    } catch (const SchemaParseError& err) {
        return Phase1Failure{reply, {}, err.what()};
    }
}

}  // namespace

Phase1Result run_phase1(LlmBackend& backend, const QueryContext& ctx, const LoopConfig& cfg) {
    DecodingParams params{cfg.temperature};
    std::string prompt = build_phase1_prompt(ctx);
    std::string reply = backend.complete(prompt, params);
    Phase1Result result = interpret_phase1_reply(reply);
    if (std::holds_alternative<schema::CalculationSchema>(result) || !cfg.retry_phase1)
        return result;

    const Phase1Failure& failure = std::get<Phase1Failure>(result);
    std::string retry = prompt;
    if (!retry.ends_with('\n')) retry += "\n";
    retry += "### PREVIOUS ATTEMPT\n";
    retry += failure.raw_output;
    if (!retry.ends_with('\n')) retry += "\n";
    retry += "### PROBLEMS\n";
    retry += failure.defects.empty() ? failure.message + "\n"
                                     : schema::format_defects(failure.defects);
    retry += "Respond again with one corrected block.\n";
    return interpret_phase1_reply(backend.complete(retry, params));
}

// ---------------------------------------------------------------------------
// Phase 2

std::string_view to_string(ResultDefectKind kind) {
    switch (kind) {
        case ResultDefectKind::ExecutionFailed: return "ExecutionFailed";
        case ResultDefectKind::MissingTarget: return "MissingTarget";
        case ResultDefectKind::NonFiniteValue: return "NonFiniteValue";
    }
    return "";
}

std::vector<ResultDefect> validate_results(const calcdsl::ExecutionOutcome& outcome,
                                           const std::vector<indicators::IndicatorId>& targets) {
    std::vector<ResultDefect> out;
    if (!outcome.exceptions.empty()) {
        // One defect stands for the whole exception vector; missing targets
        // are a consequence and would only repeat what format_exceptions says.
        out.push_back({ResultDefectKind::ExecutionFailed,
                       std::string(calcdsl::to_string(outcome.exceptions[0].kind))});
        return out;
    }
    for (indicators::IndicatorId target : targets) {
        std::string name(indicators::to_string(target));
        auto it = outcome.results.find(name);
        if (it == outcome.results.end())
            out.push_back({ResultDefectKind::MissingTarget, name});
        else if (!it->second.within_range())
            out.push_back({ResultDefectKind::NonFiniteValue, name});
    }
    return out;
}

std::string format_result_defects(const std::vector<ResultDefect>& defects) {
    std::string out;
    for (const ResultDefect& defect : defects) {
        out += "- ";
        out += to_string(defect.kind);
        out += ": " + defect.subject;
        switch (defect.kind) {
            case ResultDefectKind::ExecutionFailed:
                out += ": the program raised exceptions";
                break;
            case ResultDefectKind::MissingTarget:
                out += ": no output named after this target";
                break;
            case ResultDefectKind::NonFiniteValue:
                out += ": result magnitude out of range";
                break;
        }
        out += "\n";
    }
    return out;
}

namespace {

// Models are told to reply with the bare program, but tolerate one markdown
// fence around it.
std::string extract_code_block(const std::string& reply) {
    std::size_t open = reply.find("```");
    if (open == std::string::npos) return std::string(trim(reply));
    std::size_t body = reply.find('\n', open);
    if (body == std::string::npos) return std::string(trim(reply));
    ++body;
    std::size_t close = reply.find("```", body);
    if (close == std::string::npos) return std::string(trim(reply.substr(body)));
    return std::string(trim(reply.substr(body, close - body)));
}

}  // namespace

std::pair<calcdsl::ExecutionOutcome, LoopTrace> run_phase2(LlmBackend& backend,
                                                           const schema::CalculationSchema& s,
                                                           const LoopConfig& cfg) {
    if (cfg.max_depth < 1 || cfg.max_depth > 10)
        throw InvalidRangeError("max_depth must be within [1, 10]");

    LoopTrace trace;
    std::map<std::string, Decimal> env = schema::binding_env(s);
    DecodingParams params{cfg.temperature};
    std::string prompt = build_phase2_prompt(s);

    for (int t = 0; t < cfg.max_depth; ++t) {
        std::string reply;
        try {
            reply = backend.complete(prompt, params);
        } catch (const TranscriptMissError&) {
            throw;  // keep the type; the caller degrades it per query
        } catch (const BackendError& err) {
            throw LoopBackendError(err.what(), std::move(trace));
        }

        Iteration iter;
        iter.code_text = extract_code_block(reply);
        calcdsl::ParseResult parsed = calcdsl::parse_dsl(iter.code_text);
        if (auto* program = std::get_if<calcdsl::DslProgram>(&parsed)) {
            iter.parse = *program;
            iter.outcome = calcdsl::execute(*program, env);
        } else {
            auto& errors = std::get<std::vector<calcdsl::ExceptionRecord>>(parsed);
            iter.parse = errors;
            iter.outcome.exceptions = errors;
        }

        std::vector<ResultDefect> defects = validate_results(iter.outcome, s.targets);
        if (defects.empty()) {
            trace.iterations.push_back(std::move(iter));
            trace.terminal = Terminal::Success;
            calcdsl::ExecutionOutcome final_outcome = trace.iterations.back().outcome;
            return {std::move(final_outcome), std::move(trace)};
        }

        if (t + 1 < cfg.max_depth) {
            std::string diagnostics;
            if (!iter.outcome.exceptions.empty())
                diagnostics +=
                    calcdsl::format_exceptions(iter.outcome.exceptions, iter.code_text);
            std::vector<ResultDefect> unseen;  // defects the executor did not report
            for (const ResultDefect& defect : defects)
                if (defect.kind != ResultDefectKind::ExecutionFailed) unseen.push_back(defect);
            diagnostics += format_result_defects(unseen);
            iter.feedback = diagnostics;
            prompt = build_phase2_fix_prompt(s, iter.code_text, diagnostics);
        }
        trace.iterations.push_back(std::move(iter));
    }

    trace.terminal = Terminal::Exhausted;
    calcdsl::ExecutionOutcome final_outcome = trace.iterations.back().outcome;
    return {std::move(final_outcome), std::move(trace)};
}

// ---------------------------------------------------------------------------
// Baselines

AnswerMap extract_final_answers(std::string_view reply,
                                const std::vector<indicators::IndicatorId>& targets) {
    std::set<indicators::IndicatorId> wanted(targets.begin(), targets.end());
    AnswerMap out;
    for (const std::string& raw_line : split(reply, '\n')) {
        std::string_view line = trim(raw_line);
        if (!line.starts_with("FINAL_ANSWER")) continue;
        line = line.substr(12);
        if (line.empty() || (line[0] != ' ' && line[0] != '\t')) continue;
        std::size_t eq = line.find('=');
        if (eq == std::string_view::npos) continue;
        auto id = indicators::indicator_from_string(trim(line.substr(0, eq)));
        if (!id || !wanted.contains(*id)) continue;

        std::string_view value_text = trim(line.substr(eq + 1));
        if (value_text.empty()) continue;

        bool percent = value_text.back() == '%';
        if (percent) value_text = trim(value_text.substr(0, value_text.size() - 1));

        Decimal value;
        std::string unit_text;
        try {
            value = schema::normalize_magnitude(value_text).value;
        } catch (const NumberFormatError&) {
            std::size_t space = value_text.find_last_of(" \t");
            if (percent || space == std::string_view::npos) continue;
            try {
                value = schema::normalize_magnitude(value_text.substr(0, space)).value;
            } catch (const NumberFormatError&) {
                continue;
            }
            unit_text = std::string(trim(value_text.substr(space + 1)));
        }
        if (percent) {
            value = value.divide(Decimal(100));
            unit_text = "%";
        }
        out[*id] = Answer{value, std::move(unit_text)};
    }
    return out;
}

AnswerMap run_direct(LlmBackend& backend, const QueryContext& ctx, const LoopConfig& cfg) {
    DecodingParams params{cfg.temperature};
    return extract_final_answers(backend.complete(build_direct_prompt(ctx), params),
                                 ctx.targets);
}

AnswerMap run_cot(LlmBackend& backend, const QueryContext& ctx, const LoopConfig& cfg) {
    DecodingParams params{cfg.temperature};
    return extract_final_answers(backend.complete(build_cot_prompt(ctx), params),
                                 ctx.targets);
}

QueryRun run_query(LlmBackend& backend, const QueryContext& ctx, Paradigm paradigm,
                   const LoopConfig& cfg) {
    QueryRun out;
    try {
        switch (paradigm) {
            case Paradigm::Direct:
                out.answers = run_direct(backend, ctx, cfg);
                break;
            case Paradigm::CoT:
                out.answers = run_cot(backend, ctx, cfg);
                break;
            case Paradigm::PoT: {
                Phase1Result phase1 = run_phase1(backend, ctx, cfg);
                if (auto* failure = std::get_if<Phase1Failure>(&phase1)) {
                    out.failure_note = "phase 1: " + failure->message;
                    break;
                }
                auto& s = std::get<schema::CalculationSchema>(phase1);
                auto [outcome, trace] = run_phase2(backend, s, cfg);
                for (indicators::IndicatorId id : ctx.targets) {
                    auto it = outcome.results.find(std::string(indicators::to_string(id)));
                    if (it != outcome.results.end() && it->second.within_range())
                        out.answers[id] = Answer{it->second, ""};
                }
                if (trace.terminal != Terminal::Success)
                    out.failure_note = "phase 2: iteration budget exhausted";
                out.trace = std::move(trace);
                break;
            }
        }
    } catch (const TranscriptMissError& err) {
        out.answers.clear();
        out.trace.reset();
        out.transcript_miss = true;
        out.failure_note = std::string("transcript miss: ") + err.what();
    }
    return out;
}

}  // namespace ccb::potloop
