#pragma once
#include "ccb/benchgen.hpp"
#include "ccb/decimal.hpp"
#include "ccb/errors.hpp"
#include "ccb/indicators.hpp"
#include "ccb/pipeline.hpp"

#include "json.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

// Evaluation harness: runs paradigms over a benchmark instance, scores
// answers under a unit-aware match policy, stratifies accuracy along the
// three classification dimensions plus per-indicator, and writes report
// files with deterministic bytes.

namespace ccb::harness {

// ---------------------------------------------------------------------------
// Match policy

/// Relative tolerances per result unit. Percentage answers are normalized
/// to fraction space before comparison; days are compared as-is, without
/// rounding to whole days.
struct MatchPolicy {
    Decimal percentage_tolerance = Decimal::parse("0.001");
    Decimal ratio_tolerance = Decimal::parse("0.001");
    Decimal days_tolerance = Decimal::parse("0.001");
    Decimal currency_tolerance = Decimal::parse("0.000001");
    /// A bare answer above this magnitude for a Percentage-kind truth is
    /// read as a percent value. Margins and ratios near 1 exist, but a bare
    /// 1.2 meaning the fraction 120% is implausible while a 120% growth
    /// figure is not.
    Decimal percent_threshold = Decimal::parse("1.5");

    const Decimal& rel_tolerance(indicators::UnitKind unit) const;

    bool operator==(const MatchPolicy&) const = default;
};

/// Tolerances must be positive and below 1; the percent threshold positive.
/// Throws InvalidRangeError.
void validate_policy(const MatchPolicy& policy);

/// Unit-aware comparison. Answers with unit text "%" already carry the
/// fraction (extract_final_answers divides by 100); bare answers beyond the
/// percent threshold under a Percentage-kind truth are divided by 100.
/// Matches when |pred - truth| <= tol * max(|truth|, 10^-12).
bool match_answer(const potloop::Answer& predicted, const indicators::IndicatorValue& truth,
                  const MatchPolicy& policy = {});

// ---------------------------------------------------------------------------
// Evaluation

/// Compact stand-in for a PoT loop trace: enough to identify the run
/// without embedding every iteration in the records file.
struct TraceRef {
    int iterations = 0;
    potloop::Terminal terminal = potloop::Terminal::Exhausted;
    std::string final_code_digest;  // fnv1a64 of the last program text

    bool operator==(const TraceRef&) const = default;
};

struct EvaluationRecord {
    std::string query_id;
    potloop::Paradigm paradigm = potloop::Paradigm::Direct;
    std::string model_id;
    std::optional<potloop::Answer> predicted;  // absent = NoAnswer
    indicators::IndicatorValue truth;
    indicators::CCBTags tags;
    bool correct = false;
    std::optional<TraceRef> trace;  // PoT only
    std::vector<std::string> notes;

    bool operator==(const EvaluationRecord&) const = default;
};

/// Non-owning backend handle; the id names the report column.
struct BackendRef {
    potloop::LlmBackend* backend = nullptr;
    std::string model_id;
};

struct EvalConfig {
    potloop::LoopConfig loop;
    MatchPolicy policy;
    int jobs = 1;  // concurrent (backend, paradigm) units; 1 = sequential
};

struct EvaluationRun {
    std::vector<EvaluationRecord> records;
    nlohmann::json metadata;
};

/// Runs every (query, paradigm, backend) combination and scores the
/// answers. Failures become NoAnswer records, never gaps: the record count
/// is always |queries| * |paradigms| * |backends|. A transcript miss flags
/// its single record; any other BackendError aborts the rest of that
/// backend's run (noted per record and in run metadata). Records are
/// ordered backend-major, then paradigm, then query, regardless of jobs.
EvaluationRun evaluate(const benchgen::BenchmarkInstance& instance,
                       std::span<const BackendRef> backends,
                       std::span<const potloop::Paradigm> paradigms,
                       const EvalConfig& cfg = {});

inline constexpr std::string_view kRecordsFormat = "ccb-records/1";

nlohmann::json to_json(const EvaluationRecord& record);
EvaluationRecord record_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const EvaluationRun& run);
EvaluationRun run_from_json(const nlohmann::json& doc);

void save_run(const EvaluationRun& run, const std::string& path);
EvaluationRun load_run(const std::string& path);

// ---------------------------------------------------------------------------
// Stratified reports

struct ReportCell {
    int correct = 0;
    int total = 0;

    bool operator==(const ReportCell&) const = default;
};

/// Percent accuracy to one decimal place, half-even ("89.5"); "-" for an
/// empty cell.
std::string accuracy_text(const ReportCell& cell);

/// One accuracy table: rows are dimension buckets (or indicators), each
/// crossed with every paradigm and model. cells[row][paradigm][model]
/// aligns with StratifiedReport::paradigms / models.
struct ReportTable {
    std::string name;
    std::string title;
    std::vector<std::string> row_labels;
    std::vector<std::vector<std::vector<ReportCell>>> cells;

    bool operator==(const ReportTable&) const = default;
};

struct StratifiedReport {
    std::vector<std::string> models;           // sorted unique ids
    std::vector<potloop::Paradigm> paradigms;  // Direct, CoT, PoT; present only
    ReportTable source;
    ReportTable difficulty;
    ReportTable unit;
    ReportTable indicator;
    /// Unweighted mean of the per-indicator accuracies, one decimal,
    /// indexed [paradigm][model].
    std::vector<std::vector<std::string>> total_average;
    nlohmann::json metadata;
};

/// Buckets every record along all three dimensions plus per-indicator.
/// Permutation-invariant over the record list. Throws EmptyInputError on
/// an empty list.
StratifiedReport stratify(std::span<const EvaluationRecord> records,
                          nlohmann::json metadata = nlohmann::json::object());

enum class ReportFormat { Json, Csv, Markdown };

struct CurvePoint {
    std::string bucket;
    potloop::Paradigm paradigm = potloop::Paradigm::Direct;
    std::string model;
    std::string accuracy;

    bool operator==(const CurvePoint&) const = default;
};

/// The degradation series: source-dimension accuracies ordered by rising
/// complexity (Direct Extraction, then Intra-table, then Cross-table).
std::vector<CurvePoint> emit_curve(const StratifiedReport& report);

/// Writes report.json (records + tables), tables.csv + curve.csv, and
/// report.md into out_dir per the requested formats; returns the paths
/// written. Byte-deterministic for a fixed report. Throws IoError.
std::vector<std::string> emit_report(const StratifiedReport& report,
                                     std::span<const EvaluationRecord> records,
                                     const std::set<ReportFormat>& formats,
                                     const std::string& out_dir);

// ---------------------------------------------------------------------------
// Simulated models

struct SimOptions {
    /// Per-arithmetic-operation error probability applied to Direct and CoT
    /// replies; schema and program replies stay faithful.
    double arithmetic_error_prob = 0.0;
    std::uint64_t seed = 0;
};

/// A model stand-in that answers prompts from the benchmark's own
/// statement sets: retrieval is always correct, and arithmetic in prose
/// replies degrades per SimOptions. Deterministic per prompt, so recording
/// and replaying it is exact.
class SimulatedBackend : public potloop::LlmBackend {
public:
    SimulatedBackend(const benchgen::BenchmarkInstance& instance, SimOptions options = {},
                     std::string model_id = "sim");

    std::string complete(const std::string& prompt, const potloop::DecodingParams& params) override;
    std::string model_id() const override { return model_id_; }

private:
    std::string phase1_reply(const std::string& prompt) const;
    std::string program_reply(const std::string& prompt) const;
    std::string answer_reply(const std::string& prompt) const;

    std::map<std::string, statements::StatementSet> sets_;
    SimOptions options_;
    std::string model_id_;
};

}  // namespace ccb::harness
