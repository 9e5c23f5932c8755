#include "ccb/harness.hpp"

#include "ccb/schema.hpp"
#include "ccb/util.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <filesystem>
#include <thread>
#include <utility>

namespace ccb::harness {

using indicators::DifficultyTag;
using indicators::IndicatorId;
using indicators::SourceTag;
using indicators::UnitKind;
using potloop::Paradigm;

// ---------------------------------------------------------------------------
// Match policy

const Decimal& MatchPolicy::rel_tolerance(UnitKind unit) const {
    switch (unit) {
        case UnitKind::Percentage: return percentage_tolerance;
        case UnitKind::Ratio: return ratio_tolerance;
        case UnitKind::Days: return days_tolerance;
        case UnitKind::Currency: return currency_tolerance;
    }
    return ratio_tolerance;
}

void validate_policy(const MatchPolicy& policy) {
    const Decimal one(1);
    for (const Decimal* tol : {&policy.percentage_tolerance, &policy.ratio_tolerance,
                               &policy.days_tolerance, &policy.currency_tolerance}) {
        if (tol->sign() <= 0 || *tol >= one)
            throw InvalidRangeError("match tolerances must lie in (0, 1)");
    }
    if (policy.percent_threshold.sign() <= 0)
        throw InvalidRangeError("percent threshold must be positive");
}

bool match_answer(const potloop::Answer& predicted, const indicators::IndicatorValue& truth,
                  const MatchPolicy& policy) {
    validate_policy(policy);
    Decimal value = predicted.value;
    if (truth.unit == UnitKind::Percentage && predicted.unit_text != "%" &&
        value.abs() > policy.percent_threshold) {
        value = value * Decimal::scaled(1, -2);
    }
    Decimal bound =
        policy.rel_tolerance(truth.unit) * Decimal::max(truth.value.abs(), Decimal::scaled(1, -12));
    return (value - truth.value).abs() <= bound;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

std::string code_digest(const potloop::LoopTrace& trace) {
    return fnv1a64_hex(trace.iterations.empty() ? std::string_view{}
                                                : trace.iterations.back().code_text);
}

TraceRef make_trace_ref(const potloop::LoopTrace& trace) {
    return {static_cast<int>(trace.iterations.size()), trace.terminal, code_digest(trace)};
}

struct BackendOutcome {
    std::vector<EvaluationRecord> records;
    nlohmann::json abort;  // null unless the run was cut short
};

BackendOutcome run_backend(const benchgen::BenchmarkInstance& instance, const BackendRef& ref,
                           std::span<const Paradigm> paradigms, const EvalConfig& cfg) {
    BackendOutcome out;
    out.records.reserve(instance.queries.size() * paradigms.size());
    out.abort = nullptr;
    bool aborted = false;
    for (Paradigm paradigm : paradigms) {
        for (const benchgen::Query& query : instance.queries) {
            EvaluationRecord rec;
            rec.query_id = query.id;
            rec.paradigm = paradigm;
            rec.model_id = ref.model_id;
            rec.truth = query.truth;
            rec.tags = query.tags;
            if (aborted) {
                rec.notes.push_back("skipped: backend run aborted");
                out.records.push_back(std::move(rec));
                continue;
            }
            try {
                potloop::QueryRun run =
                    potloop::run_query(*ref.backend, query.context, paradigm, cfg.loop);
                auto hit = run.answers.find(query.indicator);
                if (hit != run.answers.end()) {
                    rec.predicted = hit->second;
                    rec.correct = match_answer(hit->second, query.truth, cfg.policy);
                }
                if (run.trace) rec.trace = make_trace_ref(*run.trace);
                if (run.transcript_miss) rec.notes.push_back("transcript miss");
                if (run.failure_note) rec.notes.push_back(*run.failure_note);
            } catch (const potloop::LoopBackendError& e) {
                aborted = true;
                rec.trace = make_trace_ref(e.partial_trace);
                rec.notes.push_back(std::string("backend error: ") + e.what());
                out.abort = {{"model", ref.model_id},
                             {"paradigm", potloop::to_string(paradigm)},
                             {"at_query", query.id},
                             {"reason", e.what()}};
            } catch (const BackendError& e) {
                aborted = true;
                rec.notes.push_back(std::string("backend error: ") + e.what());
                out.abort = {{"model", ref.model_id},
                             {"paradigm", potloop::to_string(paradigm)},
                             {"at_query", query.id},
                             {"reason", e.what()}};
            }
            out.records.push_back(std::move(rec));
        }
    }
    return out;
}

nlohmann::json policy_json(const MatchPolicy& policy) {
    return {{"percentage_tolerance", policy.percentage_tolerance.to_string()},
            {"ratio_tolerance", policy.ratio_tolerance.to_string()},
            {"days_tolerance", policy.days_tolerance.to_string()},
            {"currency_tolerance", policy.currency_tolerance.to_string()},
            {"percent_threshold", policy.percent_threshold.to_string()}};
}

}  // namespace

EvaluationRun evaluate(const benchgen::BenchmarkInstance& instance,
                       std::span<const BackendRef> backends,
                       std::span<const Paradigm> paradigms, const EvalConfig& cfg) {
    if (cfg.jobs < 1) throw InvalidRangeError("jobs must be at least 1");
    validate_policy(cfg.policy);
    for (const BackendRef& ref : backends)
        if (ref.backend == nullptr) throw InvalidRangeError("null backend");

    std::vector<BackendOutcome> outcomes(backends.size());
    if (cfg.jobs == 1 || backends.size() <= 1) {
        for (std::size_t b = 0; b < backends.size(); ++b)
            outcomes[b] = run_backend(instance, backends[b], paradigms, cfg);
    } else {
        // One worker per backend, capped by jobs; a backend's own run stays
        // sequential so transcripts and abort semantics are unaffected.
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (std::size_t b = next.fetch_add(1); b < backends.size(); b = next.fetch_add(1))
                outcomes[b] = run_backend(instance, backends[b], paradigms, cfg);
        };
        std::vector<std::thread> pool;
        std::size_t n = std::min<std::size_t>(cfg.jobs, backends.size());
        pool.reserve(n);
        for (std::size_t i = 0; i < n; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    EvaluationRun run;
    nlohmann::json aborted = nlohmann::json::array();
    int transcript_misses = 0;
    for (BackendOutcome& outcome : outcomes) {
        if (!outcome.abort.is_null()) aborted.push_back(std::move(outcome.abort));
        for (EvaluationRecord& rec : outcome.records) {
            for (const std::string& note : rec.notes)
                if (note == "transcript miss") ++transcript_misses;
            run.records.push_back(std::move(rec));
        }
    }

    nlohmann::json paradigm_names = nlohmann::json::array();
    for (Paradigm p : paradigms) paradigm_names.push_back(std::string(potloop::to_string(p)));
    nlohmann::json backend_ids = nlohmann::json::array();
    for (const BackendRef& ref : backends) backend_ids.push_back(ref.model_id);
    run.metadata = {{"record_count", run.records.size()},
                    {"query_count", instance.queries.size()},
                    {"paradigms", std::move(paradigm_names)},
                    {"backends", std::move(backend_ids)},
                    {"jobs", cfg.jobs},
                    {"loop",
                     {{"max_depth", cfg.loop.max_depth},
                      {"temperature", cfg.loop.temperature},
                      {"retry_phase1", cfg.loop.retry_phase1}}},
                    {"policy", policy_json(cfg.policy)},
                    {"instance",
                     {{"seed", instance.seed},
                      {"n_companies", instance.n_companies},
                      {"generator", std::string(benchgen::kGeneratorVersion)}}},
                    {"transcript_misses", transcript_misses},
                    {"aborted", std::move(aborted)}};
    return run;
}

// ---------------------------------------------------------------------------
// Records serialization

namespace {

const nlohmann::json& require_field(const nlohmann::json& doc, const char* key) {
    if (!doc.is_object() || !doc.contains(key))
        throw SchemaViolationError(std::string("records document lacks field: ") + key);
    return doc.at(key);
}

std::string_view terminal_name(potloop::Terminal t) {
    return t == potloop::Terminal::Success ? "success" : "exhausted";
}

potloop::Terminal terminal_from(std::string_view s) {
    if (s == "success") return potloop::Terminal::Success;
    if (s == "exhausted") return potloop::Terminal::Exhausted;
    throw SchemaViolationError("unknown terminal state: " + std::string(s));
}

template <typename T>
T parse_tag(std::optional<T> parsed, const char* what, const std::string& text) {
    if (!parsed) throw SchemaViolationError(std::string("unknown ") + what + ": " + text);
    return *parsed;
}

}  // namespace

nlohmann::json to_json(const EvaluationRecord& record) {
    nlohmann::json predicted = nullptr;
    if (record.predicted)
        predicted = {{"value", record.predicted->value.to_string()},
                     {"unit", record.predicted->unit_text}};
    nlohmann::json trace = nullptr;
    if (record.trace)
        trace = {{"iterations", record.trace->iterations},
                 {"terminal", std::string(terminal_name(record.trace->terminal))},
                 {"final_code_digest", record.trace->final_code_digest}};
    return {{"query_id", record.query_id},
            {"paradigm", std::string(potloop::to_string(record.paradigm))},
            {"model", record.model_id},
            {"predicted", std::move(predicted)},
            {"truth",
             {{"value", record.truth.value.to_string()},
              {"unit", std::string(indicators::to_string(record.truth.unit))},
              {"year", record.truth.year}}},
            {"tags",
             {{"source", std::string(indicators::to_string(record.tags.source))},
              {"difficulty", std::string(indicators::to_string(record.tags.difficulty))},
              {"unit", std::string(indicators::to_string(record.tags.unit))}}},
            {"correct", record.correct},
            {"trace", std::move(trace)},
            {"notes", record.notes}};
}

EvaluationRecord record_from_json(const nlohmann::json& doc) {
    try {
        EvaluationRecord rec;
        rec.query_id = require_field(doc, "query_id").get<std::string>();
        rec.paradigm = parse_tag(
            potloop::paradigm_from_string(require_field(doc, "paradigm").get<std::string>()),
            "paradigm", require_field(doc, "paradigm").get<std::string>());
        rec.model_id = require_field(doc, "model").get<std::string>();
        const nlohmann::json& predicted = require_field(doc, "predicted");
        if (!predicted.is_null()) {
            rec.predicted = potloop::Answer{
                Decimal::parse(require_field(predicted, "value").get<std::string>()),
                require_field(predicted, "unit").get<std::string>()};
        }
        const nlohmann::json& truth = require_field(doc, "truth");
        rec.truth.value = Decimal::parse(require_field(truth, "value").get<std::string>());
        rec.truth.unit = parse_tag(
            indicators::unit_from_string(require_field(truth, "unit").get<std::string>()),
            "unit", require_field(truth, "unit").get<std::string>());
        rec.truth.year = require_field(truth, "year").get<int>();
        const nlohmann::json& tags = require_field(doc, "tags");
        rec.tags.source = parse_tag(
            indicators::source_from_string(require_field(tags, "source").get<std::string>()),
            "source tag", require_field(tags, "source").get<std::string>());
        rec.tags.difficulty = parse_tag(
            indicators::difficulty_from_string(
                require_field(tags, "difficulty").get<std::string>()),
            "difficulty tag", require_field(tags, "difficulty").get<std::string>());
        rec.tags.unit = parse_tag(
            indicators::unit_from_string(require_field(tags, "unit").get<std::string>()),
            "unit tag", require_field(tags, "unit").get<std::string>());
        rec.correct = require_field(doc, "correct").get<bool>();
        const nlohmann::json& trace = require_field(doc, "trace");
        if (!trace.is_null()) {
            rec.trace = TraceRef{
                require_field(trace, "iterations").get<int>(),
                terminal_from(require_field(trace, "terminal").get<std::string>()),
                require_field(trace, "final_code_digest").get<std::string>()};
        }
        for (const nlohmann::json& note : require_field(doc, "notes"))
            rec.notes.push_back(note.get<std::string>());
        if (rec.correct && !rec.predicted)
            throw SchemaViolationError("record marked correct without a predicted value");
        return rec;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaViolationError(std::string("malformed record: ") + e.what());
    } catch (const NumberFormatError& e) {
        throw SchemaViolationError(std::string("malformed record number: ") + e.what());
    }
}

nlohmann::json to_json(const EvaluationRun& run) {
    nlohmann::json records = nlohmann::json::array();
    for (const EvaluationRecord& rec : run.records) records.push_back(to_json(rec));
    return {{"format", std::string(kRecordsFormat)},
            {"metadata", run.metadata},
            {"records", std::move(records)}};
}

EvaluationRun run_from_json(const nlohmann::json& doc) {
    try {
        if (require_field(doc, "format").get<std::string>() != kRecordsFormat)
            throw SchemaViolationError("not a " + std::string(kRecordsFormat) + " document");
        EvaluationRun run;
        run.metadata = require_field(doc, "metadata");
        for (const nlohmann::json& rec : require_field(doc, "records"))
            run.records.push_back(record_from_json(rec));
        return run;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaViolationError(std::string("malformed records document: ") + e.what());
    }
}

void save_run(const EvaluationRun& run, const std::string& path) {
    write_file(path, to_json(run).dump(2) + "\n");
}

EvaluationRun load_run(const std::string& path) {
    std::string text = read_file(path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaViolationError(std::string("records file is not JSON: ") + e.what());
    }
    return run_from_json(doc);
}

// ---------------------------------------------------------------------------
// Stratification

namespace {

constexpr std::array<Paradigm, 3> kParadigmOrder = {Paradigm::Direct, Paradigm::CoT,
                                                    Paradigm::PoT};

const std::vector<std::string>& source_row_labels() {
    static const std::vector<std::string> rows = {"Direct Extraction", "Intra-table Calc",
                                                  "Cross-table Calc"};
    return rows;
}

const std::vector<std::string>& difficulty_row_labels() {
    static const std::vector<std::string> rows = {"Explicit Keys", "Implicit Calc",
                                                  "Multi-step Calc", "Ambiguous Keys"};
    return rows;
}

const std::vector<std::string>& unit_row_labels() {
    static const std::vector<std::string> rows = {"Currency (RMB)", "Days", "Percentage (%)",
                                                  "Ratio (Times)"};
    return rows;
}

int unit_row(UnitKind unit) {
    switch (unit) {
        case UnitKind::Currency: return 0;
        case UnitKind::Days: return 1;
        case UnitKind::Percentage: return 2;
        case UnitKind::Ratio: return 3;
    }
    return 3;
}

constexpr std::array<IndicatorId, indicators::kIndicatorCount> kIndicatorRowOrder = {
    IndicatorId::net_profit_growth, IndicatorId::roe,           IndicatorId::inventory_days,
    IndicatorId::ar_days,           IndicatorId::asset_turnover, IndicatorId::roa,
    IndicatorId::current_ratio,     IndicatorId::ocf,            IndicatorId::fcf,
    IndicatorId::revenue_growth,    IndicatorId::debt_ratio,     IndicatorId::quick_ratio,
    IndicatorId::net_margin,        IndicatorId::gross_margin};

const std::vector<std::string>& indicator_row_labels() {
    static const std::vector<std::string> rows = {"Net Profit Growth",
                                                  "Return on Equity (ROE)",
                                                  "Inventory Turnover Days",
                                                  "Accounts Receivable Turnover Days",
                                                  "Asset Turnover",
                                                  "Return on Assets (ROA)",
                                                  "Current Ratio",
                                                  "Operating Cash Flow (OCF)",
                                                  "Free Cash Flow (FCF)",
                                                  "Revenue Growth",
                                                  "Debt Ratio",
                                                  "Quick Ratio",
                                                  "Net Margin",
                                                  "Gross Margin"};
    return rows;
}

int indicator_row(IndicatorId id) {
    for (std::size_t i = 0; i < kIndicatorRowOrder.size(); ++i)
        if (kIndicatorRowOrder[i] == id) return static_cast<int>(i);
    return 0;
}

ReportTable make_table(std::string name, std::string title, std::vector<std::string> labels,
                       std::size_t paradigms, std::size_t models) {
    ReportTable table;
    table.name = std::move(name);
    table.title = std::move(title);
    table.row_labels = std::move(labels);
    table.cells.assign(table.row_labels.size(),
                       std::vector<std::vector<ReportCell>>(
                           paradigms, std::vector<ReportCell>(models)));
    return table;
}

}  // namespace

std::string accuracy_text(const ReportCell& cell) {
    if (cell.total == 0) return "-";
    return Decimal(100L * cell.correct).divide(Decimal(static_cast<long>(cell.total))).to_fixed(1);
}

StratifiedReport stratify(std::span<const EvaluationRecord> records, nlohmann::json metadata) {
    if (records.empty()) throw EmptyInputError("no records to stratify");

    StratifiedReport report;
    for (const EvaluationRecord& rec : records) report.models.push_back(rec.model_id);
    std::sort(report.models.begin(), report.models.end());
    report.models.erase(std::unique(report.models.begin(), report.models.end()),
                        report.models.end());

    std::array<bool, 3> paradigm_present{};
    for (const EvaluationRecord& rec : records)
        paradigm_present[static_cast<int>(rec.paradigm)] = true;
    for (Paradigm p : kParadigmOrder)
        if (paradigm_present[static_cast<int>(p)]) report.paradigms.push_back(p);

    const std::size_t n_paradigms = report.paradigms.size();
    const std::size_t n_models = report.models.size();
    report.source = make_table("source", "Results By Source (Calc Path)", source_row_labels(),
                               n_paradigms, n_models);
    report.difficulty = make_table("difficulty", "Results By Difficulty (Key Mapping)",
                                   difficulty_row_labels(), n_paradigms, n_models);
    report.unit =
        make_table("unit", "Results By Unit (Format)", unit_row_labels(), n_paradigms, n_models);
    report.indicator = make_table("indicator", "Results for Detailed Indicators",
                                  indicator_row_labels(), n_paradigms, n_models);

    auto paradigm_index = [&](Paradigm p) {
        return static_cast<std::size_t>(
            std::find(report.paradigms.begin(), report.paradigms.end(), p) -
            report.paradigms.begin());
    };
    for (const EvaluationRecord& rec : records) {
        std::size_t p = paradigm_index(rec.paradigm);
        std::size_t m = static_cast<std::size_t>(
            std::lower_bound(report.models.begin(), report.models.end(), rec.model_id) -
            report.models.begin());
        IndicatorId id = parse_tag(indicators::indicator_from_string(
                                       rec.query_id.substr(rec.query_id.rfind(':') + 1)),
                                   "indicator in query id", rec.query_id);
        auto bump = [&](ReportTable& table, int row) {
            ReportCell& cell = table.cells[static_cast<std::size_t>(row)][p][m];
            ++cell.total;
            if (rec.correct) ++cell.correct;
        };
        bump(report.source, static_cast<int>(rec.tags.source));
        bump(report.difficulty, static_cast<int>(rec.tags.difficulty));
        bump(report.unit, unit_row(rec.tags.unit));
        bump(report.indicator, indicator_row(id));
    }

    report.total_average.assign(n_paradigms, std::vector<std::string>(n_models, "-"));
    for (std::size_t p = 0; p < n_paradigms; ++p) {
        for (std::size_t m = 0; m < n_models; ++m) {
            Decimal sum(0);
            long rows = 0;
            for (const auto& row : report.indicator.cells) {
                const ReportCell& cell = row[p][m];
                if (cell.total == 0) continue;
                sum = sum + Decimal(100L * cell.correct).divide(Decimal(static_cast<long>(cell.total)));
                ++rows;
            }
            if (rows > 0) report.total_average[p][m] = sum.divide(Decimal(rows)).to_fixed(1);
        }
    }

    if (!metadata.is_object()) metadata = nlohmann::json::object();
    metadata["record_count"] = records.size();
    report.metadata = std::move(metadata);
    return report;
}

// ---------------------------------------------------------------------------
// Emission

std::vector<CurvePoint> emit_curve(const StratifiedReport& report) {
    std::vector<CurvePoint> points;
    for (std::size_t row = 0; row < report.source.row_labels.size(); ++row)
        for (std::size_t p = 0; p < report.paradigms.size(); ++p)
            for (std::size_t m = 0; m < report.models.size(); ++m)
                points.push_back({report.source.row_labels[row], report.paradigms[p],
                                  report.models[m],
                                  accuracy_text(report.source.cells[row][p][m])});
    return points;
}

namespace {

std::string csv_field(const std::string& text) {
    if (text.find_first_of(",\"\n") == std::string::npos) return text;
    std::string quoted = "\"";
    for (char c : text) {
        if (c == '"') quoted += '"';
        quoted += c;
    }
    quoted += '"';
    return quoted;
}

nlohmann::json table_json(const ReportTable& table, const StratifiedReport& report) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t r = 0; r < table.row_labels.size(); ++r) {
        nlohmann::json cells = nlohmann::json::array();
        for (std::size_t p = 0; p < report.paradigms.size(); ++p) {
            for (std::size_t m = 0; m < report.models.size(); ++m) {
                const ReportCell& cell = table.cells[r][p][m];
                cells.push_back({{"paradigm", std::string(potloop::to_string(report.paradigms[p]))},
                                 {"model", report.models[m]},
                                 {"correct", cell.correct},
                                 {"total", cell.total},
                                 {"accuracy", accuracy_text(cell)}});
            }
        }
        rows.push_back({{"label", table.row_labels[r]}, {"cells", std::move(cells)}});
    }
    return {{"name", table.name}, {"title", table.title}, {"rows", std::move(rows)}};
}

std::string render_tables_csv(const StratifiedReport& report) {
    std::string out = "table,category,paradigm,model,correct,total,accuracy\n";
    auto emit_table = [&](const ReportTable& table) {
        for (std::size_t r = 0; r < table.row_labels.size(); ++r) {
            for (std::size_t p = 0; p < report.paradigms.size(); ++p) {
                for (std::size_t m = 0; m < report.models.size(); ++m) {
                    const ReportCell& cell = table.cells[r][p][m];
                    out += table.name + "," + csv_field(table.row_labels[r]) + "," +
                           std::string(potloop::display_name(report.paradigms[p])) + "," +
                           csv_field(report.models[m]) + "," + std::to_string(cell.correct) +
                           "," + std::to_string(cell.total) + "," + accuracy_text(cell) + "\n";
                }
            }
        }
    };
    emit_table(report.source);
    emit_table(report.difficulty);
    emit_table(report.unit);
    emit_table(report.indicator);
    for (std::size_t p = 0; p < report.paradigms.size(); ++p)
        for (std::size_t m = 0; m < report.models.size(); ++m)
            out += "indicator,Total Average," +
                   std::string(potloop::display_name(report.paradigms[p])) + "," +
                   csv_field(report.models[m]) + ",,," + report.total_average[p][m] + "\n";
    return out;
}

std::string render_curve_csv(const StratifiedReport& report) {
    std::string out = "bucket,paradigm,model,accuracy\n";
    for (const CurvePoint& point : emit_curve(report))
        out += csv_field(point.bucket) + "," +
               std::string(potloop::display_name(point.paradigm)) + "," +
               csv_field(point.model) + "," + point.accuracy + "\n";
    return out;
}

std::string render_markdown_table(const ReportTable& table, const StratifiedReport& report,
                                  bool with_total_average) {
    std::string out = "| Category | Paradigm |";
    for (const std::string& model : report.models) out += " " + model + " |";
    out += "\n| --- | --- |";
    for (std::size_t m = 0; m < report.models.size(); ++m) out += " --- |";
    out += "\n";
    auto emit_rows = [&](const std::string& label, auto cell_text) {
        for (std::size_t p = 0; p < report.paradigms.size(); ++p) {
            out += "| " + (p == 0 ? label : std::string()) + " | " +
                   std::string(potloop::display_name(report.paradigms[p])) + " |";
            for (std::size_t m = 0; m < report.models.size(); ++m)
                out += " " + cell_text(p, m) + " |";
            out += "\n";
        }
    };
    for (std::size_t r = 0; r < table.row_labels.size(); ++r)
        emit_rows(table.row_labels[r],
                  [&](std::size_t p, std::size_t m) { return accuracy_text(table.cells[r][p][m]); });
    if (with_total_average)
        emit_rows("Total Average",
                  [&](std::size_t p, std::size_t m) { return report.total_average[p][m]; });
    return out;
}

std::string render_markdown(const StratifiedReport& report) {
    std::string out = "# Benchmark Report\n";
    for (const ReportTable* table :
         {&report.source, &report.difficulty, &report.unit, &report.indicator}) {
        out += "\n## " + table->title + "\n\n";
        out += render_markdown_table(*table, report, table == &report.indicator);
    }
    return out;
}

}  // namespace

std::vector<std::string> emit_report(const StratifiedReport& report,
                                     std::span<const EvaluationRecord> records,
                                     const std::set<ReportFormat>& formats,
                                     const std::string& out_dir) {
    std::vector<std::string> written;
    if (formats.empty()) return written;
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create report directory " + out_dir + ": " + ec.message());

    auto path_in = [&](const char* name) {
        return (std::filesystem::path(out_dir) / name).string();
    };
    if (formats.contains(ReportFormat::Json)) {
        nlohmann::json record_docs = nlohmann::json::array();
        for (const EvaluationRecord& rec : records) record_docs.push_back(to_json(rec));
        nlohmann::json paradigm_names = nlohmann::json::array();
        for (Paradigm p : report.paradigms)
            paradigm_names.push_back(std::string(potloop::to_string(p)));
        nlohmann::json total = nlohmann::json::array();
        for (std::size_t p = 0; p < report.paradigms.size(); ++p)
            for (std::size_t m = 0; m < report.models.size(); ++m)
                total.push_back(
                    {{"paradigm", std::string(potloop::to_string(report.paradigms[p]))},
                     {"model", report.models[m]},
                     {"accuracy", report.total_average[p][m]}});
        nlohmann::json doc = {{"format", "ccb-report/1"},
                              {"metadata", report.metadata},
                              {"models", report.models},
                              {"paradigms", std::move(paradigm_names)},
                              {"tables",
                               {{"source", table_json(report.source, report)},
                                {"difficulty", table_json(report.difficulty, report)},
                                {"unit", table_json(report.unit, report)},
                                {"indicator", table_json(report.indicator, report)}}},
                              {"total_average", std::move(total)},
                              {"records", std::move(record_docs)}};
        std::string path = path_in("report.json");
        write_file(path, doc.dump(2) + "\n");
        written.push_back(path);
    }
    if (formats.contains(ReportFormat::Csv)) {
        std::string tables_path = path_in("tables.csv");
        write_file(tables_path, render_tables_csv(report));
        written.push_back(tables_path);
        std::string curve_path = path_in("curve.csv");
        write_file(curve_path, render_curve_csv(report));
        written.push_back(curve_path);
    }
    if (formats.contains(ReportFormat::Markdown)) {
        std::string path = path_in("report.md");
        write_file(path, render_markdown(report));
        written.push_back(path);
    }
    return written;
}

// ---------------------------------------------------------------------------
// Simulated models

namespace {

int op_count(std::string_view formula) {
    int ops = 0;
    for (char c : formula)
        if (c == '+' || c == '-' || c == '*' || c == '/') ++ops;
    std::size_t pos = 0;
    while ((pos = formula.find("avg(", pos)) != std::string_view::npos) {
        ops += 2;  // a hidden sum and a halving
        pos += 4;
    }
    return ops;
}

std::string canonical_label(statements::LineItemKey key) {
    return statements::AliasTable::builtin()
        .labels_for(key, statements::AliasTier::Explicit)
        .front();
}

}  // namespace

SimulatedBackend::SimulatedBackend(const benchgen::BenchmarkInstance& instance,
                                   SimOptions options, std::string model_id)
    : options_(options), model_id_(std::move(model_id)) {
    if (options.arithmetic_error_prob < 0.0 || options.arithmetic_error_prob > 1.0)
        throw InvalidRangeError("arithmetic error probability must lie in [0, 1]");
    for (const statements::StatementSet& set : instance.statement_sets)
        sets_.emplace(set.company_id, set);
}

namespace {

struct SimContext {
    const statements::StatementSet* set = nullptr;
    int year = 0;
    statements::Scope scope = statements::Scope::Consolidated;
    std::vector<IndicatorId> targets;
};

SimContext parse_sim_context(const std::string& prompt,
                             const std::map<std::string, statements::StatementSet>& sets) {
    auto field = [&](std::string_view name) {
        auto value = potloop::prompt_field(prompt, name);
        if (!value)
            throw BackendError("simulated model: prompt lacks header " + std::string(name));
        return *value;
    };
    SimContext ctx;
    auto hit = sets.find(field("COMPANY"));
    if (hit == sets.end())
        throw BackendError("simulated model: unknown company " + field("COMPANY"));
    ctx.set = &hit->second;
    ctx.year = std::stoi(field("YEAR"));
    auto scope = statements::scope_from_string(field("SCOPE"));
    if (!scope) throw BackendError("simulated model: unknown scope " + field("SCOPE"));
    ctx.scope = *scope;
    for (const std::string& part : split(field("TARGETS"), ',')) {
        auto id = indicators::indicator_from_string(trim(part));
        if (!id) throw BackendError("simulated model: unknown target " + part);
        ctx.targets.push_back(*id);
    }
    return ctx;
}

}  // namespace

std::string SimulatedBackend::complete(const std::string& prompt,
                                       const potloop::DecodingParams&) {
    auto kind = potloop::prompt_kind(prompt);
    if (!kind) throw BackendError("simulated model: unrecognized prompt");
    switch (*kind) {
        case potloop::PromptKind::Phase1: return phase1_reply(prompt);
        case potloop::PromptKind::Phase2Initial:
        case potloop::PromptKind::Phase2Fix: return program_reply(prompt);
        case potloop::PromptKind::Direct:
        case potloop::PromptKind::Cot: return answer_reply(prompt);
    }
    throw BackendError("simulated model: unrecognized prompt");
}

std::string SimulatedBackend::phase1_reply(const std::string& prompt) const {
    SimContext ctx = parse_sim_context(prompt, sets_);
    schema::CalculationSchema schema;
    schema.targets = ctx.targets;
    std::set<std::string> bound;
    for (IndicatorId target : ctx.targets) {
        auto extracted = indicators::extract_inputs(target, *ctx.set, ctx.year, ctx.scope);
        auto* inputs = std::get_if<std::vector<indicators::ExtractedInput>>(&extracted);
        if (!inputs)
            throw BackendError("simulated model: statement set cannot answer the query");
        for (const indicators::ExtractedInput& input : *inputs) {
            if (!bound.insert(input.var_name).second) continue;
            schema::VariableBinding binding;
            binding.name = input.var_name;
            binding.literal = {input.value, input.value.to_string(), Decimal(1)};
            binding.provenance =
                schema::Provenance{input.spec.kind, ctx.scope,
                                   ctx.year + input.spec.year_offset,
                                   canonical_label(input.spec.key)};
            schema.bindings.push_back(std::move(binding));
        }
        schema.formulas.emplace_back(target, std::string(indicators::formula_dsl(target)));
    }
    return "Extracted the bindings below from the report.\n" + schema::render_schema(schema);
}

std::string SimulatedBackend::program_reply(const std::string& prompt) const {
    schema::CalculationSchema parsed;
    try {
        parsed = schema::parse_schema(potloop::prompt_section(prompt, "SCHEMA")).schema;
    } catch (const SchemaParseError& e) {
        throw BackendError(std::string("simulated model: unusable schema section: ") + e.what());
    }
    std::string code;
    for (const auto& [target, formula] : parsed.formulas) {
        std::string id(indicators::to_string(target));
        code += id + " = " + formula + "\n";
        code += "output " + id + "\n";
    }
    return "```\n" + code + "```\n";
}

std::string SimulatedBackend::answer_reply(const std::string& prompt) const {
    SimContext ctx = parse_sim_context(prompt, sets_);
    Rng rng(options_.seed ^ std::stoull(fnv1a64_hex(prompt), nullptr, 16));
    std::string out = "Reading the values off the statements.\n";
    for (std::size_t i = 0; i < ctx.targets.size(); ++i) {
        IndicatorId target = ctx.targets[i];
        auto outcome = indicators::compute_indicator(target, *ctx.set, ctx.year, ctx.scope);
        auto* truth = std::get_if<indicators::IndicatorValue>(&outcome);
        if (!truth) continue;
        Decimal value = truth->value;
        Rng draws = rng.fork(i + 1);
        bool corrupted = false;
        for (int op = op_count(indicators::formula_dsl(target)); op > 0; --op)
            if (draws.bernoulli(options_.arithmetic_error_prob)) corrupted = true;
        if (corrupted) {
            // Slip the result by 2..40 percent, either direction.
            long basis_points = draws.range(200, 4000);
            Decimal factor =
                Decimal(1) + Decimal::scaled(draws.bernoulli(0.5) ? basis_points : -basis_points, -4);
            value = value * factor;
        }
        out += "FINAL_ANSWER " + std::string(indicators::to_string(target)) + " = " +
               value.to_string() + "\n";
    }
    return out;
}

}  // namespace ccb::harness
