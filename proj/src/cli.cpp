#include "ccb/cli.hpp"

#include <charconv>
#include <cstdint>
#include <ctime>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ccb/benchgen.hpp"
#include "ccb/errors.hpp"
#include "ccb/harness.hpp"
#include "ccb/indicators.hpp"
#include "ccb/pipeline.hpp"
#include "ccb/statements.hpp"
#include "ccb/util.hpp"

namespace ccb::cli {
namespace {

using nlohmann::json;

/// Flag misuse detected after CLI11 parsing; reported like a parse error.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string iso_utc_now() {
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string file_hash(const std::string& path) {
    return sha256_hex(read_file(path));
}

void print_hash(std::ostream& out, const std::string& path) {
    out << path << " sha256=" << file_hash(path) << "\n";
}

int parse_year(std::string_view text) {
    int value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw UsageError("bad year '" + std::string(text) + "' in --years");
    return value;
}

benchgen::YearRange parse_years(const std::string& text) {
    auto parts = split(text, ':');
    if (parts.size() != 2) throw UsageError("--years expects FIRST:LAST, got '" + text + "'");
    benchgen::YearRange range{parse_year(parts[0]), parse_year(parts[1])};
    if (range.first >= range.last)
        throw UsageError("--years needs at least two ascending years, got '" + text + "'");
    return range;
}

std::vector<potloop::Paradigm> parse_paradigms(const std::string& csv) {
    std::vector<potloop::Paradigm> paradigms;
    for (const auto& part : split(csv, ',')) {
        auto paradigm = potloop::paradigm_from_string(part);
        if (!paradigm) throw UsageError("unknown paradigm '" + part + "'");
        paradigms.push_back(*paradigm);
    }
    if (paradigms.empty()) throw UsageError("--paradigm lists no paradigms");
    return paradigms;
}

std::set<harness::ReportFormat> parse_formats(const std::string& csv) {
    std::set<harness::ReportFormat> formats;
    for (const auto& part : split(csv, ',')) {
        if (part == "json") formats.insert(harness::ReportFormat::Json);
        else if (part == "csv") formats.insert(harness::ReportFormat::Csv);
        else if (part == "md" || part == "markdown") formats.insert(harness::ReportFormat::Markdown);
        else throw UsageError("unknown report format '" + part + "'");
    }
    if (formats.empty()) throw UsageError("--format lists no formats");
    return formats;
}

// --- gen ---

struct GenArgs {
    std::uint64_t seed = 0;
    int companies = 1;
    std::string years = "2022:2023";
    std::string noise = "standard";
    std::uint64_t noise_seed = 0;
    bool noise_seed_set = false;
    std::string output = "instance.json";
};

int cmd_gen(const GenArgs& a, std::ostream& out) {
    const auto years = parse_years(a.years);
    const std::uint64_t noise_seed = a.noise_seed_set ? a.noise_seed : a.seed;
    benchgen::NoiseProfile profile;
    if (a.noise == "standard") {
        profile = benchgen::standard_noise(noise_seed);
    } else if (a.noise == "plain") {
        profile.seed = noise_seed;
    } else {
        throw UsageError("--noise must be 'standard' or 'plain', got '" + a.noise + "'");
    }
    const auto instance = benchgen::generate_benchmark(a.seed, a.companies, years, profile);
    benchgen::save_instance(instance, a.output);
    out << "wrote " << a.output << " (" << instance.n_companies << " companies, "
        << instance.queries.size() << " queries)\n";
    print_hash(out, a.output);
    return 0;
}

// --- run ---

struct RunArgs {
    std::string instance_path;
    std::string paradigms = "direct,cot,pot";
    std::string output = "records.json";
    std::string transcript;
    bool sim = false;
    double sim_noise = 0.0;
    std::uint64_t sim_seed = 0;
    std::string record;
    std::string model_id;
    int jobs = 1;
    int max_depth = 3;
    double temperature = 0.0;
    bool retry_phase1 = false;
};

json run_manifest(const RunArgs& a, const std::vector<std::string>& command_line,
                  const benchgen::BenchmarkInstance& instance, const std::string& instance_hash,
                  std::string_view backend_kind, const std::string& model,
                  const std::string& started_at) {
    json backend{{"kind", backend_kind}, {"model_id", model}};
    if (!a.transcript.empty()) backend["transcript"] = a.transcript;
    if (a.sim) backend["sim"] = {{"arithmetic_error_prob", a.sim_noise}, {"seed", a.sim_seed}};
    json config{{"paradigms", a.paradigms},
                {"jobs", a.jobs},
                {"loop",
                 {{"max_depth", a.max_depth},
                  {"temperature", a.temperature},
                  {"retry_phase1", a.retry_phase1}}},
                {"output", a.output}};
    if (!a.record.empty()) config["record"] = a.record;
    json seeds{{"instance", instance.seed}, {"noise", instance.profile.seed}};
    if (a.sim) seeds["sim"] = a.sim_seed;
    return json{{"format", kManifestFormat},
                {"tool_version", kToolVersion},
                {"command_line", command_line},
                {"config", std::move(config)},
                {"seeds", std::move(seeds)},
                {"instance",
                 {{"path", a.instance_path},
                  {"sha256", instance_hash},
                  {"queries", instance.queries.size()}}},
                {"backends", json::array({std::move(backend)})},
                {"started_at", started_at},
                {"finished_at", iso_utc_now()}};
}

int cmd_run(const RunArgs& a, const std::vector<std::string>& command_line, std::ostream& out,
            std::ostream& err) {
    const std::string started_at = iso_utc_now();
    const auto paradigms = parse_paradigms(a.paradigms);
    const auto instance = benchgen::load_instance(a.instance_path);
    const std::string instance_hash = file_hash(a.instance_path);

    std::unique_ptr<potloop::LlmBackend> owned;
    std::string_view backend_kind;
    if (!a.transcript.empty()) {
        owned = std::make_unique<potloop::ScriptedBackend>(
            potloop::ScriptedBackend::from_file(a.transcript));
        backend_kind = "scripted";
    } else if (a.sim) {
        owned = std::make_unique<harness::SimulatedBackend>(
            instance, harness::SimOptions{a.sim_noise, a.sim_seed});
        backend_kind = "sim";
    } else {
        owned = std::make_unique<potloop::HttpBackend>(potloop::HttpBackend::from_env());
        backend_kind = "http";
    }
    potloop::LlmBackend* backend = owned.get();
    std::optional<potloop::RecordingBackend> recorder;
    if (!a.record.empty()) {
        recorder.emplace(*backend);
        backend = &*recorder;
    }

    harness::EvalConfig cfg;
    cfg.loop.max_depth = a.max_depth;
    cfg.loop.temperature = a.temperature;
    cfg.loop.retry_phase1 = a.retry_phase1;
    cfg.jobs = a.jobs;
    const std::string model = a.model_id.empty() ? backend->model_id() : a.model_id;
    const harness::BackendRef ref{backend, model};
    const auto run = harness::evaluate(instance, {&ref, 1}, paradigms, cfg);

    harness::save_run(run, a.output);
    out << "wrote " << a.output << " (" << run.records.size() << " records)\n";
    print_hash(out, a.output);

    const std::string manifest_path = a.output + ".manifest.json";
    const json manifest =
        run_manifest(a, command_line, instance, instance_hash, backend_kind, model, started_at);
    write_file(manifest_path, manifest.dump(2) + "\n");
    print_hash(out, manifest_path);

    if (recorder) {
        const json transcript = recorder->transcript();
        write_file(a.record, transcript.dump(2) + "\n");
        out << "wrote " << a.record << " (" << transcript.size() << " exchanges)\n";
        print_hash(out, a.record);
    }

    const auto aborted = run.metadata.value("aborted", json::array());
    if (!aborted.empty()) {
        err << "error: backend run aborted: " << aborted.front().value("reason", "") << "\n";
        return 1;
    }
    return 0;
}

// --- score / report ---

int cmd_score(const std::string& records_path, const std::string& out_dir,
              const std::set<harness::ReportFormat>& formats, std::ostream& out) {
    const auto run = harness::load_run(records_path);
    const auto report = harness::stratify(run.records, run.metadata);
    for (const auto& path : harness::emit_report(report, run.records, formats, out_dir))
        print_hash(out, path);
    return 0;
}

// --- oracle ---

struct OracleArgs {
    std::string statements_path;
    int year = 0;
    std::string scope = "consolidated";
    std::string indicators;
};

std::string render_indicator(const indicators::IndicatorValue& v) {
    switch (v.unit) {
        case indicators::UnitKind::Percentage: return (v.value * Decimal(100L)).to_fixed(1) + "%";
        case indicators::UnitKind::Ratio: return v.value.to_fixed(2);
        case indicators::UnitKind::Days: return v.value.to_fixed(1) + " days";
        case indicators::UnitKind::Currency: return v.value.to_string();
    }
    return v.value.to_string();
}

int cmd_oracle(const OracleArgs& a, std::ostream& out) {
    const auto scope = statements::scope_from_string(a.scope);
    if (!scope) throw UsageError("unknown scope '" + a.scope + "'");
    std::vector<indicators::IndicatorId> ids;
    if (a.indicators.empty()) {
        const auto all = indicators::all_indicators();
        ids.assign(all.begin(), all.end());
    } else {
        for (const auto& part : split(a.indicators, ',')) {
            auto id = indicators::indicator_from_string(part);
            if (!id) throw UsageError("unknown indicator '" + part + "'");
            ids.push_back(*id);
        }
    }

    const auto set = statements::resolve_statement_set(
        statements::parse_statement_set_text(read_file(a.statements_path)),
        statements::AliasTable::builtin());
    for (const auto id : ids) {
        out << indicators::to_string(id) << " = ";
        const auto outcome = indicators::compute_indicator(id, set, a.year, *scope);
        if (const auto* value = std::get_if<indicators::IndicatorValue>(&outcome)) {
            out << render_indicator(*value);
        } else if (const auto* missing = std::get_if<indicators::MissingItem>(&outcome)) {
            out << "missing inputs:";
            for (std::size_t i = 0; i < missing->keys.size(); ++i)
                out << (i ? ", " : " ") << statements::to_string(missing->keys[i]);
        } else {
            out << "undefined";
        }
        out << "\n";
    }
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Financial-indicator benchmark toolkit", "ccb"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kToolVersion));

    GenArgs gen;
    auto* gen_cmd = app.add_subcommand("gen", "Synthesize a benchmark instance file");
    gen_cmd->add_option("--seed", gen.seed, "Generator seed")->required();
    gen_cmd->add_option("--companies", gen.companies, "Company count")
        ->check(CLI::PositiveNumber);
    gen_cmd->add_option("--years", gen.years, "Fiscal year range FIRST:LAST")->capture_default_str();
    gen_cmd->add_option("--noise", gen.noise, "Rendering profile: standard | plain")->capture_default_str();
    auto* noise_seed_opt =
        gen_cmd->add_option("--noise-seed", gen.noise_seed, "Profile seed (defaults to --seed)");
    gen_cmd->add_option("-o,--output", gen.output, "Instance file path")->capture_default_str();

    RunArgs run;
    auto* run_cmd = app.add_subcommand("run", "Evaluate paradigms over an instance");
    run_cmd->add_option("instance", run.instance_path, "Instance file")->required();
    run_cmd->add_option("--paradigm", run.paradigms, "Comma list of direct, cot, pot")->capture_default_str();
    run_cmd->add_option("-o,--output", run.output, "Records file path")->capture_default_str();
    auto* transcript_opt = run_cmd->add_option("--transcript", run.transcript,
                                               "Replay this recorded transcript");
    auto* sim_opt = run_cmd->add_flag("--sim", run.sim,
                                      "Simulated model reading the instance's own statements");
    transcript_opt->excludes(sim_opt);
    run_cmd->add_option("--sim-noise", run.sim_noise, "Arithmetic error probability per operation")
        ->needs(sim_opt)
        ->check(CLI::Range(0.0, 1.0));
    run_cmd->add_option("--sim-seed", run.sim_seed, "Simulated model seed")->needs(sim_opt);
    run_cmd->add_option("--record", run.record, "Write the exchanged transcript to this path");
    run_cmd->add_option("--model-id", run.model_id, "Report column name override");
    run_cmd->add_option("--jobs", run.jobs, "Concurrent evaluation units")->capture_default_str()
        ->check(CLI::PositiveNumber);
    run_cmd->add_option("--max-depth", run.max_depth, "Self-correction iteration budget")->capture_default_str()
        ->check(CLI::Range(1, 10));
    run_cmd->add_option("--temperature", run.temperature, "Decoding temperature")->capture_default_str();
    run_cmd->add_flag("--retry-phase1", run.retry_phase1,
                      "Re-ask once after a schema extraction defect");

    std::string score_records;
    std::string score_out = "report";
    auto* score_cmd = app.add_subcommand("score", "Write every report format for a records file");
    score_cmd->add_option("records", score_records, "Records file")->required();
    score_cmd->add_option("-o,--output", score_out, "Report directory")->capture_default_str();

    std::string report_records;
    std::string report_out = "report";
    std::string report_formats = "json,csv,md";
    auto* report_cmd =
        app.add_subcommand("report", "Write selected report formats for a records file");
    report_cmd->add_option("records", report_records, "Records file")->required();
    report_cmd->add_option("-o,--output", report_out, "Report directory")->capture_default_str();
    report_cmd->add_option("--format", report_formats, "Comma list of json, csv, md")->capture_default_str();

    OracleArgs oracle;
    auto* oracle_cmd =
        app.add_subcommand("oracle", "Print exact indicator values for a statement file");
    oracle_cmd->add_option("statements", oracle.statements_path, "Statement-set JSON file")
        ->required();
    oracle_cmd->add_option("--year", oracle.year, "Fiscal year")->required();
    oracle_cmd->add_option("--scope", oracle.scope, "consolidated | parent")->capture_default_str();
    oracle_cmd->add_option("--indicator", oracle.indicators,
                           "Comma list of indicator ids (default: all)");

    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    argv.push_back("ccb");
    for (const auto& arg : args) argv.push_back(arg.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << kToolVersion << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        gen.noise_seed_set = noise_seed_opt->count() > 0;
        if (*gen_cmd) return cmd_gen(gen, out);
        if (*run_cmd) return cmd_run(run, args, out, err);
        if (*score_cmd)
            return cmd_score(score_records, score_out,
                             {harness::ReportFormat::Json, harness::ReportFormat::Csv,
                              harness::ReportFormat::Markdown},
                             out);
        if (*report_cmd)
            return cmd_score(report_records, report_out, parse_formats(report_formats), out);
        if (*oracle_cmd) return cmd_oracle(oracle, out);
        err << app.help();
        return 2;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace ccb::cli
