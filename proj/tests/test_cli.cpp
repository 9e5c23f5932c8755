#include "doctest.h"

#include "ccb/benchgen.hpp"
#include "ccb/cli.hpp"
#include "ccb/harness.hpp"
#include "ccb/indicators.hpp"
#include "ccb/statements.hpp"
#include "ccb/util.hpp"

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

using namespace ccb;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int code = -1;
    std::string out;
    std::string err;
};

CliResult run_cli(const std::vector<std::string>& args) {
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli::run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

/// Fresh scratch directory per test case, removed on destruction.
struct TempDir {
    fs::path path;

    explicit TempDir(const std::string& tag)
        : path(fs::temp_directory_path() / ("ccb-cli-" + tag)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }

    std::string file(const std::string& name) const { return (path / name).string(); }
};

/// The hex digest printed for `path`, or "" if no hash line mentions it.
std::string printed_hash(const std::string& out, const std::string& path) {
    const std::string prefix = path + " sha256=";
    for (const auto& line : split(out, '\n'))
        if (line.rfind(prefix, 0) == 0) return line.substr(prefix.size());
    return "";
}

std::string file_hash(const std::string& path) {
    return sha256_hex(read_file(path));
}

json statement_json(std::string_view kind, int year,
                    const std::vector<std::pair<statements::LineItemKey, const char*>>& items) {
    const auto& table = statements::AliasTable::builtin();
    auto rows = json::array();
    for (const auto& [key, value] : items)
        rows.push_back(
            {{"label", table.labels_for(key, statements::AliasTier::Explicit).front()},
             {"value", value}});
    return {{"kind", kind},
            {"scope", "consolidated"},
            {"fiscal_year", year},
            {"currency_unit", "CNY"},
            {"items", rows}};
}

/// Hand-sized statement file: debt ratio 500/500, ROE 12 over avg(100, 140),
/// current ratio 300/200, inventory days 365 * 20 / 100, OCF 12345.
std::string write_oracle_fixture(const TempDir& dir) {
    using statements::LineItemKey;
    const json doc{
        {"company_id", "fix"},
        {"statements",
         json::array(
             {statement_json("balance_sheet", 2022,
                             {{LineItemKey::parent_equity, "100"}, {LineItemKey::inventory, "20"}}),
              statement_json("balance_sheet", 2023,
                             {{LineItemKey::total_assets, "500"},
                              {LineItemKey::total_liabilities, "500"},
                              {LineItemKey::parent_equity, "140"},
                              {LineItemKey::inventory, "20"},
                              {LineItemKey::current_assets, "300"},
                              {LineItemKey::current_liabilities, "200"}}),
              statement_json("income_statement", 2023,
                             {{LineItemKey::net_income, "12"}, {LineItemKey::cogs, "100"}}),
              statement_json("cash_flow", 2023, {{LineItemKey::ocf, "12345"}})})}};
    const std::string path = dir.file("statements.json");
    write_file(path, doc.dump(2));
    return path;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("gen writes a deterministic instance and prints its hash") {
    TempDir dir("gen");
    const std::string first = dir.file("bench.json");
    const auto r1 = run_cli({"gen", "--seed", "42", "--companies", "19", "--years", "2019:2023",
                             "-o", first});
    CAPTURE(r1.err);
    CHECK(r1.code == 0);

    const auto instance = benchgen::load_instance(first);
    CHECK(instance.n_companies == 19);
    CHECK(instance.seed == 42);
    CHECK(instance.years == benchgen::YearRange{2019, 2023});
    CHECK(instance.queries.size() == 266);

    CHECK(r1.out.find("wrote " + first + " (19 companies, 266 queries)") != std::string::npos);
    CHECK(printed_hash(r1.out, first) == file_hash(first));

    const std::string second = dir.file("bench2.json");
    const auto r2 = run_cli({"gen", "--seed", "42", "--companies", "19", "--years", "2019:2023",
                             "-o", second});
    CHECK(r2.code == 0);
    CHECK(read_file(second) == read_file(first));
    CHECK(printed_hash(r2.out, second) == printed_hash(r1.out, first));

    const std::string third = dir.file("bench3.json");
    const auto r3 = run_cli({"gen", "--seed", "43", "--companies", "19", "--years", "2019:2023",
                             "-o", third});
    CHECK(r3.code == 0);
    CHECK(printed_hash(r3.out, third) != printed_hash(r1.out, first));
}

TEST_CASE("gen rejects bad flags with exit 2") {
    TempDir dir("gen-usage");
    const std::string out = dir.file("x.json");

    const auto missing_seed = run_cli({"gen", "--companies", "2", "-o", out});
    CHECK(missing_seed.code == 2);
    CHECK(missing_seed.err.find("--seed") != std::string::npos);
    CHECK_FALSE(fs::exists(out));

    CHECK(run_cli({"gen", "--seed", "1", "--years", "2023:2019", "-o", out}).code == 2);
    CHECK(run_cli({"gen", "--seed", "1", "--years", "2023", "-o", out}).code == 2);
    CHECK(run_cli({"gen", "--seed", "1", "--years", "a:b", "-o", out}).code == 2);
    CHECK(run_cli({"gen", "--seed", "1", "--companies", "0", "-o", out}).code == 2);
    CHECK(run_cli({"gen", "--seed", "1", "--noise", "loud", "-o", out}).code == 2);
    CHECK(run_cli({"gen", "--seed", "1", "--frobnicate", "-o", out}).code == 2);
    CHECK(run_cli({"frobnicate"}).code == 2);
    CHECK(run_cli({}).code == 2);
}

TEST_CASE("help and version exit 0") {
    const auto help = run_cli({"--help"});
    CHECK(help.code == 0);
    CHECK(help.out.find("gen") != std::string::npos);
    CHECK(help.out.find("oracle") != std::string::npos);

    const auto version = run_cli({"--version"});
    CHECK(version.code == 0);
    CHECK(version.out.find(cli::kToolVersion) != std::string::npos);

    const auto sub_help = run_cli({"gen", "--help"});
    CHECK(sub_help.code == 0);
    CHECK(sub_help.out.find("--seed") != std::string::npos);
}

TEST_CASE("run with the simulated backend writes records plus manifest") {
    TempDir dir("run-sim");
    const std::string instance_path = dir.file("bench.json");
    REQUIRE(run_cli({"gen", "--seed", "7", "--companies", "1", "--years", "2022:2023", "-o",
                     instance_path})
                .code == 0);

    const std::string records_path = dir.file("records.json");
    const std::vector<std::string> args{"run",        instance_path, "--sim",
                                        "--paradigm", "pot",         "-o",
                                        records_path};
    const auto r = run_cli(args);
    CAPTURE(r.err);
    CHECK(r.code == 0);
    CHECK(printed_hash(r.out, records_path) == file_hash(records_path));

    const auto run = harness::load_run(records_path);
    REQUIRE(run.records.size() == 14);
    for (const auto& rec : run.records) {
        CHECK(rec.correct);
        CHECK(rec.model_id == "sim");
    }

    const std::string manifest_path = records_path + ".manifest.json";
    REQUIRE(fs::exists(manifest_path));
    CHECK(printed_hash(r.out, manifest_path) == file_hash(manifest_path));
    const json manifest = json::parse(read_file(manifest_path));
    CHECK(manifest.at("format") == cli::kManifestFormat);
    CHECK(manifest.at("tool_version") == cli::kToolVersion);
    CHECK(manifest.at("command_line") == json(args));
    CHECK(manifest.at("instance").at("sha256") == file_hash(instance_path));
    CHECK(manifest.at("instance").at("queries") == 14);
    CHECK(manifest.at("seeds").at("instance") == 7);
    CHECK(manifest.at("backends").size() == 1);
    CHECK(manifest.at("backends")[0].at("model_id") == "sim");
    CHECK(manifest.at("backends")[0].at("kind") == "sim");
    const auto started = manifest.at("started_at").get<std::string>();
    CHECK(started.size() == 20);
    CHECK(started.back() == 'Z');
    CHECK(started.find('T') != std::string::npos);
}

TEST_CASE("run replays a recorded transcript byte for byte") {
    TempDir dir("run-replay");
    const std::string instance_path = dir.file("bench.json");
    REQUIRE(run_cli({"gen", "--seed", "9", "--companies", "1", "--years", "2022:2023", "-o",
                     instance_path})
                .code == 0);

    const std::string golden = dir.file("golden.json");
    const std::string live = dir.file("live.json");
    const auto recorded = run_cli({"run", instance_path, "--sim", "--model-id", "m1",
                                   "--paradigm", "pot", "--record", golden, "-o", live});
    CAPTURE(recorded.err);
    REQUIRE(recorded.code == 0);
    REQUIRE(fs::exists(golden));
    CHECK(printed_hash(recorded.out, golden) == file_hash(golden));
    CHECK(json::parse(read_file(golden)).size() > 0);

    const std::string replayed = dir.file("replayed.json");
    const auto replay = run_cli({"run", instance_path, "--transcript", golden, "--model-id", "m1",
                                 "--paradigm", "pot", "-o", replayed});
    CAPTURE(replay.err);
    CHECK(replay.code == 0);
    CHECK(read_file(replayed) == read_file(live));

    const std::string again = dir.file("again.json");
    CHECK(run_cli({"run", instance_path, "--transcript", golden, "--model-id", "m1", "--paradigm",
                   "pot", "-o", again})
              .code == 0);
    CHECK(read_file(again) == read_file(replayed));
}

TEST_CASE("run evaluates one record set per requested paradigm") {
    TempDir dir("run-paradigms");
    const std::string instance_path = dir.file("bench.json");
    REQUIRE(run_cli({"gen", "--seed", "3", "--companies", "1", "--years", "2022:2023", "-o",
                     instance_path})
                .code == 0);

    const std::string records_path = dir.file("records.json");
    const auto r = run_cli({"run", instance_path, "--sim", "--paradigm", "direct,cot,pot", "-o",
                            records_path});
    REQUIRE(r.code == 0);
    CHECK(harness::load_run(records_path).records.size() == 42);
}

TEST_CASE("run reports an unreachable endpoint as exit 1 with records on disk") {
    TempDir dir("run-http");
    const std::string instance_path = dir.file("bench.json");
    REQUIRE(run_cli({"gen", "--seed", "5", "--companies", "1", "--years", "2022:2023", "-o",
                     instance_path})
                .code == 0);

    // nothing listens on the discard port, so the first completion aborts
    setenv("CCB_LLM_ENDPOINT", "http://127.0.0.1:9", 1);
    setenv("CCB_LLM_MODEL", "test-model", 1);
    setenv("CCB_LLM_API_KEY", "test-key", 1);
    const std::string records_path = dir.file("records.json");
    const auto r = run_cli({"run", instance_path, "--paradigm", "pot", "-o", records_path});
    unsetenv("CCB_LLM_ENDPOINT");
    unsetenv("CCB_LLM_MODEL");
    unsetenv("CCB_LLM_API_KEY");

    CHECK(r.code == 1);
    CHECK(r.err.find("aborted") != std::string::npos);
    REQUIRE(fs::exists(records_path));
    const auto run = harness::load_run(records_path);
    CHECK(run.records.size() == 14);
    for (const auto& rec : run.records) CHECK_FALSE(rec.predicted.has_value());
    CHECK(run.metadata.at("aborted").size() == 1);
    CHECK(fs::exists(records_path + ".manifest.json"));

    const auto no_env = run_cli({"run", instance_path, "-o", dir.file("none.json")});
    CHECK(no_env.code == 1);
    CHECK(no_env.err.find("CCB_LLM_ENDPOINT") != std::string::npos);
}

TEST_CASE("run rejects conflicting or malformed flags with exit 2") {
    TempDir dir("run-usage");
    const std::string instance_path = dir.file("bench.json");
    REQUIRE(run_cli({"gen", "--seed", "4", "--companies", "1", "--years", "2022:2023", "-o",
                     instance_path})
                .code == 0);
    const std::string records_path = dir.file("records.json");

    CHECK(run_cli({"run", instance_path, "--sim", "--transcript", "t.json", "-o", records_path})
              .code == 2);
    CHECK(run_cli({"run", instance_path, "--sim", "--paradigm", "bogus", "-o", records_path})
              .code == 2);
    CHECK(run_cli({"run", instance_path, "--sim", "--jobs", "0", "-o", records_path}).code == 2);
    CHECK(run_cli({"run", instance_path, "--sim", "--max-depth", "11", "-o", records_path})
              .code == 2);
    CHECK(run_cli({"run", instance_path, "--sim-noise", "0.1", "-o", records_path}).code == 2);
    CHECK(run_cli({"run", instance_path, "--sim", "--sim-noise", "1.5", "-o", records_path})
              .code == 2);
    CHECK(run_cli({"run"}).code == 2);
    CHECK_FALSE(fs::exists(records_path));

    const auto missing = run_cli({"run", dir.file("absent.json"), "--sim", "-o", records_path});
    CHECK(missing.code == 1);
}

TEST_CASE("score emits every report format with printed hashes") {
    TempDir dir("score");
    const std::string instance_path = dir.file("bench.json");
    REQUIRE(run_cli({"gen", "--seed", "6", "--companies", "2", "--years", "2022:2023", "-o",
                     instance_path})
                .code == 0);
    const std::string records_path = dir.file("records.json");
    REQUIRE(run_cli({"run", instance_path, "--sim", "--paradigm", "direct,cot,pot", "-o",
                     records_path})
                .code == 0);

    const std::string out_dir = dir.file("out");
    const auto r = run_cli({"score", records_path, "-o", out_dir});
    CAPTURE(r.err);
    CHECK(r.code == 0);
    for (const char* name : {"report.json", "tables.csv", "curve.csv", "report.md"}) {
        const std::string path = out_dir + "/" + name;
        REQUIRE_MESSAGE(fs::exists(path), path);
        CHECK(printed_hash(r.out, path) == file_hash(path));
    }
    const std::string markdown = read_file(out_dir + "/report.md");
    CHECK(markdown.find("# Benchmark Report") != std::string::npos);
    CHECK(markdown.find("Direct Extraction") != std::string::npos);
    CHECK(markdown.find("Ambiguous Keys") != std::string::npos);
    CHECK(markdown.find("Currency (RMB)") != std::string::npos);
    CHECK(markdown.find("Total Average") != std::string::npos);

    CHECK(run_cli({"score", dir.file("absent.json"), "-o", out_dir}).code == 1);
    const std::string malformed = dir.file("malformed.json");
    write_file(malformed, "{}");
    CHECK(run_cli({"score", malformed, "-o", out_dir}).code == 1);
}

TEST_CASE("report emits only the selected formats") {
    TempDir dir("report");
    const std::string instance_path = dir.file("bench.json");
    REQUIRE(run_cli({"gen", "--seed", "8", "--companies", "1", "--years", "2022:2023", "-o",
                     instance_path})
                .code == 0);
    const std::string records_path = dir.file("records.json");
    REQUIRE(run_cli({"run", instance_path, "--sim", "--paradigm", "pot", "-o", records_path})
                .code == 0);

    const std::string md_dir = dir.file("md-only");
    REQUIRE(run_cli({"report", records_path, "-o", md_dir, "--format", "md"}).code == 0);
    CHECK(fs::exists(md_dir + "/report.md"));
    CHECK(std::distance(fs::directory_iterator(md_dir), fs::directory_iterator()) == 1);

    const std::string csv_dir = dir.file("csv-json");
    REQUIRE(run_cli({"report", records_path, "-o", csv_dir, "--format", "json,csv"}).code == 0);
    CHECK(fs::exists(csv_dir + "/report.json"));
    CHECK(fs::exists(csv_dir + "/tables.csv"));
    CHECK(fs::exists(csv_dir + "/curve.csv"));
    CHECK_FALSE(fs::exists(csv_dir + "/report.md"));

    CHECK(run_cli({"report", records_path, "-o", dir.file("x"), "--format", "bogus"}).code == 2);
}

TEST_CASE("oracle prints exact indicator values") {
    TempDir dir("oracle");
    const std::string fixture = write_oracle_fixture(dir);

    auto single = [&](const std::string& indicator) {
        return run_cli({"oracle", fixture, "--year", "2023", "--indicator", indicator});
    };
    CHECK(single("debt_ratio").out == "debt_ratio = 100.0%\n");
    CHECK(single("roe").out == "roe = 10.0%\n");
    CHECK(single("current_ratio").out == "current_ratio = 1.50\n");
    CHECK(single("quick_ratio").out == "quick_ratio = 1.40\n");
    CHECK(single("inventory_days").out == "inventory_days = 73.0 days\n");
    CHECK(single("ocf").out == "ocf = 12345\n");
    CHECK(single("debt_ratio").code == 0);

    const auto pair = run_cli({"oracle", fixture, "--year", "2023", "--indicator",
                               "debt_ratio,roe"});
    CHECK(pair.code == 0);
    CHECK(pair.out == "debt_ratio = 100.0%\nroe = 10.0%\n");

    const auto all = run_cli({"oracle", fixture, "--year", "2023"});
    CHECK(all.code == 0);
    const auto lines = split(all.out, '\n');
    CHECK(lines.size() == 15);  // 14 indicators plus the trailing empty split
    CHECK(all.out.find("asset_turnover = missing inputs:") != std::string::npos);
    CHECK(all.out.find("revenue") != std::string::npos);
}

TEST_CASE("oracle reports undefined, missing years, and bad inputs") {
    TempDir dir("oracle-edge");
    const json zero_doc{
        {"company_id", "z"},
        {"statements",
         json::array({statement_json("balance_sheet", 2023,
                                     {{statements::LineItemKey::total_assets, "0"},
                                      {statements::LineItemKey::total_liabilities, "0"}})})}};
    const std::string zero = dir.file("zero.json");
    write_file(zero, zero_doc.dump());
    const auto undefined =
        run_cli({"oracle", zero, "--year", "2023", "--indicator", "debt_ratio"});
    CHECK(undefined.code == 0);
    CHECK(undefined.out == "debt_ratio = undefined\n");

    const auto wrong_year =
        run_cli({"oracle", zero, "--year", "1999", "--indicator", "debt_ratio"});
    CHECK(wrong_year.code == 0);
    CHECK(wrong_year.out.find("debt_ratio = missing inputs:") != std::string::npos);

    CHECK(run_cli({"oracle", zero, "--year", "2023", "--indicator", "bogus"}).code == 2);
    CHECK(run_cli({"oracle", zero, "--year", "2023", "--scope", "galactic"}).code == 2);
    CHECK(run_cli({"oracle", zero}).code == 2);

    CHECK(run_cli({"oracle", dir.file("absent.json"), "--year", "2023"}).code == 1);
    const std::string broken = dir.file("broken.json");
    write_file(broken, "not json");
    CHECK(run_cli({"oracle", broken, "--year", "2023"}).code == 1);
}

}  // TEST_SUITE
