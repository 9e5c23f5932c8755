#include "doctest.h"

#include "ccb/calcdsl.hpp"
#include "ccb/errors.hpp"
#include "ccb/schema.hpp"
#include "ccb/util.hpp"

#include "oracle_ref.hpp"

#include <string>
#include <vector>

using namespace ccb;
using namespace ccb::schema;

namespace {

Decimal dec(std::string_view text) { return Decimal::parse(text); }

const std::string kRoeBlock =
    "===SCHEMA===\n"
    "TARGETS: roe\n"
    "VAR net_income = 12 # income_statement/consolidated/2023/Net income\n"
    "VAR eq_prev = 100 # balance_sheet/consolidated/2022/Total equity\n"
    "VAR eq_cur = 140\n"
    "FORMULA roe = net_income / avg(eq_prev, eq_cur)\n"
    "===END===\n";

bool has_defect(const std::vector<Defect>& defects, DefectKind kind,
                std::string_view subject) {
    for (const Defect& d : defects)
        if (d.kind == kind && d.subject == subject) return true;
    return false;
}

}  // namespace

TEST_SUITE("schema") {

TEST_CASE("normalize_magnitude applies the scale table") {
    NormalizedLiteral ten_billion = normalize_magnitude("10 billion");
    CHECK(ten_billion.value == dec("10000000000"));
    CHECK(ten_billion.scale_applied == Decimal::scaled(1, 9));
    CHECK(ten_billion.original_text == "10 billion");

    NormalizedLiteral zero = normalize_magnitude("0");
    CHECK(zero.value == Decimal(0));
    CHECK(zero.scale_applied == Decimal(1));

    NormalizedLiteral yi = normalize_magnitude("3.5亿");
    CHECK(yi.value == dec("350000000"));
    CHECK(yi.scale_applied == Decimal::scaled(1, 8));

    NormalizedLiteral wan = normalize_magnitude("(1,234.56)万");
    CHECK(wan.value == dec("-12345600"));
    CHECK(wan.value == Decimal::parse("-1234.56") * Decimal::scaled(1, 4));

    CHECK(normalize_magnitude("1,234.5 thousand").value == dec("1234500"));
    CHECK(normalize_magnitude("2 Million").value == dec("2000000"));
    CHECK(normalize_magnitude("-3 million").value == dec("-3000000"));
    CHECK(normalize_magnitude("500万").value == dec("5000000"));
    CHECK(normalize_magnitude("500 万").value == dec("5000000"));
    CHECK(normalize_magnitude("742.15").value == dec("742.15"));
    CHECK(normalize_magnitude("742.15").scale_applied == Decimal(1));
    CHECK(normalize_magnitude(" (80)万 ").value == dec("-800000"));
}

TEST_CASE("normalize_magnitude rejects what it cannot prove") {
    auto reject = [](std::string_view text) {
        CAPTURE(text);
        CHECK_THROWS_AS(normalize_magnitude(text), NumberFormatError);
    };
    reject("");
    reject("   ");
    reject("3 million billion");
    reject("1000 thousand thousand");
    reject("3.5亿万");
    reject("10billion");  // scale words are separate tokens
    reject("万");
    reject("billion");
    reject("abc");
    reject("12 bazillion");
    reject("(1,23.4)万");
    reject("--5");
    reject("(-5)万");
}

TEST_CASE("normalize_magnitude is idempotent on canonical renderings") {
    std::vector<std::string> inputs{"10 billion", "0",      "3.5亿",  "(1,234.56)万",
                                    "-0.375",     "742.15", "500万", "(9,000) thousand"};
    for (const std::string& input : inputs) {
        CAPTURE(input);
        NormalizedLiteral first = normalize_magnitude(input);
        NormalizedLiteral again = normalize_magnitude(first.value.to_string());
        CHECK(again.value == first.value);
        CHECK(again.scale_applied == Decimal(1));
    }

    Rng rng(660913);
    for (int trial = 0; trial < 300; ++trial) {
        Decimal value = Decimal::scaled(rng.range(-5'000'000'000, 5'000'000'000),
                                        -static_cast<int>(rng.below(5)));
        NormalizedLiteral normalized = normalize_magnitude(value.to_string());
        CHECK(normalized.value == value);
    }
}

TEST_CASE("well-formed block parses clean") {
    ParsedSchema parsed = parse_schema(kRoeBlock);
    CHECK(parsed.defects.empty());

    const CalculationSchema& s = parsed.schema;
    REQUIRE(s.targets.size() == 1);
    CHECK(s.targets[0] == indicators::IndicatorId::roe);
    REQUIRE(s.bindings.size() == 3);
    CHECK(s.bindings[0].name == "net_income");
    CHECK(s.bindings[0].literal.value == Decimal(12));
    REQUIRE(s.bindings[0].provenance.has_value());
    CHECK(s.bindings[0].provenance->kind == statements::StatementKind::IncomeStatement);
    CHECK(s.bindings[0].provenance->scope == statements::Scope::Consolidated);
    CHECK(s.bindings[0].provenance->fiscal_year == 2023);
    CHECK(s.bindings[0].provenance->raw_label == "Net income");
    CHECK(s.bindings[1].literal.value == Decimal(100));
    CHECK(!s.bindings[2].provenance.has_value());
    REQUIRE(s.formulas.size() == 1);
    CHECK(s.formulas[0].first == indicators::IndicatorId::roe);
    CHECK(s.formulas[0].second == "net_income / avg(eq_prev, eq_cur)");
}

TEST_CASE("prose around the fences is ignored") {
    std::string wrapped = "Sure, here is the schema you asked for.\n" + kRoeBlock +
                          "Let me know if anything needs adjusting.\n";
    ParsedSchema parsed = parse_schema(wrapped);
    CHECK(parsed.defects.empty());
    CHECK(parsed.schema == parse_schema(kRoeBlock).schema);
}

TEST_CASE("unbound identifier is a defect, not a crash") {
    std::string block =
        "===SCHEMA===\n"
        "TARGETS: net_margin\n"
        "VAR net_income = 12\n"
        "VAR revenue = 80\n"
        "FORMULA net_margin = net_income / revnue\n"
        "===END===\n";
    ParsedSchema parsed = parse_schema(block);
    REQUIRE(parsed.defects.size() == 1);
    CHECK(parsed.defects[0].kind == DefectKind::UnboundIdentifier);
    CHECK(parsed.defects[0].subject == "revnue");
}

TEST_CASE("duplicate binding is a defect") {
    std::string block =
        "===SCHEMA===\n"
        "TARGETS: ocf\n"
        "VAR ocf_value = 10\n"
        "VAR ocf_value = 11\n"
        "FORMULA ocf = ocf_value\n"
        "===END===\n";
    ParsedSchema parsed = parse_schema(block);
    REQUIRE(parsed.defects.size() == 1);
    CHECK(parsed.defects[0] ==
          Defect{DefectKind::DuplicateBinding, "ocf_value", "bound more than once"});
}

TEST_CASE("formula syntax defect comes from the DSL grammar") {
    CalculationSchema s;
    s.targets = {indicators::IndicatorId::roe};
    s.bindings.push_back({"a", {Decimal(1), "1", Decimal(1)}, std::nullopt});
    s.bindings.push_back({"b", {Decimal(2), "2", Decimal(1)}, std::nullopt});
    s.formulas.emplace_back(indicators::IndicatorId::roe, "a +* b");
    std::vector<Defect> defects = validate_schema(s);
    REQUIRE(defects.size() == 1);
    CHECK(defects[0].kind == DefectKind::FormulaSyntax);
    CHECK(defects[0].subject == "roe");

    s.formulas[0].second = "a + b";
    CHECK(validate_schema(s).empty());
}

TEST_CASE("unusable section structure throws") {
    CHECK_THROWS_AS(parse_schema("TARGETS: roe\n"), SchemaParseError);
    CHECK_THROWS_AS(parse_schema("===SCHEMA===\nTARGETS: roe\n"), SchemaParseError);
    CHECK_THROWS_AS(parse_schema("===SCHEMA===\nTARGETS:\n===END===\n"), SchemaParseError);
    CHECK_THROWS_AS(parse_schema("===SCHEMA===\nVAR a = 1\n===END===\n"), SchemaParseError);
    CHECK_THROWS_AS(
        parse_schema("===SCHEMA===\nTARGETS: roe\nTARGETS: roa\n===END===\n"),
        SchemaParseError);
    CHECK_THROWS_AS(parse_schema("===SCHEMA===\nTARGETS: roee\n===END===\n"),
                    SchemaParseError);
    CHECK_THROWS_AS(parse_schema("===SCHEMA===\nTARGETS: roe, roe\n===END===\n"),
                    SchemaParseError);
    CHECK_THROWS_AS(parse_schema("===SCHEMA===\nTARGETS: roe,,roa\n===END===\n"),
                    SchemaParseError);
}

TEST_CASE("recoverable line problems become defects") {
    std::string block =
        "===SCHEMA===\n"
        "TARGETS: roe, ocf\n"
        "NOTE: just thinking out loud\n"
        "VAR x 12\n"
        "VARx = 2\n"
        "VAR Bad = 3\n"
        "VAR avg = 4\n"
        "VAR DAYS = 5\n"
        "VAR y = 12 bazillion\n"
        "VAR eq = 100\n"
        "VAR eq2 = 140\n"
        "VAR ni = 12\n"
        "FORMULA roee = ni\n"
        "FORMULA roe = ni / avg(eq, eq2)\n"
        "FORMULA ocf = ni\n"
        "FORMULA ocf = ni + 0\n"
        "===END===\n";
    ParsedSchema parsed = parse_schema(block);
    const auto& d = parsed.defects;
    CHECK(has_defect(d, DefectKind::UnknownLine, "NOTE: just thinking out loud"));
    CHECK(has_defect(d, DefectKind::UnknownLine, "VAR x 12"));
    CHECK(has_defect(d, DefectKind::UnknownLine, "VARx = 2"));
    CHECK(has_defect(d, DefectKind::BadVarName, "Bad"));
    CHECK(has_defect(d, DefectKind::BadVarName, "avg"));
    CHECK(has_defect(d, DefectKind::BadVarName, "DAYS"));
    CHECK(has_defect(d, DefectKind::BadNumber, "y"));
    CHECK(has_defect(d, DefectKind::UnknownTarget, "roee"));
    CHECK(has_defect(d, DefectKind::DuplicateFormula, "ocf"));
    CHECK(d.size() == 9);

    // the usable part of the block still came through
    CHECK(parsed.schema.bindings.size() == 3);
    CHECK(parsed.schema.formulas.size() == 3);
}

TEST_CASE("missing and stray formulas are defects") {
    std::string block =
        "===SCHEMA===\n"
        "TARGETS: roe, roa\n"
        "VAR ni = 12\n"
        "VAR eq = 100\n"
        "FORMULA roe = ni / eq\n"
        "FORMULA ocf = ni\n"
        "===END===\n";
    ParsedSchema parsed = parse_schema(block);
    CHECK(has_defect(parsed.defects, DefectKind::MissingFormula, "roa"));
    CHECK(has_defect(parsed.defects, DefectKind::UnknownTarget, "ocf"));
    CHECK(parsed.defects.size() == 2);
}

TEST_CASE("provenance comment is structured or absent") {
    std::string block =
        "===SCHEMA===\n"
        "TARGETS: ocf\n"
        "VAR a = 1 # hello world\n"
        "VAR b = 2 # cash_flow/parent/2022/经营活动产生的现金流量净额\n"
        "VAR c = 3 # balance_sheet/consolidated/2022/Other assets / misc\n"
        "VAR d = 4 # balance_sheet/consolidated/20x2/Label\n"
        "FORMULA ocf = a + b + c + d\n"
        "===END===\n";
    ParsedSchema parsed = parse_schema(block);
    CHECK(parsed.defects.empty());
    REQUIRE(parsed.schema.bindings.size() == 4);
    CHECK(!parsed.schema.bindings[0].provenance.has_value());
    REQUIRE(parsed.schema.bindings[1].provenance.has_value());
    CHECK(parsed.schema.bindings[1].provenance->kind ==
          statements::StatementKind::CashFlowStatement);
    CHECK(parsed.schema.bindings[1].provenance->scope == statements::Scope::Parent);
    CHECK(parsed.schema.bindings[1].provenance->raw_label == "经营活动产生的现金流量净额");
    REQUIRE(parsed.schema.bindings[2].provenance.has_value());
    CHECK(parsed.schema.bindings[2].provenance->raw_label == "Other assets / misc");
    CHECK(!parsed.schema.bindings[3].provenance.has_value());
}

TEST_CASE("render and reparse round-trips the schema") {
    ParsedSchema parsed = parse_schema(kRoeBlock);
    std::string rendered = render_schema(parsed.schema);
    ParsedSchema again = parse_schema(rendered);
    CHECK(again.defects.empty());
    CHECK(again.schema == parsed.schema);

    CalculationSchema hand;
    hand.targets = {indicators::IndicatorId::fcf};
    hand.bindings.push_back({"ocf_v", {dec("0.125"), "", Decimal(1)}, std::nullopt});
    hand.bindings.push_back({"capex_v", {dec("-80"), "", Decimal(1)}, std::nullopt});
    hand.formulas.emplace_back(indicators::IndicatorId::fcf, "ocf_v - capex_v");
    ParsedSchema reparsed = parse_schema(render_schema(hand));
    CHECK(reparsed.defects.empty());
    CHECK(reparsed.schema.bindings[0].literal.value == dec("0.125"));
    CHECK(reparsed.schema.bindings[1].literal.value == dec("-80"));
}

TEST_CASE("clean schema executes without name or syntax exceptions") {
    ParsedSchema parsed = parse_schema(kRoeBlock);
    REQUIRE(parsed.defects.empty());

    std::string program_text;
    for (auto& [id, formula] : parsed.schema.formulas) {
        program_text += std::string(indicators::to_string(id)) + " = " + formula + "\n";
        program_text += "output " + std::string(indicators::to_string(id)) + "\n";
    }
    auto result = calcdsl::parse_dsl(program_text);
    REQUIRE(std::holds_alternative<calcdsl::DslProgram>(result));
    const auto& program = std::get<calcdsl::DslProgram>(result);
    calcdsl::ExecutionOutcome outcome =
        calcdsl::execute(program, binding_env(parsed.schema));
    CHECK(outcome.exceptions.empty());
    CHECK(outcome.results.at("roe") == dec("0.1"));
}

TEST_CASE("an all-indicator schema built from extraction matches compute") {
    Rng rng(230517);
    ref::RandomSetOptions opt;
    opt.with_parent_net_income = false;  // one shared net_income binding
    statements::StatementSet set = ref::random_consistent_set(rng, opt);

    CalculationSchema s;
    std::map<std::string, Decimal> merged;
    for (indicators::IndicatorId id : indicators::all_indicators()) {
        s.targets.push_back(id);
        s.formulas.emplace_back(id, std::string(indicators::formula_dsl(id)));
        auto extracted =
            indicators::extract_inputs(id, set, 2023, statements::Scope::Consolidated);
        auto& inputs = std::get<std::vector<indicators::ExtractedInput>>(extracted);
        for (const auto& input : inputs) merged[input.var_name] = input.value;
    }
    for (const auto& [name, value] : merged)
        s.bindings.push_back({name, {value, value.to_string(), Decimal(1)}, std::nullopt});

    CHECK(validate_schema(s).empty());

    std::string program_text;
    for (auto& [id, formula] : s.formulas) {
        program_text += std::string(indicators::to_string(id)) + " = " + formula + "\n";
        program_text += "output " + std::string(indicators::to_string(id)) + "\n";
    }
    auto program = std::get<calcdsl::DslProgram>(calcdsl::parse_dsl(program_text));
    calcdsl::ExecutionOutcome outcome = calcdsl::execute(program, binding_env(s));
    REQUIRE(outcome.exceptions.empty());
    for (indicators::IndicatorId id : indicators::all_indicators()) {
        auto expected =
            indicators::compute_indicator(id, set, 2023, statements::Scope::Consolidated);
        auto& value = std::get<indicators::IndicatorValue>(expected);
        CAPTURE(indicators::to_string(id));
        CHECK(outcome.results.at(std::string(indicators::to_string(id))) == value.value);
    }
}

TEST_CASE("format_defects is deterministic and line oriented") {
    std::vector<Defect> defects{
        {DefectKind::UnboundIdentifier, "revnue", "referenced but never bound"},
        {DefectKind::MissingFormula, "roa", "target has no formula"},
    };
    std::string text = format_defects(defects);
    CHECK(text ==
          "- UnboundIdentifier: revnue: referenced but never bound\n"
          "- MissingFormula: roa: target has no formula\n");
    CHECK(format_defects(defects) == text);
}

}  // TEST_SUITE
