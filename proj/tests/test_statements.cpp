#include "ccb/statements.hpp"

#include "ccb/errors.hpp"
#include "ccb/util.hpp"
#include "doctest.h"

#include <algorithm>

using namespace ccb;
using namespace ccb::statements;

namespace {

const char* kSmallFile = R"json({
  "company_id": "C001",
  "statements": [
    {
      "kind": "balance_sheet",
      "scope": "consolidated",
      "fiscal_year": 2023,
      "currency_unit": "CNY",
      "items": [
        {"label": "Total Assets", "value": "1,000.50"},
        {"label": "Total Liabilities", "value": "400.25"},
        {"label": "Total Equity", "value": "600.25"},
        {"label": "Inventory", "value": "120"},
        {"label": "Accounts Receivable", "value": "(80)"}
      ]
    }
  ]
})json";

Statement make_statement(StatementKind kind, Scope scope, int year,
                         std::vector<std::pair<LineItemKey, const char*>> entries) {
    Statement st;
    st.kind = kind;
    st.scope = scope;
    st.fiscal_year = year;
    for (auto& [key, value] : entries) {
        LineItem item;
        item.raw_label = std::string(to_string(key));
        item.key = key;
        item.value = Decimal::parse(value);
        item.fiscal_year = year;
        st.items.push_back(std::move(item));
    }
    return st;
}

}  // namespace

TEST_SUITE("statements") {

TEST_CASE("parse maps one balance sheet with five items") {
    StatementSet set = parse_statement_set_text(kSmallFile);
    CHECK(set.company_id == "C001");
    CHECK(set.all().size() == 1);
    const Statement* st = set.find(StatementKind::BalanceSheet, Scope::Consolidated, 2023);
    REQUIRE(st != nullptr);
    CHECK(st->items.size() == 5);
    CHECK(st->currency_unit == "CNY");
    for (const auto& item : st->items) {
        CHECK(!item.key.has_value());
        CHECK(item.fiscal_year == 2023);
    }
    CHECK(st->items[0].value == Decimal::parse("1000.50"));
    CHECK(st->items[4].value == Decimal::parse("-80"));
}

TEST_CASE("duplicate (kind, scope, year) rejects") {
    nlohmann::json doc = nlohmann::json::parse(kSmallFile);
    doc["statements"].push_back(doc["statements"][0]);
    CHECK_THROWS_AS(parse_statement_set(doc), SchemaViolationError);
}

TEST_CASE("missing fields and bad tokens reject") {
    nlohmann::json doc = nlohmann::json::parse(kSmallFile);
    SUBCASE("no company_id") {
        doc.erase("company_id");
        CHECK_THROWS_AS(parse_statement_set(doc), SchemaViolationError);
    }
    SUBCASE("unknown kind") {
        doc["statements"][0]["kind"] = "cash_flow_statement";
        CHECK_THROWS_AS(parse_statement_set(doc), SchemaViolationError);
    }
    SUBCASE("unknown scope") {
        doc["statements"][0]["scope"] = "group";
        CHECK_THROWS_AS(parse_statement_set(doc), SchemaViolationError);
    }
    SUBCASE("numeric value field") {
        doc["statements"][0]["items"][0]["value"] = 12.5;
        CHECK_THROWS_AS(parse_statement_set(doc), SchemaViolationError);
    }
    SUBCASE("unparseable value text") {
        doc["statements"][0]["items"][0]["value"] = "12..5";
        CHECK_THROWS_AS(parse_statement_set(doc), NumberFormatError);
    }
    SUBCASE("not json") {
        CHECK_THROWS_AS(parse_statement_set_text("{nope"), SchemaViolationError);
    }
}

TEST_CASE("money text accepts financial-report styles") {
    CHECK(parse_money("(1,234.56)") == Decimal::parse("-1234.56"));
    CHECK(parse_money("1,234,567.89") == Decimal::parse("1234567.89"));
    CHECK(parse_money("(500)") == Decimal::parse("-500"));
    CHECK(parse_money("-42.7") == Decimal::parse("-42.7"));
    CHECK(parse_money("  120 ") == Decimal::parse("120"));
    CHECK(parse_money("0.00") == Decimal());
}

TEST_CASE("money text rejects malformed input") {
    for (const char* bad : {"", "( 42", "(42", "(-42)", "(+42)", ",123", "123,", "12,34",
                            "1,,234", "1234,567", "1,234,56.7", "12.3,4", "4 2", "abc"}) {
        CAPTURE(bad);
        CHECK_THROWS_AS(parse_money(bad), NumberFormatError);
    }
}

TEST_CASE("label resolution against the builtin table") {
    const AliasTable& table = AliasTable::builtin();

    auto capex_hit = resolve_label("Cash paid for fixed assets", table);
    REQUIRE(capex_hit.has_value());
    CHECK(capex_hit->key == LineItemKey::capex);
    CHECK(capex_hit->tier == AliasTier::Ambiguous);

    auto assets_hit = resolve_label("Total Assets", table);
    REQUIRE(assets_hit.has_value());
    CHECK(assets_hit->key == LineItemKey::total_assets);
    CHECK(assets_hit->tier == AliasTier::Explicit);

    CHECK(!resolve_label("Gross widget spend", table).has_value());

    SUBCASE("folding ignores case and runs of whitespace") {
        auto folded = resolve_label("  total \t ASSETS ", table);
        REQUIRE(folded.has_value());
        CHECK(folded->key == LineItemKey::total_assets);
    }
    SUBCASE("chinese display labels resolve") {
        auto rev = resolve_label("营业收入", table);
        REQUIRE(rev.has_value());
        CHECK(rev->key == LineItemKey::revenue);
        CHECK(rev->tier == AliasTier::Implicit);

        auto cn_capex = resolve_label("购建固定资产、无形资产和其他长期资产支付的现金", table);
        REQUIRE(cn_capex.has_value());
        CHECK(cn_capex->key == LineItemKey::capex);
        CHECK(cn_capex->tier == AliasTier::Ambiguous);
    }
}

TEST_CASE("builtin table covers every key explicitly") {
    CHECK_NOTHROW(AliasTable::builtin().require_explicit_cover());
    for (int i = 0; i < kLineItemKeyCount; ++i) {
        auto key = static_cast<LineItemKey>(i);
        const auto& labels = AliasTable::builtin().labels_for(key, AliasTier::Explicit);
        REQUIRE(labels.size() >= 1);
        auto hit = AliasTable::builtin().resolve(labels[0]);
        REQUIRE(hit.has_value());
        CHECK(hit->key == key);
    }
}

TEST_CASE("alias table rejects one label mapped to two keys") {
    AliasTable table;
    table.add("Revenue", LineItemKey::revenue, AliasTier::Explicit);
    CHECK_THROWS_AS(table.add("revenue  ", LineItemKey::cogs, AliasTier::Explicit),
                    SchemaViolationError);
    // re-adding the identical mapping is a no-op
    CHECK_NOTHROW(table.add("REVENUE", LineItemKey::revenue, AliasTier::Explicit));
}

TEST_CASE("alias table json round-trip") {
    const AliasTable& original = AliasTable::builtin();
    AliasTable reloaded = AliasTable::from_json(original.to_json());
    for (const char* label : {"Total Assets", "营业收入", "Cash paid for fixed assets",
                              "Net profit attributable to shareholders of the parent company"}) {
        CAPTURE(label);
        CHECK(reloaded.resolve(label) == original.resolve(label));
    }
    CHECK(reloaded.to_json() == original.to_json());

    SUBCASE("table missing explicit cover rejects") {
        nlohmann::json doc = {{"Some lone label", {{"key", "revenue"}, {"tier", "implicit"}}}};
        CHECK_THROWS_AS(AliasTable::from_json(doc), SchemaViolationError);
    }
}

TEST_CASE("lookup returns housed values and MissingItem") {
    StatementSet set;
    set.company_id = "C002";
    set.add(make_statement(StatementKind::CashFlowStatement, Scope::Consolidated, 2023,
                           {{LineItemKey::ocf, "500"}, {LineItemKey::capex, "210"}}));
    set.add(make_statement(StatementKind::BalanceSheet, Scope::Consolidated, 2022,
                           {{LineItemKey::inventory, "77.5"}}));
    set.add(make_statement(StatementKind::BalanceSheet, Scope::Consolidated, 2023,
                           {{LineItemKey::inventory, "90"}}));

    auto ocf = lookup(set, LineItemKey::ocf, 2023, Scope::Consolidated);
    REQUIRE(ocf.has_value());
    CHECK(*ocf == Decimal::parse("500"));

    CHECK(!lookup(set, LineItemKey::ocf, 2021, Scope::Consolidated).has_value());
    CHECK(!lookup(set, LineItemKey::ocf, 2023, Scope::Parent).has_value());
    CHECK(!lookup(set, LineItemKey::revenue, 2023, Scope::Consolidated).has_value());

    SUBCASE("year selection verified by independent scan") {
        auto got = lookup(set, LineItemKey::inventory, 2022, Scope::Consolidated);
        REQUIRE(got.has_value());

        std::optional<Decimal> scanned;
        int matches = 0;
        for (const auto& [ref, st] : set.all())
            for (const auto& item : st.items)
                if (item.key == LineItemKey::inventory && item.fiscal_year == 2022 &&
                    ref.scope == Scope::Consolidated) {
                    scanned = item.value;
                    ++matches;
                }
        CHECK(matches == 1);
        REQUIRE(scanned.has_value());
        CHECK(*got == *scanned);
        CHECK(*got == Decimal::parse("77.5"));
    }
}

TEST_CASE("average_balance midpoints") {
    StatementSet set;
    set.company_id = "C003";
    set.add(make_statement(StatementKind::BalanceSheet, Scope::Consolidated, 2022,
                           {{LineItemKey::inventory, "100"}, {LineItemKey::total_assets, "100"}}));
    set.add(make_statement(StatementKind::BalanceSheet, Scope::Consolidated, 2023,
                           {{LineItemKey::inventory, "140"}, {LineItemKey::total_assets, "100"}}));

    auto avg = average_balance(set, LineItemKey::inventory, 2023, Scope::Consolidated);
    REQUIRE(avg.has_value());
    // independent arithmetic: (100 + 140) / 2 over plain integers
    CHECK(*avg == Decimal((100 + 140) / 2));
    CHECK(avg->to_string() == "120");

    auto flat = average_balance(set, LineItemKey::total_assets, 2023, Scope::Consolidated);
    REQUIRE(flat.has_value());
    CHECK(*flat == Decimal(100));

    CHECK(!average_balance(set, LineItemKey::inventory, 2022, Scope::Consolidated).has_value());
    CHECK(!average_balance(set, LineItemKey::ocf, 2023, Scope::Consolidated).has_value());
}

TEST_CASE("statement invariants reject inconsistent construction") {
    StatementSet set;
    set.company_id = "C004";
    SUBCASE("item year disagrees") {
        Statement st = make_statement(StatementKind::BalanceSheet, Scope::Consolidated, 2023,
                                      {{LineItemKey::inventory, "1"}});
        st.items[0].fiscal_year = 2022;
        CHECK_THROWS_AS(set.add(std::move(st)), SchemaViolationError);
    }
    SUBCASE("same key twice in one statement") {
        Statement st = make_statement(
            StatementKind::BalanceSheet, Scope::Consolidated, 2023,
            {{LineItemKey::inventory, "1"}, {LineItemKey::inventory, "2"}});
        CHECK_THROWS_AS(set.add(std::move(st)), SchemaViolationError);
    }
    SUBCASE("unresolved duplicates are allowed") {
        Statement st;
        st.kind = StatementKind::BalanceSheet;
        st.scope = Scope::Consolidated;
        st.fiscal_year = 2023;
        for (int i = 0; i < 2; ++i)
            st.items.push_back(LineItem{"mystery line", std::nullopt, Decimal(i), 2023});
        CHECK_NOTHROW(set.add(std::move(st)));
    }
}

TEST_CASE("resolution attaches keys and re-checks uniqueness") {
    StatementSet raw = parse_statement_set_text(kSmallFile);
    StatementSet resolved = resolve_statement_set(raw, AliasTable::builtin());
    const Statement* st = resolved.find(StatementKind::BalanceSheet, Scope::Consolidated, 2023);
    REQUIRE(st != nullptr);
    CHECK(st->items[0].key == LineItemKey::total_assets);
    CHECK(st->items[3].key == LineItemKey::inventory);

    SUBCASE("two labels for the same key in one statement reject") {
        nlohmann::json doc = nlohmann::json::parse(kSmallFile);
        doc["statements"][0]["items"].push_back({{"label", "资产总计"}, {"value", "1000.50"}});
        StatementSet clashing = parse_statement_set(doc);
        CHECK_THROWS_AS(resolve_statement_set(clashing, AliasTable::builtin()),
                        SchemaViolationError);
    }
    SUBCASE("unknown labels stay unresolved") {
        nlohmann::json doc = nlohmann::json::parse(kSmallFile);
        doc["statements"][0]["items"].push_back({{"label", "Gross widget spend"},
                                                 {"value", "3"}});
        StatementSet extra = resolve_statement_set(parse_statement_set(doc),
                                                   AliasTable::builtin());
        const Statement* bs = extra.find(StatementKind::BalanceSheet, Scope::Consolidated, 2023);
        REQUIRE(bs != nullptr);
        CHECK(!bs->items.back().key.has_value());
    }
}

TEST_CASE("round-trip through json is structurally exact") {
    StatementSet first = parse_statement_set_text(kSmallFile);
    StatementSet second = parse_statement_set(to_json(first));
    CHECK(first == second);
    CHECK(to_json(first).dump() == to_json(second).dump());
}

TEST_CASE("vocabulary ids map both ways") {
    for (int i = 0; i < kLineItemKeyCount; ++i) {
        auto key = static_cast<LineItemKey>(i);
        auto back = key_from_string(to_string(key));
        REQUIRE(back.has_value());
        CHECK(*back == key);
    }
    CHECK(!key_from_string("ebitda").has_value());
    CHECK_THROWS_AS(require_key("ebitda"), SchemaViolationError);
    CHECK(require_key("capex") == LineItemKey::capex);

    for (auto kind : {StatementKind::BalanceSheet, StatementKind::IncomeStatement,
                      StatementKind::CashFlowStatement})
        CHECK(statement_kind_from_string(to_string(kind)) == kind);
    for (auto scope : {Scope::Consolidated, Scope::Parent})
        CHECK(scope_from_string(to_string(scope)) == scope);
}

TEST_CASE("randomized sets: average_balance agrees with a raw scan") {
    Rng rng(77001);
    const std::array<LineItemKey, 6> balance_keys{
        LineItemKey::total_assets,  LineItemKey::inventory,
        LineItemKey::current_assets, LineItemKey::accounts_receivable,
        LineItemKey::parent_equity, LineItemKey::total_equity};

    for (int trial = 0; trial < 200; ++trial) {
        StatementSet set;
        set.company_id = "R" + std::to_string(trial);
        for (int year = 2021; year <= 2023; ++year) {
            if (rng.bernoulli(0.2)) continue;  // some years have no balance sheet
            Statement st;
            st.kind = StatementKind::BalanceSheet;
            st.scope = Scope::Consolidated;
            st.fiscal_year = year;
            for (auto key : balance_keys) {
                if (rng.bernoulli(0.25)) continue;  // some items missing
                LineItem item;
                item.raw_label = std::string(to_string(key));
                item.key = key;
                item.value = Decimal::scaled(rng.range(-1000000, 1000000), -2);
                item.fiscal_year = year;
                st.items.push_back(std::move(item));
            }
            set.add(std::move(st));
        }

        for (auto key : balance_keys) {
            for (int year = 2021; year <= 2024; ++year) {
                std::optional<Decimal> open, close;
                for (const auto& [ref, st] : set.all())
                    for (const auto& item : st.items) {
                        if (item.key != key || ref.scope != Scope::Consolidated) continue;
                        if (item.fiscal_year == year - 1) open = item.value;
                        if (item.fiscal_year == year) close = item.value;
                    }
                std::optional<Decimal> expected;
                if (open && close) expected = (*open + *close).divide(Decimal(2));

                auto got = average_balance(set, key, year, Scope::Consolidated);
                CHECK(got == expected);
            }
        }
    }
}

}  // TEST_SUITE
