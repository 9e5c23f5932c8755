#pragma once
#include "ccb/decimal.hpp"

#include "json.hpp"

#include <compare>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ccb::statements {

// ---------------------------------------------------------------------------
// Canonical line-item vocabulary. The first 14 keys feed indicator formulas;
// the rest are realistic noise lines the generator can add without touching
// any formula input.

enum class LineItemKey {
    revenue,
    cogs,
    net_income,
    net_income_parent,
    total_assets,
    total_liabilities,
    current_assets,
    current_liabilities,
    inventory,
    accounts_receivable,
    parent_equity,
    total_equity,
    ocf,
    capex,
    // distractor pool
    goodwill,
    intangible_assets,
    prepaid_expenses,
    long_term_debt,
    short_term_borrowings,
    deferred_revenue,
    cash_and_equivalents,
    construction_in_progress,
    selling_expenses,
    admin_expenses,
    rd_expense,
    finance_expenses,
    income_tax_expense,
    operating_profit,
    gross_profit,
    investing_cf,
    financing_cf,
    depreciation_amortization,
    dividends_paid,
    taxes_paid,
};

constexpr int kLineItemKeyCount = 34;

std::string_view to_string(LineItemKey key);
std::optional<LineItemKey> key_from_string(std::string_view id);
/// Throws SchemaViolationError when id is not in the canonical vocabulary.
LineItemKey require_key(std::string_view id);

enum class StatementKind { BalanceSheet, IncomeStatement, CashFlowStatement };
enum class Scope { Consolidated, Parent };

std::string_view to_string(StatementKind kind);  // file tokens: "balance_sheet", ...
std::string_view to_string(Scope scope);         // "consolidated" | "parent"
std::optional<StatementKind> statement_kind_from_string(std::string_view s);
std::optional<Scope> scope_from_string(std::string_view s);

/// The statement a canonical key naturally lives on; used by the generator
/// and by indicator input specs.
StatementKind home_statement(LineItemKey key);

// ---------------------------------------------------------------------------

struct LineItem {
    std::string raw_label;
    std::optional<LineItemKey> key;  // set by resolution, absent after parse
    Decimal value;                   // exact, post magnitude-normalization
    int fiscal_year = 0;

    bool operator==(const LineItem&) const = default;
};

struct Statement {
    StatementKind kind = StatementKind::BalanceSheet;
    Scope scope = Scope::Consolidated;
    int fiscal_year = 0;
    std::string currency_unit = "CNY";
    std::vector<LineItem> items;

    bool operator==(const Statement&) const = default;
};

struct StatementRef {
    StatementKind kind;
    Scope scope;
    int fiscal_year;

    auto operator<=>(const StatementRef&) const = default;
};

/// One company's statements keyed by (kind, scope, fiscal year).
class StatementSet {
public:
    std::string company_id;

    /// Enforces item-year agreement, resolved-key uniqueness within the
    /// statement, and at most one statement per (kind, scope, year).
    void add(Statement st);

    const Statement* find(StatementKind kind, Scope scope, int year) const;
    const std::map<StatementRef, Statement>& all() const { return statements_; }

    bool operator==(const StatementSet&) const = default;

private:
    std::map<StatementRef, Statement> statements_;
};

// ---------------------------------------------------------------------------
// Alias resolution

enum class AliasTier { Explicit, Implicit, Ambiguous };

std::string_view to_string(AliasTier tier);
std::optional<AliasTier> alias_tier_from_string(std::string_view s);

struct AliasEntry {
    LineItemKey key;
    AliasTier tier;

    bool operator==(const AliasEntry&) const = default;
};

/// Exact-match lookup table from folded label text to canonical key. One
/// label maps to at most one key; semantic (fuzzy) mapping is deliberately
/// not done here.
class AliasTable {
public:
    /// Throws SchemaViolationError if the folded label is already mapped
    /// to a different entry.
    void add(std::string_view label, LineItemKey key, AliasTier tier);

    std::optional<AliasEntry> resolve(std::string_view raw_label) const;

    /// Display labels for a key at the given tier, insertion-ordered.
    /// Empty when the table has no alias at that tier.
    const std::vector<std::string>& labels_for(LineItemKey key, AliasTier tier) const;

    nlohmann::json to_json() const;
    static AliasTable from_json(const nlohmann::json& doc);

    /// Checks that every canonical key has at least one Explicit alias.
    void require_explicit_cover() const;

    /// Built-in table: canonical English labels (Explicit), standard
    /// synonyms and Chinese A-share display labels (Implicit), and indirect
    /// descriptions such as "Cash paid for fixed assets" (Ambiguous).
    static const AliasTable& builtin();

private:
    std::map<std::string, AliasEntry> by_folded_label_;
    // preserves un-folded display text for rendering
    std::map<std::pair<LineItemKey, AliasTier>, std::vector<std::string>> by_key_tier_;
};

/// Whitespace/case folding + exact lookup. Unresolved is a value, not an error.
std::optional<AliasEntry> resolve_label(std::string_view raw_label, const AliasTable& table);

// ---------------------------------------------------------------------------
// Parsing and queries

/// Statement-file money text: plain decimal, commas as thousands separators,
/// parentheses for negatives. Throws NumberFormatError.
Decimal parse_money(std::string_view text);

/// Parses the statement-file JSON schema. Labels are carried raw and left
/// unresolved. Throws SchemaViolationError / NumberFormatError.
StatementSet parse_statement_set(const nlohmann::json& doc);
StatementSet parse_statement_set_text(std::string_view json_text);

nlohmann::json to_json(const StatementSet& set);

/// Returns a copy with each item's key attached where the alias table
/// resolves its label. Throws SchemaViolationError if two items in one
/// statement resolve to the same key.
StatementSet resolve_statement_set(const StatementSet& set, const AliasTable& table);

/// Value of the resolved item housing `key` for that year/scope, scanning
/// statement kinds in enum order. MissingItem is the empty optional.
std::optional<Decimal> lookup(const StatementSet& set, LineItemKey key, int year, Scope scope);

/// (value(year-1) + value(year)) / 2 exactly; empty if either endpoint is missing.
std::optional<Decimal> average_balance(const StatementSet& set, LineItemKey key, int year,
                                       Scope scope);

}  // namespace ccb::statements
