#pragma once
#include "ccb/decimal.hpp"
#include "ccb/statements.hpp"

#include "json.hpp"

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace ccb::indicators {

enum class IndicatorId {
    roe,
    roa,
    gross_margin,
    net_margin,
    debt_ratio,
    current_ratio,
    quick_ratio,
    asset_turnover,
    inventory_days,
    ar_days,
    revenue_growth,
    net_profit_growth,
    ocf,
    fcf,
};

constexpr int kIndicatorCount = 14;

constexpr std::array<IndicatorId, kIndicatorCount> all_indicators() {
    return {IndicatorId::roe,           IndicatorId::roa,
            IndicatorId::gross_margin,  IndicatorId::net_margin,
            IndicatorId::debt_ratio,    IndicatorId::current_ratio,
            IndicatorId::quick_ratio,   IndicatorId::asset_turnover,
            IndicatorId::inventory_days, IndicatorId::ar_days,
            IndicatorId::revenue_growth, IndicatorId::net_profit_growth,
            IndicatorId::ocf,           IndicatorId::fcf};
}

enum class SourceTag { DirectExtraction, IntraTable, CrossTable };
enum class DifficultyTag { Explicit, Implicit, MultiStep, Ambiguous };
enum class UnitKind { Percentage, Ratio, Days, Currency };

struct CCBTags {
    SourceTag source;
    DifficultyTag difficulty;
    UnitKind unit;

    bool operator==(const CCBTags&) const = default;
};

std::string_view to_string(IndicatorId id);
std::optional<IndicatorId> indicator_from_string(std::string_view id);
IndicatorId require_indicator(std::string_view id);

std::string_view to_string(SourceTag tag);      // "direct_extraction", ...
std::string_view to_string(DifficultyTag tag);  // "explicit", ...
std::string_view to_string(UnitKind unit);      // "percentage", ...
std::optional<SourceTag> source_from_string(std::string_view s);
std::optional<DifficultyTag> difficulty_from_string(std::string_view s);
std::optional<UnitKind> unit_from_string(std::string_view s);

std::string_view display_name(IndicatorId id);    // "ROE", "Gross Margin", ...
std::string_view display_name(SourceTag tag);     // "Direct", "Intra-table", "Cross-table"
std::string_view display_name(DifficultyTag tag); // "Explicit", ..., "Multi-step"
std::string_view display_name(UnitKind unit);     // "Percentage", "Ratio", "Days", "Currency"

/// Fixed classification of each indicator.
CCBTags classify(IndicatorId id);

/// "Unit / Source / Difficulty" display triple, e.g.
/// "Percentage / Cross-table / Ambiguous".
std::string classification_triple(IndicatorId id);

struct RequiredInput {
    statements::LineItemKey key;
    int year_offset;  // 0 = queried year, -1 = prior year
    statements::StatementKind kind;

    bool operator==(const RequiredInput&) const = default;
};

/// Minimal variable set the formula consumes, in formula order.
std::span<const RequiredInput> required_inputs(IndicatorId id);

/// DSL variable name an input binds to: the key id, with "_prev" appended
/// for the prior-year offset.
std::string input_var_name(const RequiredInput& input);

/// The indicator formula as a calculation-DSL expression over the
/// input_var_name bindings.
std::string_view formula_dsl(IndicatorId id);

struct IndicatorValue {
    Decimal value;  // percentages as fractions: 0.10 means 10%
    UnitKind unit;
    int year = 0;

    bool operator==(const IndicatorValue&) const = default;
};

struct MissingItem {
    std::vector<statements::LineItemKey> keys;  // which inputs were absent

    bool operator==(const MissingItem&) const = default;
};

struct Undefined {
    bool operator==(const Undefined&) const = default;
};

using ComputeOutcome = std::variant<IndicatorValue, MissingItem, Undefined>;

struct ExtractedInput {
    std::string var_name;
    RequiredInput spec;
    Decimal value;
};

/// Pulls every required input out of the statement set. Average-balance
/// and growth inputs appear as explicit "_prev" bindings. The net-income
/// numerator prefers the attributable-to-parent line when present.
std::variant<std::vector<ExtractedInput>, MissingItem> extract_inputs(
    IndicatorId id, const statements::StatementSet& set, int year, statements::Scope scope);

/// Exact-decimal evaluation of the indicator formula. Undefined signals a
/// zero denominator; MissingItem lists the absent inputs.
ComputeOutcome compute_indicator(IndicatorId id, const statements::StatementSet& set, int year,
                                 statements::Scope scope);

/// Indicator metadata (classification, formula text, inputs) as JSON.
nlohmann::json metadata_manifest();

}  // namespace ccb::indicators
