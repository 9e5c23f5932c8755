#include "ccb/indicators.hpp"

#include "ccb/errors.hpp"

#include <array>

namespace ccb::indicators {

namespace {

using statements::LineItemKey;
using statements::Scope;
using statements::StatementKind;

constexpr auto IS = StatementKind::IncomeStatement;
constexpr auto BS = StatementKind::BalanceSheet;
constexpr auto CFS = StatementKind::CashFlowStatement;

struct IndicatorInfo {
    IndicatorId id;
    std::string_view id_str;
    std::string_view display;
    CCBTags tags;
    std::string_view formula;
    std::vector<RequiredInput> inputs;
};

const std::array<IndicatorInfo, kIndicatorCount>& table() {
    using enum SourceTag;
    using enum DifficultyTag;
    using enum UnitKind;
    using K = LineItemKey;
    static const std::array<IndicatorInfo, kIndicatorCount> t{{
        {IndicatorId::roe, "roe", "ROE", {CrossTable, Ambiguous, Percentage},
         "net_income / avg(parent_equity_prev, parent_equity)",
         {{K::net_income, 0, IS}, {K::parent_equity, -1, BS}, {K::parent_equity, 0, BS}}},
        {IndicatorId::roa, "roa", "ROA", {CrossTable, Implicit, Percentage},
         "net_income / avg(total_assets_prev, total_assets)",
         {{K::net_income, 0, IS}, {K::total_assets, -1, BS}, {K::total_assets, 0, BS}}},
        {IndicatorId::gross_margin, "gross_margin", "Gross Margin",
         {IntraTable, Implicit, Percentage},
         "(revenue - cogs) / revenue",
         {{K::revenue, 0, IS}, {K::cogs, 0, IS}}},
        {IndicatorId::net_margin, "net_margin", "Net Margin", {IntraTable, Implicit, Percentage},
         "net_income / revenue",
         {{K::net_income, 0, IS}, {K::revenue, 0, IS}}},
        {IndicatorId::debt_ratio, "debt_ratio", "Debt Ratio", {IntraTable, Implicit, Percentage},
         "total_liabilities / total_assets",
         {{K::total_liabilities, 0, BS}, {K::total_assets, 0, BS}}},
        {IndicatorId::current_ratio, "current_ratio", "Current Ratio",
         {IntraTable, Implicit, Ratio},
         "current_assets / current_liabilities",
         {{K::current_assets, 0, BS}, {K::current_liabilities, 0, BS}}},
        {IndicatorId::quick_ratio, "quick_ratio", "Quick Ratio", {IntraTable, Implicit, Ratio},
         "(current_assets - inventory) / current_liabilities",
         {{K::current_assets, 0, BS}, {K::inventory, 0, BS}, {K::current_liabilities, 0, BS}}},
        {IndicatorId::asset_turnover, "asset_turnover", "Asset Turnover",
         {CrossTable, Implicit, Ratio},
         "revenue / avg(total_assets_prev, total_assets)",
         {{K::revenue, 0, IS}, {K::total_assets, -1, BS}, {K::total_assets, 0, BS}}},
        {IndicatorId::inventory_days, "inventory_days", "Inventory Turnover Days",
         {CrossTable, MultiStep, Days},
         "avg(inventory_prev, inventory) * DAYS / cogs",
         {{K::inventory, -1, BS}, {K::inventory, 0, BS}, {K::cogs, 0, IS}}},
        {IndicatorId::ar_days, "ar_days", "AR Turnover Days", {CrossTable, MultiStep, Days},
         "avg(accounts_receivable_prev, accounts_receivable) * DAYS / revenue",
         {{K::accounts_receivable, -1, BS}, {K::accounts_receivable, 0, BS},
          {K::revenue, 0, IS}}},
        {IndicatorId::revenue_growth, "revenue_growth", "Revenue Growth",
         {IntraTable, Implicit, Percentage},
         "(revenue - revenue_prev) / revenue_prev",
         {{K::revenue, 0, IS}, {K::revenue, -1, IS}}},
        {IndicatorId::net_profit_growth, "net_profit_growth", "Net Profit Growth",
         {IntraTable, Implicit, Percentage},
         "(net_income - net_income_prev) / net_income_prev",
         {{K::net_income, 0, IS}, {K::net_income, -1, IS}}},
        {IndicatorId::ocf, "ocf", "OCF", {DirectExtraction, Explicit, Currency},
         "ocf",
         {{K::ocf, 0, CFS}}},
        {IndicatorId::fcf, "fcf", "FCF", {IntraTable, Ambiguous, Currency},
         "ocf - capex",
         {{K::ocf, 0, CFS}, {K::capex, 0, CFS}}},
    }};
    return t;
}

const IndicatorInfo& info(IndicatorId id) { return table()[static_cast<size_t>(id)]; }

Decimal avg2(const Decimal& a, const Decimal& b) { return (a + b).divide(Decimal(2)); }

const Decimal& kDays() {
    static const Decimal days(365);
    return days;
}

}  // namespace

std::string_view to_string(IndicatorId id) { return info(id).id_str; }

std::optional<IndicatorId> indicator_from_string(std::string_view id) {
    for (const auto& entry : table())
        if (entry.id_str == id) return entry.id;
    return std::nullopt;
}

IndicatorId require_indicator(std::string_view id) {
    if (auto found = indicator_from_string(id)) return *found;
    throw SchemaViolationError("unknown indicator: " + std::string(id));
}

std::string_view to_string(SourceTag tag) {
    switch (tag) {
        case SourceTag::DirectExtraction: return "direct_extraction";
        case SourceTag::IntraTable: return "intra_table";
        case SourceTag::CrossTable: return "cross_table";
    }
    return "";
}

std::string_view to_string(DifficultyTag tag) {
    switch (tag) {
        case DifficultyTag::Explicit: return "explicit";
        case DifficultyTag::Implicit: return "implicit";
        case DifficultyTag::MultiStep: return "multi_step";
        case DifficultyTag::Ambiguous: return "ambiguous";
    }
    return "";
}

std::string_view to_string(UnitKind unit) {
    switch (unit) {
        case UnitKind::Percentage: return "percentage";
        case UnitKind::Ratio: return "ratio";
        case UnitKind::Days: return "days";
        case UnitKind::Currency: return "currency";
    }
    return "";
}

std::optional<SourceTag> source_from_string(std::string_view s) {
    if (s == "direct_extraction") return SourceTag::DirectExtraction;
    if (s == "intra_table") return SourceTag::IntraTable;
    if (s == "cross_table") return SourceTag::CrossTable;
    return std::nullopt;
}

std::optional<DifficultyTag> difficulty_from_string(std::string_view s) {
    if (s == "explicit") return DifficultyTag::Explicit;
    if (s == "implicit") return DifficultyTag::Implicit;
    if (s == "multi_step") return DifficultyTag::MultiStep;
    if (s == "ambiguous") return DifficultyTag::Ambiguous;
    return std::nullopt;
}

std::optional<UnitKind> unit_from_string(std::string_view s) {
    if (s == "percentage") return UnitKind::Percentage;
    if (s == "ratio") return UnitKind::Ratio;
    if (s == "days") return UnitKind::Days;
    if (s == "currency") return UnitKind::Currency;
    return std::nullopt;
}

std::string_view display_name(IndicatorId id) { return info(id).display; }

std::string_view display_name(SourceTag tag) {
    switch (tag) {
        case SourceTag::DirectExtraction: return "Direct";
        case SourceTag::IntraTable: return "Intra-table";
        case SourceTag::CrossTable: return "Cross-table";
    }
    return "";
}

std::string_view display_name(DifficultyTag tag) {
    switch (tag) {
        case DifficultyTag::Explicit: return "Explicit";
        case DifficultyTag::Implicit: return "Implicit";
        case DifficultyTag::MultiStep: return "Multi-step";
        case DifficultyTag::Ambiguous: return "Ambiguous";
    }
    return "";
}

std::string_view display_name(UnitKind unit) {
    switch (unit) {
        case UnitKind::Percentage: return "Percentage";
        case UnitKind::Ratio: return "Ratio";
        case UnitKind::Days: return "Days";
        case UnitKind::Currency: return "Currency";
    }
    return "";
}

CCBTags classify(IndicatorId id) { return info(id).tags; }

std::string classification_triple(IndicatorId id) {
    CCBTags tags = classify(id);
    std::string out;
    out += display_name(tags.unit);
    out += " / ";
    out += display_name(tags.source);
    out += " / ";
    out += display_name(tags.difficulty);
    return out;
}

std::span<const RequiredInput> required_inputs(IndicatorId id) { return info(id).inputs; }

std::string input_var_name(const RequiredInput& input) {
    std::string name(statements::to_string(input.key));
    if (input.year_offset == -1) name += "_prev";
    return name;
}

std::string_view formula_dsl(IndicatorId id) { return info(id).formula; }

std::variant<std::vector<ExtractedInput>, MissingItem> extract_inputs(
    IndicatorId id, const statements::StatementSet& set, int year, statements::Scope scope) {
    std::vector<ExtractedInput> out;
    MissingItem missing;
    for (const RequiredInput& spec : required_inputs(id)) {
        std::optional<Decimal> value;
        if (id == IndicatorId::roe && spec.key == LineItemKey::net_income) {
            // Table 1 pairs the ROE numerator with parent equity, so the
            // attributable-to-parent line wins when the statement carries it.
            value = statements::lookup(set, LineItemKey::net_income_parent,
                                       year + spec.year_offset, scope);
            if (!value)
                value = statements::lookup(set, spec.key, year + spec.year_offset, scope);
        } else {
            value = statements::lookup(set, spec.key, year + spec.year_offset, scope);
        }
        if (!value) {
            missing.keys.push_back(spec.key);
            continue;
        }
        out.push_back(ExtractedInput{input_var_name(spec), spec, *value});
    }
    if (!missing.keys.empty()) return missing;
    return out;
}

ComputeOutcome compute_indicator(IndicatorId id, const statements::StatementSet& set, int year,
                                 statements::Scope scope) {
    auto extracted = extract_inputs(id, set, year, scope);
    if (std::holds_alternative<MissingItem>(extracted))
        return std::get<MissingItem>(extracted);
    const auto& v = std::get<std::vector<ExtractedInput>>(extracted);
    auto val = [&](size_t i) -> const Decimal& { return v[i].value; };

    Decimal result;
    switch (id) {
        case IndicatorId::roe:
        case IndicatorId::roa: {
            Decimal denom = avg2(val(1), val(2));
            if (denom.is_zero()) return Undefined{};
            result = val(0).divide(denom);
            break;
        }
        case IndicatorId::gross_margin: {
            if (val(0).is_zero()) return Undefined{};
            result = (val(0) - val(1)).divide(val(0));
            break;
        }
        case IndicatorId::net_margin: {
            if (val(1).is_zero()) return Undefined{};
            result = val(0).divide(val(1));
            break;
        }
        case IndicatorId::debt_ratio:
        case IndicatorId::current_ratio: {
            if (val(1).is_zero()) return Undefined{};
            result = val(0).divide(val(1));
            break;
        }
        case IndicatorId::quick_ratio: {
            if (val(2).is_zero()) return Undefined{};
            result = (val(0) - val(1)).divide(val(2));
            break;
        }
        case IndicatorId::asset_turnover: {
            Decimal denom = avg2(val(1), val(2));
            if (denom.is_zero()) return Undefined{};
            result = val(0).divide(denom);
            break;
        }
        case IndicatorId::inventory_days:
        case IndicatorId::ar_days: {
            if (val(2).is_zero()) return Undefined{};
            result = (avg2(val(0), val(1)) * kDays()).divide(val(2));
            break;
        }
        case IndicatorId::revenue_growth:
        case IndicatorId::net_profit_growth: {
            if (val(1).is_zero()) return Undefined{};
            result = (val(0) - val(1)).divide(val(1));
            break;
        }
        case IndicatorId::ocf: {
            result = val(0);
            break;
        }
        case IndicatorId::fcf: {
            result = val(0) - val(1);
            break;
        }
    }
    return IndicatorValue{result, classify(id).unit, year};
}

nlohmann::json metadata_manifest() {
    auto doc = nlohmann::json::object();
    for (const auto& entry : table()) {
        nlohmann::json row;
        row["display"] = entry.display;
        row["unit"] = to_string(entry.tags.unit);
        row["source"] = to_string(entry.tags.source);
        row["difficulty"] = to_string(entry.tags.difficulty);
        row["classification"] = classification_triple(entry.id);
        row["formula"] = entry.formula;
        auto inputs = nlohmann::json::array();
        for (const auto& input : entry.inputs)
            inputs.push_back({{"key", statements::to_string(input.key)},
                              {"offset", input.year_offset},
                              {"statement", statements::to_string(input.kind)}});
        row["inputs"] = std::move(inputs);
        doc[std::string(entry.id_str)] = std::move(row);
    }
    return doc;
}

}  // namespace ccb::indicators
