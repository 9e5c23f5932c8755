#include "ccb/statements.hpp"

#include "ccb/errors.hpp"
#include "ccb/util.hpp"

#include <array>
#include <utility>

namespace ccb::statements {

namespace {

struct KeyInfo {
    LineItemKey key;
    std::string_view id;
    StatementKind home;
};

constexpr std::array<KeyInfo, kLineItemKeyCount> kKeyTable{{
    {LineItemKey::revenue, "revenue", StatementKind::IncomeStatement},
    {LineItemKey::cogs, "cogs", StatementKind::IncomeStatement},
    {LineItemKey::net_income, "net_income", StatementKind::IncomeStatement},
    {LineItemKey::net_income_parent, "net_income_parent", StatementKind::IncomeStatement},
    {LineItemKey::total_assets, "total_assets", StatementKind::BalanceSheet},
    {LineItemKey::total_liabilities, "total_liabilities", StatementKind::BalanceSheet},
    {LineItemKey::current_assets, "current_assets", StatementKind::BalanceSheet},
    {LineItemKey::current_liabilities, "current_liabilities", StatementKind::BalanceSheet},
    {LineItemKey::inventory, "inventory", StatementKind::BalanceSheet},
    {LineItemKey::accounts_receivable, "accounts_receivable", StatementKind::BalanceSheet},
    {LineItemKey::parent_equity, "parent_equity", StatementKind::BalanceSheet},
    {LineItemKey::total_equity, "total_equity", StatementKind::BalanceSheet},
    {LineItemKey::ocf, "ocf", StatementKind::CashFlowStatement},
    {LineItemKey::capex, "capex", StatementKind::CashFlowStatement},
    {LineItemKey::goodwill, "goodwill", StatementKind::BalanceSheet},
    {LineItemKey::intangible_assets, "intangible_assets", StatementKind::BalanceSheet},
    {LineItemKey::prepaid_expenses, "prepaid_expenses", StatementKind::BalanceSheet},
    {LineItemKey::long_term_debt, "long_term_debt", StatementKind::BalanceSheet},
    {LineItemKey::short_term_borrowings, "short_term_borrowings", StatementKind::BalanceSheet},
    {LineItemKey::deferred_revenue, "deferred_revenue", StatementKind::BalanceSheet},
    {LineItemKey::cash_and_equivalents, "cash_and_equivalents", StatementKind::BalanceSheet},
    {LineItemKey::construction_in_progress, "construction_in_progress",
     StatementKind::BalanceSheet},
    {LineItemKey::selling_expenses, "selling_expenses", StatementKind::IncomeStatement},
    {LineItemKey::admin_expenses, "admin_expenses", StatementKind::IncomeStatement},
    {LineItemKey::rd_expense, "rd_expense", StatementKind::IncomeStatement},
    {LineItemKey::finance_expenses, "finance_expenses", StatementKind::IncomeStatement},
    {LineItemKey::income_tax_expense, "income_tax_expense", StatementKind::IncomeStatement},
    {LineItemKey::operating_profit, "operating_profit", StatementKind::IncomeStatement},
    {LineItemKey::gross_profit, "gross_profit", StatementKind::IncomeStatement},
    {LineItemKey::investing_cf, "investing_cf", StatementKind::CashFlowStatement},
    {LineItemKey::financing_cf, "financing_cf", StatementKind::CashFlowStatement},
    {LineItemKey::depreciation_amortization, "depreciation_amortization",
     StatementKind::CashFlowStatement},
    {LineItemKey::dividends_paid, "dividends_paid", StatementKind::CashFlowStatement},
    {LineItemKey::taxes_paid, "taxes_paid", StatementKind::CashFlowStatement},
}};

const KeyInfo& info(LineItemKey key) { return kKeyTable[static_cast<size_t>(key)]; }

}  // namespace

std::string_view to_string(LineItemKey key) { return info(key).id; }

std::optional<LineItemKey> key_from_string(std::string_view id) {
    for (const auto& entry : kKeyTable)
        if (entry.id == id) return entry.key;
    return std::nullopt;
}

LineItemKey require_key(std::string_view id) {
    if (auto key = key_from_string(id)) return *key;
    throw SchemaViolationError("unknown line item key: " + std::string(id));
}

StatementKind home_statement(LineItemKey key) { return info(key).home; }

std::string_view to_string(StatementKind kind) {
    switch (kind) {
        case StatementKind::BalanceSheet: return "balance_sheet";
        case StatementKind::IncomeStatement: return "income_statement";
        case StatementKind::CashFlowStatement: return "cash_flow";
    }
    return "";
}

std::string_view to_string(Scope scope) {
    return scope == Scope::Consolidated ? "consolidated" : "parent";
}

std::optional<StatementKind> statement_kind_from_string(std::string_view s) {
    if (s == "balance_sheet") return StatementKind::BalanceSheet;
    if (s == "income_statement") return StatementKind::IncomeStatement;
    if (s == "cash_flow") return StatementKind::CashFlowStatement;
    return std::nullopt;
}

std::optional<Scope> scope_from_string(std::string_view s) {
    if (s == "consolidated") return Scope::Consolidated;
    if (s == "parent") return Scope::Parent;
    return std::nullopt;
}

std::string_view to_string(AliasTier tier) {
    switch (tier) {
        case AliasTier::Explicit: return "explicit";
        case AliasTier::Implicit: return "implicit";
        case AliasTier::Ambiguous: return "ambiguous";
    }
    return "";
}

std::optional<AliasTier> alias_tier_from_string(std::string_view s) {
    if (s == "explicit") return AliasTier::Explicit;
    if (s == "implicit") return AliasTier::Implicit;
    if (s == "ambiguous") return AliasTier::Ambiguous;
    return std::nullopt;
}

// ---------------------------------------------------------------------------

void StatementSet::add(Statement st) {
    StatementRef ref{st.kind, st.scope, st.fiscal_year};
    if (statements_.contains(ref))
        throw SchemaViolationError("duplicate statement: " + std::string(to_string(st.kind)) +
                                   "/" + std::string(to_string(st.scope)) + "/" +
                                   std::to_string(st.fiscal_year));
    std::vector<bool> seen(kLineItemKeyCount, false);
    for (const auto& item : st.items) {
        if (item.fiscal_year != st.fiscal_year)
            throw SchemaViolationError("item year " + std::to_string(item.fiscal_year) +
                                       " disagrees with statement year " +
                                       std::to_string(st.fiscal_year));
        if (!item.key) continue;
        auto idx = static_cast<size_t>(*item.key);
        if (seen[idx])
            throw SchemaViolationError("line item key bound twice in one statement: " +
                                       std::string(to_string(*item.key)));
        seen[idx] = true;
    }
    statements_.emplace(ref, std::move(st));
}

const Statement* StatementSet::find(StatementKind kind, Scope scope, int year) const {
    auto it = statements_.find(StatementRef{kind, scope, year});
    return it == statements_.end() ? nullptr : &it->second;
}

// ---------------------------------------------------------------------------

void AliasTable::add(std::string_view label, LineItemKey key, AliasTier tier) {
    std::string folded = fold_label(label);
    if (folded.empty()) throw SchemaViolationError("empty alias label");
    AliasEntry entry{key, tier};
    auto [it, inserted] = by_folded_label_.emplace(folded, entry);
    if (!inserted) {
        if (it->second == entry) return;
        throw SchemaViolationError("alias label already mapped: " + folded);
    }
    by_key_tier_[{key, tier}].emplace_back(label);
}

std::optional<AliasEntry> AliasTable::resolve(std::string_view raw_label) const {
    auto it = by_folded_label_.find(fold_label(raw_label));
    if (it == by_folded_label_.end()) return std::nullopt;
    return it->second;
}

const std::vector<std::string>& AliasTable::labels_for(LineItemKey key, AliasTier tier) const {
    static const std::vector<std::string> kEmpty;
    auto it = by_key_tier_.find({key, tier});
    return it == by_key_tier_.end() ? kEmpty : it->second;
}

nlohmann::json AliasTable::to_json() const {
    auto doc = nlohmann::json::object();
    for (const auto& [key_tier, labels] : by_key_tier_)
        for (const auto& label : labels)
            doc[label] = {{"key", to_string(key_tier.first)},
                          {"tier", to_string(key_tier.second)}};
    return doc;
}

AliasTable AliasTable::from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw SchemaViolationError("alias table must be a JSON object");
    AliasTable table;
    for (const auto& [label, row] : doc.items()) {
        if (!row.is_object() || !row.contains("key") || !row.contains("tier"))
            throw SchemaViolationError("alias entry needs key and tier: " + label);
        auto tier = alias_tier_from_string(row.at("tier").get<std::string>());
        if (!tier) throw SchemaViolationError("unknown alias tier for: " + label);
        table.add(label, require_key(row.at("key").get<std::string>()), *tier);
    }
    table.require_explicit_cover();
    return table;
}

void AliasTable::require_explicit_cover() const {
    for (const auto& entry : kKeyTable)
        if (labels_for(entry.key, AliasTier::Explicit).empty())
            throw SchemaViolationError("key lacks an explicit alias: " + std::string(entry.id));
}

const AliasTable& AliasTable::builtin() {
    static const AliasTable table = [] {
        AliasTable t;
        auto ex = [&](LineItemKey k, std::string_view s) { t.add(s, k, AliasTier::Explicit); };
        auto im = [&](LineItemKey k, std::string_view s) { t.add(s, k, AliasTier::Implicit); };
        auto am = [&](LineItemKey k, std::string_view s) { t.add(s, k, AliasTier::Ambiguous); };
        using K = LineItemKey;

        ex(K::revenue, "Revenue");
        im(K::revenue, "Operating Revenue");
        im(K::revenue, "营业收入");
        am(K::revenue, "Income from principal operations");

        ex(K::cogs, "Cost of Goods Sold");
        im(K::cogs, "Operating Costs");
        im(K::cogs, "营业成本");
        am(K::cogs, "Cost of sales incurred");

        ex(K::net_income, "Net Income");
        im(K::net_income, "Net Profit");
        im(K::net_income, "净利润");
        am(K::net_income, "Profit for the year");

        ex(K::net_income_parent, "Net Income Attributable to Parent");
        im(K::net_income_parent, "归属于母公司所有者的净利润");
        im(K::net_income_parent, "Net profit attributable to shareholders of the parent company");
        am(K::net_income_parent, "Profit belonging to owners of the company");

        ex(K::total_assets, "Total Assets");
        im(K::total_assets, "资产总计");
        im(K::total_assets, "Total assets at period end");
        am(K::total_assets, "Sum of all asset items");

        ex(K::total_liabilities, "Total Liabilities");
        im(K::total_liabilities, "负债合计");
        im(K::total_liabilities, "Liabilities total");
        am(K::total_liabilities, "Sum of all obligations");

        ex(K::current_assets, "Current Assets");
        im(K::current_assets, "流动资产合计");
        im(K::current_assets, "Total current assets");
        am(K::current_assets, "Assets realizable within one year");

        ex(K::current_liabilities, "Current Liabilities");
        im(K::current_liabilities, "流动负债合计");
        im(K::current_liabilities, "Total current liabilities");
        am(K::current_liabilities, "Obligations due within one year");

        ex(K::inventory, "Inventory");
        im(K::inventory, "存货");
        im(K::inventory, "Inventories");
        am(K::inventory, "Goods held for sale and materials");

        ex(K::accounts_receivable, "Accounts Receivable");
        im(K::accounts_receivable, "应收账款");
        im(K::accounts_receivable, "Trade receivables");
        am(K::accounts_receivable, "Amounts owed by customers");

        ex(K::parent_equity, "Equity Attributable to Parent");
        im(K::parent_equity, "归属于母公司所有者权益合计");
        im(K::parent_equity, "Equity attributable to owners of the parent");
        am(K::parent_equity, "Shareholders' stake excluding minority interests");

        ex(K::total_equity, "Total Equity");
        im(K::total_equity, "所有者权益合计");
        im(K::total_equity, "Total owners' equity");
        am(K::total_equity, "Residual interest in assets");

        ex(K::ocf, "Operating Cash Flow");
        im(K::ocf, "经营活动产生的现金流量净额");
        im(K::ocf, "Net cash flows from operating activities");
        am(K::ocf, "Cash generated by day-to-day operations");

        ex(K::capex, "Capital Expenditures");
        im(K::capex, "Payments for property, plant and equipment");
        am(K::capex, "Cash paid for fixed assets");
        am(K::capex, "购建固定资产、无形资产和其他长期资产支付的现金");
        am(K::capex, "Cash paid for acquisition of fixed assets, intangible assets and other "
                     "long-term assets");

        ex(K::goodwill, "Goodwill");
        im(K::goodwill, "商誉");
        ex(K::intangible_assets, "Intangible Assets");
        im(K::intangible_assets, "无形资产");
        ex(K::prepaid_expenses, "Prepaid Expenses");
        im(K::prepaid_expenses, "预付款项");
        ex(K::long_term_debt, "Long-term Borrowings");
        im(K::long_term_debt, "长期借款");
        ex(K::short_term_borrowings, "Short-term Borrowings");
        im(K::short_term_borrowings, "短期借款");
        ex(K::deferred_revenue, "Deferred Revenue");
        im(K::deferred_revenue, "递延收益");
        ex(K::cash_and_equivalents, "Cash and Cash Equivalents");
        im(K::cash_and_equivalents, "货币资金");
        ex(K::construction_in_progress, "Construction in Progress");
        im(K::construction_in_progress, "在建工程");
        ex(K::selling_expenses, "Selling Expenses");
        im(K::selling_expenses, "销售费用");
        ex(K::admin_expenses, "Administrative Expenses");
        im(K::admin_expenses, "管理费用");
        ex(K::rd_expense, "R&D Expenses");
        im(K::rd_expense, "研发费用");
        ex(K::finance_expenses, "Finance Expenses");
        im(K::finance_expenses, "财务费用");
        ex(K::income_tax_expense, "Income Tax Expense");
        im(K::income_tax_expense, "所得税费用");
        ex(K::operating_profit, "Operating Profit");
        im(K::operating_profit, "营业利润");
        ex(K::gross_profit, "Gross Profit");
        im(K::gross_profit, "毛利");
        ex(K::investing_cf, "Net Cash Flow from Investing Activities");
        im(K::investing_cf, "投资活动产生的现金流量净额");
        ex(K::financing_cf, "Net Cash Flow from Financing Activities");
        im(K::financing_cf, "筹资活动产生的现金流量净额");
        ex(K::depreciation_amortization, "Depreciation and Amortization");
        im(K::depreciation_amortization, "折旧与摊销");
        ex(K::dividends_paid, "Dividends Paid");
        im(K::dividends_paid, "分配股利、利润或偿付利息支付的现金");
        ex(K::taxes_paid, "Taxes Paid");
        im(K::taxes_paid, "支付的各项税费");
        t.require_explicit_cover();
        return t;
    }();
    return table;
}

std::optional<AliasEntry> resolve_label(std::string_view raw_label, const AliasTable& table) {
    return table.resolve(raw_label);
}

// ---------------------------------------------------------------------------

Decimal parse_money(std::string_view text) {
    std::string_view s = trim(text);
    if (s.empty()) throw NumberFormatError("empty amount");

    bool negative = false;
    if (s.front() == '(') {
        if (s.back() != ')' || s.size() < 3)
            throw NumberFormatError("unbalanced parentheses in amount: " + std::string(text));
        negative = true;
        s = trim(s.substr(1, s.size() - 2));
        if (!s.empty() && (s.front() == '-' || s.front() == '+'))
            throw NumberFormatError("sign inside parentheses: " + std::string(text));
    }

    if (s.find(',') != std::string_view::npos) {
        // Commas are thousands separators: groups of exactly three after the
        // first, and none in the fractional part.
        size_t dot = s.find('.');
        std::string_view int_part = dot == std::string_view::npos ? s : s.substr(0, dot);
        std::string_view frac_part = dot == std::string_view::npos
                                         ? std::string_view{}
                                         : s.substr(dot + 1);
        if (frac_part.find(',') != std::string_view::npos)
            throw NumberFormatError("separator in fractional part: " + std::string(text));
        if (!int_part.empty() && (int_part.front() == '-' || int_part.front() == '+'))
            int_part.remove_prefix(1);
        size_t group = 0, group_index = 0;
        bool bad = int_part.empty() || int_part.front() == ',' || int_part.back() == ',';
        for (char c : int_part) {
            if (c == ',') {
                if (group_index == 0 ? (group < 1 || group > 3) : group != 3) bad = true;
                ++group_index;
                group = 0;
            } else {
                ++group;
            }
        }
        if (group_index > 0 && group != 3) bad = true;
        if (bad) throw NumberFormatError("misplaced separator in amount: " + std::string(text));
    }

    std::string bare;
    bare.reserve(s.size());
    for (char c : s)
        if (c != ',') bare.push_back(c);

    Decimal value = Decimal::parse(bare);
    return negative ? -value : value;
}

// ---------------------------------------------------------------------------

namespace {

const nlohmann::json& field(const nlohmann::json& obj, const char* name) {
    if (!obj.is_object() || !obj.contains(name))
        throw SchemaViolationError(std::string("missing field: ") + name);
    return obj.at(name);
}

std::string string_field(const nlohmann::json& obj, const char* name) {
    const auto& v = field(obj, name);
    if (!v.is_string())
        throw SchemaViolationError(std::string("field must be a string: ") + name);
    return v.get<std::string>();
}

int int_field(const nlohmann::json& obj, const char* name) {
    const auto& v = field(obj, name);
    if (!v.is_number_integer())
        throw SchemaViolationError(std::string("field must be an integer: ") + name);
    return v.get<int>();
}

}  // namespace

StatementSet parse_statement_set(const nlohmann::json& doc) {
    StatementSet set;
    set.company_id = string_field(doc, "company_id");
    if (set.company_id.empty()) throw SchemaViolationError("company_id must be non-empty");

    const auto& stmts = field(doc, "statements");
    if (!stmts.is_array()) throw SchemaViolationError("statements must be an array");

    for (const auto& raw : stmts) {
        Statement st;
        auto kind = statement_kind_from_string(string_field(raw, "kind"));
        if (!kind) throw SchemaViolationError("unknown statement kind");
        st.kind = *kind;
        auto scope = scope_from_string(string_field(raw, "scope"));
        if (!scope) throw SchemaViolationError("unknown statement scope");
        st.scope = *scope;
        st.fiscal_year = int_field(raw, "fiscal_year");
        if (raw.contains("currency_unit")) st.currency_unit = string_field(raw, "currency_unit");

        const auto& items = field(raw, "items");
        if (!items.is_array()) throw SchemaViolationError("items must be an array");
        for (const auto& raw_item : items) {
            LineItem item;
            item.raw_label = string_field(raw_item, "label");
            if (trim(item.raw_label).empty())
                throw SchemaViolationError("item label must be non-empty");
            item.value = parse_money(string_field(raw_item, "value"));
            item.fiscal_year = st.fiscal_year;
            st.items.push_back(std::move(item));
        }
        set.add(std::move(st));
    }
    return set;
}

StatementSet parse_statement_set_text(std::string_view json_text) {
    nlohmann::json doc = nlohmann::json::parse(json_text, nullptr, false);
    if (doc.is_discarded()) throw SchemaViolationError("statement file is not valid JSON");
    return parse_statement_set(doc);
}

nlohmann::json to_json(const StatementSet& set) {
    nlohmann::json doc;
    doc["company_id"] = set.company_id;
    auto stmts = nlohmann::json::array();
    for (const auto& [ref, st] : set.all()) {
        nlohmann::json raw;
        raw["kind"] = to_string(st.kind);
        raw["scope"] = to_string(st.scope);
        raw["fiscal_year"] = st.fiscal_year;
        raw["currency_unit"] = st.currency_unit;
        auto items = nlohmann::json::array();
        for (const auto& item : st.items)
            items.push_back({{"label", item.raw_label}, {"value", item.value.to_string()}});
        raw["items"] = std::move(items);
        stmts.push_back(std::move(raw));
    }
    doc["statements"] = std::move(stmts);
    return doc;
}

StatementSet resolve_statement_set(const StatementSet& set, const AliasTable& table) {
    StatementSet out;
    out.company_id = set.company_id;
    for (const auto& [ref, st] : set.all()) {
        Statement resolved = st;
        for (auto& item : resolved.items) {
            auto entry = table.resolve(item.raw_label);
            item.key = entry ? std::optional(entry->key) : std::nullopt;
        }
        out.add(std::move(resolved));  // re-checks key uniqueness
    }
    return out;
}

std::optional<Decimal> lookup(const StatementSet& set, LineItemKey key, int year, Scope scope) {
    for (auto kind : {StatementKind::BalanceSheet, StatementKind::IncomeStatement,
                      StatementKind::CashFlowStatement}) {
        const Statement* st = set.find(kind, scope, year);
        if (!st) continue;
        for (const auto& item : st->items)
            if (item.key == key) return item.value;
    }
    return std::nullopt;
}

std::optional<Decimal> average_balance(const StatementSet& set, LineItemKey key, int year,
                                       Scope scope) {
    auto open = lookup(set, key, year - 1, scope);
    auto close = lookup(set, key, year, scope);
    if (!open || !close) return std::nullopt;
    return (*open + *close).divide(Decimal(2));
}

}  // namespace ccb::statements
