#include "ccb/benchgen.hpp"

#include "ccb/errors.hpp"
#include "ccb/util.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <utility>

namespace ccb::benchgen {

using indicators::IndicatorId;
using indicators::IndicatorValue;
using statements::LineItemKey;
using statements::Scope;
using statements::Statement;
using statements::StatementKind;
using statements::StatementSet;

// ---------------------------------------------------------------------------
// Noise profile

std::string_view to_string(MagnitudeStyle style) {
    switch (style) {
        case MagnitudeStyle::Plain: return "plain";
        case MagnitudeStyle::Thousand: return "thousand";
        case MagnitudeStyle::Million: return "million";
        case MagnitudeStyle::Billion: return "billion";
        case MagnitudeStyle::Wan: return "wan";
        case MagnitudeStyle::Yi: return "yi";
    }
    return "";
}

int style_exponent(MagnitudeStyle style) {
    switch (style) {
        case MagnitudeStyle::Plain: return 0;
        case MagnitudeStyle::Thousand: return 3;
        case MagnitudeStyle::Million: return 6;
        case MagnitudeStyle::Billion: return 9;
        case MagnitudeStyle::Wan: return 4;
        case MagnitudeStyle::Yi: return 8;
    }
    return 0;
}

namespace {

void check_probability_vector(std::span<const double> weights, std::string_view name) {
    double sum = 0;
    for (double w : weights) {
        if (!(w >= 0))
            throw InvalidRangeError(std::string(name) + " entries must be non-negative");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw InvalidRangeError(std::string(name) + " must sum to 1");
}

}  // namespace

void validate_profile(const NoiseProfile& profile) {
    check_probability_vector(profile.alias_tier_mix, "alias_tier_mix");
    check_probability_vector(profile.magnitude_style, "magnitude_style");
    if (profile.distractor_items < 0)
        throw InvalidRangeError("distractor_items must be non-negative");
}

NoiseProfile standard_noise(std::uint64_t seed) {
    NoiseProfile p;
    p.alias_tier_mix = {0.5, 0.3, 0.2};
    p.magnitude_style = {0.35, 0.10, 0.15, 0.05, 0.25, 0.10};
    p.distractor_items = 3;
    p.numeric_style = {true, true};
    p.seed = seed;
    return p;
}

nlohmann::json to_json(const NoiseProfile& p) {
    return {{"alias_tier_mix", p.alias_tier_mix},
            {"magnitude_style", p.magnitude_style},
            {"distractor_items", p.distractor_items},
            {"numeric_style",
             {{"commas", p.numeric_style.commas},
              {"parenthesized_negatives", p.numeric_style.parenthesized_negatives}}},
            {"seed", p.seed}};
}

NoiseProfile profile_from_json(const nlohmann::json& doc) {
    try {
        NoiseProfile p;
        auto tiers = doc.at("alias_tier_mix").get<std::vector<double>>();
        auto styles = doc.at("magnitude_style").get<std::vector<double>>();
        if (tiers.size() != p.alias_tier_mix.size() ||
            styles.size() != p.magnitude_style.size())
            throw SchemaViolationError("noise profile has a wrong-length probability vector");
        std::copy(tiers.begin(), tiers.end(), p.alias_tier_mix.begin());
        std::copy(styles.begin(), styles.end(), p.magnitude_style.begin());
        p.distractor_items = doc.at("distractor_items").get<int>();
        p.numeric_style.commas = doc.at("numeric_style").at("commas").get<bool>();
        p.numeric_style.parenthesized_negatives =
            doc.at("numeric_style").at("parenthesized_negatives").get<bool>();
        p.seed = doc.at("seed").get<std::uint64_t>();
        validate_profile(p);
        return p;
    } catch (const nlohmann::json::exception& err) {
        throw SchemaViolationError(std::string("malformed noise profile: ") + err.what());
    }
}

// ---------------------------------------------------------------------------
// Statement synthesis

namespace {

Decimal round0(const Decimal& v) { return Decimal::parse(v.to_fixed(0)); }

/// Uniform fraction with four decimal places, given in basis points.
Decimal frac(Rng& rng, long lo_bp, long hi_bp) {
    return Decimal::scaled(rng.range(lo_bp, hi_bp), -4);
}

std::string canonical_label(LineItemKey key) {
    const auto& labels = statements::AliasTable::builtin().labels_for(
        key, statements::AliasTier::Explicit);
    return labels.front();
}

void push_item(Statement& st, LineItemKey key, const Decimal& value) {
    st.items.push_back({canonical_label(key), key, value, st.fiscal_year});
}

void synthesize_scope(StatementSet& set, Rng rng, YearRange years, Scope scope,
                      double loss_prob) {
    bool parent_lines = scope == Scope::Consolidated;

    Decimal revenue(rng.range(100'000'000, 5'000'000'000));
    Decimal net_income = round0(revenue * frac(rng, 400, 1800));
    if (rng.bernoulli(loss_prob)) net_income = -net_income;
    Decimal equity = round0(revenue * frac(rng, 4000, 12000));
    Decimal liabilities = round0(equity * frac(rng, 3000, 15000));

    for (int year = years.first; year <= years.last; ++year) {
        if (year > years.first) {
            revenue = round0(revenue * frac(rng, 8500, 14500));
            Decimal profit_factor = rng.bernoulli(loss_prob) ? -frac(rng, 500, 4500)
                                                             : frac(rng, 7000, 16000);
            net_income = round0(net_income * profit_factor);
            equity = round0(equity * frac(rng, 9500, 12500));
            liabilities = round0(liabilities * frac(rng, 9000, 13000));
        }

        // Bound |net income| so margins and returns stay well inside the
        // percent/fraction disambiguation threshold; shrinking it only
        // shrinks growth magnitudes, which are bounded by the factors above.
        Decimal cap = Decimal::min(round0(revenue * Decimal::scaled(35, -2)),
                                   round0(equity * Decimal::scaled(4, -1)));
        if (net_income.abs() > cap) net_income = net_income.sign() < 0 ? -cap : cap;
        if (net_income.is_zero()) net_income = Decimal(1);

        Decimal assets = liabilities + equity;
        Decimal cogs = round0(revenue * frac(rng, 4500, 8000));
        Decimal current_assets = round0(assets * frac(rng, 3000, 6000));
        Decimal inventory = round0(current_assets * frac(rng, 1500, 4000));
        Decimal receivables = round0(current_assets * frac(rng, 1000, 3000));
        if (inventory + receivables > current_assets)
            current_assets = inventory + receivables;
        Decimal current_liabilities = round0(liabilities * frac(rng, 3500, 7000));
        Decimal parent_equity = round0(equity * frac(rng, 8000, 9900));
        Decimal parent_income = round0(net_income * frac(rng, 8000, 9900));
        Decimal ocf = round0(revenue * frac(rng, 500, 2000));
        Decimal capex = round0(revenue * frac(rng, 200, 1000));

        Statement bs{StatementKind::BalanceSheet, scope, year, "CNY", {}};
        push_item(bs, LineItemKey::total_assets, assets);
        push_item(bs, LineItemKey::total_liabilities, liabilities);
        push_item(bs, LineItemKey::current_assets, current_assets);
        push_item(bs, LineItemKey::current_liabilities, current_liabilities);
        push_item(bs, LineItemKey::inventory, inventory);
        push_item(bs, LineItemKey::accounts_receivable, receivables);
        if (parent_lines) push_item(bs, LineItemKey::parent_equity, parent_equity);
        push_item(bs, LineItemKey::total_equity, equity);
        set.add(std::move(bs));

        Statement is{StatementKind::IncomeStatement, scope, year, "CNY", {}};
        push_item(is, LineItemKey::revenue, revenue);
        push_item(is, LineItemKey::cogs, cogs);
        push_item(is, LineItemKey::net_income, net_income);
        if (parent_lines) push_item(is, LineItemKey::net_income_parent, parent_income);
        set.add(std::move(is));

        Statement cf{StatementKind::CashFlowStatement, scope, year, "CNY", {}};
        push_item(cf, LineItemKey::ocf, ocf);
        push_item(cf, LineItemKey::capex, capex);
        set.add(std::move(cf));
    }
}

}  // namespace

StatementSet generate_statement_set(std::uint64_t seed, YearRange years,
                                    const std::vector<Scope>& scopes, double loss_prob) {
    if (years.last - years.first < 1)
        throw InvalidRangeError("year range must span at least two consecutive years");
    if (scopes.empty()) throw InvalidRangeError("scope list must not be empty");
    for (std::size_t i = 0; i < scopes.size(); ++i)
        for (std::size_t j = i + 1; j < scopes.size(); ++j)
            if (scopes[i] == scopes[j])
                throw InvalidRangeError("scope list must not repeat a scope");
    if (!(loss_prob >= 0.0 && loss_prob <= 1.0))
        throw InvalidRangeError("loss probability must be within [0, 1]");

    Rng rng(seed);
    StatementSet set;
    set.company_id = "gen-" + std::to_string(seed);
    for (std::size_t i = 0; i < scopes.size(); ++i)
        synthesize_scope(set, rng.fork(i + 1), years, scopes[i], loss_prob);
    return set;
}

// ---------------------------------------------------------------------------
// Rendering

std::string render_value(const Decimal& value, MagnitudeStyle style,
                         const NumericStyle& numeric_style) {
    Decimal mantissa = value * Decimal::scaled(1, -style_exponent(style));
    std::string text = mantissa.to_string();
    bool negative = !text.empty() && text[0] == '-';
    if (negative) text.erase(0, 1);

    if (numeric_style.commas) {
        std::size_t dot = text.find('.');
        auto int_len = static_cast<std::ptrdiff_t>(dot == std::string::npos ? text.size() : dot);
        for (std::ptrdiff_t i = int_len - 3; i > 0; i -= 3)
            text.insert(static_cast<std::size_t>(i), ",");
    }
    if (negative) text = numeric_style.parenthesized_negatives ? "(" + text + ")" : "-" + text;

    switch (style) {
        case MagnitudeStyle::Plain: return text;
        case MagnitudeStyle::Thousand: return text + " thousand";
        case MagnitudeStyle::Million: return text + " million";
        case MagnitudeStyle::Billion: return text + " billion";
        case MagnitudeStyle::Wan: return text + "万";
        case MagnitudeStyle::Yi: return text + "亿";
    }
    return text;
}

const std::vector<LineItemKey>& distractor_pool(StatementKind kind) {
    static const auto pools = [] {
        std::array<std::vector<LineItemKey>, 3> p;
        for (int k = 14; k < statements::kLineItemKeyCount; ++k) {
            auto key = static_cast<LineItemKey>(k);
            p[static_cast<int>(statements::home_statement(key))].push_back(key);
        }
        return p;
    }();
    return pools[static_cast<int>(kind)];
}

namespace {

struct RenderRow {
    std::string label;
    std::map<int, Decimal> values;  // fiscal year -> value
};

std::string_view kind_heading(StatementKind kind) {
    switch (kind) {
        case StatementKind::BalanceSheet: return "Balance Sheet";
        case StatementKind::IncomeStatement: return "Income Statement";
        case StatementKind::CashFlowStatement: return "Cash Flow Statement";
    }
    return "";
}

std::string_view scope_heading(Scope scope) {
    return scope == Scope::Consolidated ? "Consolidated" : "Parent Company";
}

std::string sample_label(LineItemKey key, const NoiseProfile& profile, Rng& rng) {
    const auto& table = statements::AliasTable::builtin();
    auto tier = static_cast<statements::AliasTier>(rng.pick_weighted(profile.alias_tier_mix));
    const auto* labels = &table.labels_for(key, tier);
    if (labels->empty())
        labels = &table.labels_for(key, statements::AliasTier::Explicit);
    return (*labels)[rng.below(labels->size())];
}

}  // namespace

std::string render_document(const StatementSet& set, const NoiseProfile& profile) {
    validate_profile(profile);
    Rng rng(profile.seed ^ std::stoull(fnv1a64_hex(set.company_id), nullptr, 16));

    std::string out = "Fiscal report bundle: " + set.company_id + "\nCurrency unit: CNY\n";

    std::map<std::pair<StatementKind, Scope>, std::vector<const Statement*>> groups;
    for (const auto& [ref, st] : set.all()) groups[{ref.kind, ref.scope}].push_back(&st);

    for (const auto& [group, sts] : groups) {
        auto [kind, scope] = group;

        std::vector<int> years;
        for (const Statement* st : sts) years.push_back(st->fiscal_year);

        std::map<LineItemKey, RenderRow> keyed;
        std::vector<RenderRow> rows;
        std::map<std::string, std::size_t> unkeyed_index;
        std::vector<RenderRow> unkeyed;
        for (const Statement* st : sts) {
            for (const auto& item : st->items) {
                if (item.key) {
                    keyed[*item.key].values[st->fiscal_year] = item.value;
                } else {
                    auto [it, fresh] = unkeyed_index.emplace(item.raw_label, unkeyed.size());
                    if (fresh) unkeyed.push_back({item.raw_label, {}});
                    unkeyed[it->second].values[st->fiscal_year] = item.value;
                }
            }
        }
        for (auto& [key, row] : keyed) {
            row.label = sample_label(key, profile, rng);
            rows.push_back(row);
        }
        rows.insert(rows.end(), unkeyed.begin(), unkeyed.end());

        // Anchor distractor magnitudes to the statement's lead item so the
        // noise looks native to the table.
        std::map<int, Decimal> anchor;
        for (int year : years) {
            anchor[year] = Decimal(1'000'000);
            if (!keyed.empty()) {
                auto it = keyed.begin()->second.values.find(year);
                if (it != keyed.begin()->second.values.end()) anchor[year] = it->second.abs();
            }
        }
        std::vector<LineItemKey> pool;
        for (LineItemKey key : distractor_pool(kind))
            if (!keyed.contains(key)) pool.push_back(key);
        for (std::size_t i = pool.size(); i > 1; --i)
            std::swap(pool[i - 1], pool[rng.below(i)]);
        auto want = std::min<std::size_t>(pool.size(),
                                          static_cast<std::size_t>(profile.distractor_items));
        for (std::size_t d = 0; d < want; ++d) {
            LineItemKey key = pool[d];
            RenderRow row;
            row.label = sample_label(key, profile, rng);
            for (int year : years) {
                Decimal v;
                if (key == LineItemKey::gross_profit && keyed.contains(LineItemKey::revenue) &&
                    keyed.contains(LineItemKey::cogs)) {
                    v = keyed[LineItemKey::revenue].values.at(year) -
                        keyed[LineItemKey::cogs].values.at(year);
                } else {
                    v = round0(anchor[year] * frac(rng, 500, 6000));
                }
                row.values[year] = v;
            }
            rows.push_back(std::move(row));
        }

        for (std::size_t i = rows.size(); i > 1; --i)
            std::swap(rows[i - 1], rows[rng.below(i)]);

        out += "\n== ";
        out += scope_heading(scope);
        out += " ";
        out += kind_heading(kind);
        out += " ==\nItem";
        for (int year : years) out += " | FY" + std::to_string(year);
        out += "\n";
        for (const RenderRow& row : rows) {
            out += row.label;
            for (int year : years) {
                out += " | ";
                auto it = row.values.find(year);
                if (it == row.values.end()) {
                    out += "-";
                } else {
                    auto style = static_cast<MagnitudeStyle>(
                        rng.pick_weighted(profile.magnitude_style));
                    out += render_value(it->second, style, profile.numeric_style);
                }
            }
            out += "\n";
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Benchmark instances

BenchmarkInstance generate_benchmark(std::uint64_t seed, int n_companies, YearRange years,
                                     const NoiseProfile& profile) {
    if (n_companies < 1) throw InvalidRangeError("n_companies must be at least 1");
    if (years.last - years.first < 1)
        throw InvalidRangeError("year range must span at least two consecutive years");
    validate_profile(profile);

    BenchmarkInstance instance;
    instance.seed = seed;
    instance.n_companies = n_companies;
    instance.years = years;
    instance.profile = profile;

    Rng rng(seed);
    for (int c = 1; c <= n_companies; ++c) {
        StatementSet set = generate_statement_set(rng.u64(), years);
        char name[16];
        std::snprintf(name, sizeof name, "co-%03d", c);
        set.company_id = name;
        std::string document = render_document(set, profile);

        for (IndicatorId id : indicators::all_indicators()) {
            auto outcome =
                indicators::compute_indicator(id, set, years.last, Scope::Consolidated);
            const auto* truth = std::get_if<IndicatorValue>(&outcome);
            if (!truth)
                throw std::logic_error("generator produced an incomputable indicator");

            Query q;
            q.id = std::string(name) + ":" + std::to_string(years.last) + ":" +
                   std::string(indicators::to_string(id));
            q.context.document_text = document;
            q.context.targets = {id};
            q.context.company_id = name;
            q.context.fiscal_year = years.last;
            q.context.scope = Scope::Consolidated;
            q.indicator = id;
            q.truth = *truth;
            q.tags = indicators::classify(id);
            instance.queries.push_back(std::move(q));
        }
        instance.documents[name] = std::move(document);
        instance.statement_sets.push_back(std::move(set));
    }
    return instance;
}

nlohmann::json to_json(const BenchmarkInstance& instance) {
    nlohmann::json sets = nlohmann::json::array();
    for (const StatementSet& set : instance.statement_sets)
        sets.push_back(statements::to_json(set));

    nlohmann::json queries = nlohmann::json::array();
    for (const Query& q : instance.queries) {
        queries.push_back(
            {{"id", q.id},
             {"company", q.context.company_id},
             {"year", q.context.fiscal_year},
             {"scope", std::string(statements::to_string(q.context.scope))},
             {"indicator", std::string(indicators::to_string(q.indicator))},
             {"truth",
              {{"value", q.truth.value.to_string()},
               {"unit", std::string(indicators::to_string(q.truth.unit))},
               {"year", q.truth.year}}},
             {"tags",
              {{"source", std::string(indicators::to_string(q.tags.source))},
               {"difficulty", std::string(indicators::to_string(q.tags.difficulty))},
               {"unit", std::string(indicators::to_string(q.tags.unit))}}}});
    }

    return {{"format", kInstanceFormat},
            {"manifest",
             {{"generator", kGeneratorVersion},
              {"seed", instance.seed},
              {"n_companies", instance.n_companies},
              {"years", {{"first", instance.years.first}, {"last", instance.years.last}}},
              {"profile", to_json(instance.profile)}}},
            {"statement_sets", sets},
            {"documents", instance.documents},
            {"queries", queries}};
}

namespace {

template <typename Enum>
Enum parse_enum(std::optional<Enum> value, std::string_view what) {
    if (!value) throw SchemaViolationError("unknown " + std::string(what));
    return *value;
}

}  // namespace

BenchmarkInstance instance_from_json(const nlohmann::json& doc) {
    try {
        if (!doc.is_object() || doc.value("format", "") != kInstanceFormat)
            throw SchemaViolationError("not a ccb-instance/1 file");
        BenchmarkInstance instance;
        const auto& manifest = doc.at("manifest");
        instance.seed = manifest.at("seed").get<std::uint64_t>();
        instance.n_companies = manifest.at("n_companies").get<int>();
        instance.years.first = manifest.at("years").at("first").get<int>();
        instance.years.last = manifest.at("years").at("last").get<int>();
        instance.profile = profile_from_json(manifest.at("profile"));

        for (const auto& j : doc.at("statement_sets"))
            instance.statement_sets.push_back(statements::resolve_statement_set(
                statements::parse_statement_set(j), statements::AliasTable::builtin()));
        instance.documents =
            doc.at("documents").get<std::map<std::string, std::string>>();

        for (const auto& j : doc.at("queries")) {
            Query q;
            q.id = j.at("id").get<std::string>();
            q.context.company_id = j.at("company").get<std::string>();
            q.context.fiscal_year = j.at("year").get<int>();
            q.context.scope = parse_enum(
                statements::scope_from_string(j.at("scope").get<std::string>()), "scope");
            q.context.document_text = instance.documents.at(q.context.company_id);
            q.indicator = indicators::require_indicator(j.at("indicator").get<std::string>());
            q.context.targets = {q.indicator};
            q.truth.value = Decimal::parse(j.at("truth").at("value").get<std::string>());
            q.truth.unit = parse_enum(
                indicators::unit_from_string(j.at("truth").at("unit").get<std::string>()),
                "unit kind");
            q.truth.year = j.at("truth").at("year").get<int>();
            q.tags.source = parse_enum(
                indicators::source_from_string(j.at("tags").at("source").get<std::string>()),
                "source tag");
            q.tags.difficulty = parse_enum(indicators::difficulty_from_string(
                                               j.at("tags").at("difficulty").get<std::string>()),
                                           "difficulty tag");
            q.tags.unit = parse_enum(
                indicators::unit_from_string(j.at("tags").at("unit").get<std::string>()),
                "unit tag");
            instance.queries.push_back(std::move(q));
        }
        return instance;
    } catch (const nlohmann::json::exception& err) {
        throw SchemaViolationError(std::string("malformed instance file: ") + err.what());
    } catch (const NumberFormatError& err) {
        throw SchemaViolationError(std::string("malformed instance number: ") + err.what());
    } catch (const std::out_of_range& err) {
        throw SchemaViolationError(std::string("malformed instance file: ") + err.what());
    }
}

void save_instance(const BenchmarkInstance& instance, const std::string& path) {
    write_file(path, to_json(instance).dump(2) + "\n");
}

BenchmarkInstance load_instance(const std::string& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& err) {
        throw SchemaViolationError(path + " is not valid JSON: " + err.what());
    }
    return instance_from_json(doc);
}

namespace {

std::optional<Decimal> item_value(const Statement& st, LineItemKey key) {
    for (const auto& item : st.items)
        if (item.key == key) return item.value;
    return std::nullopt;
}

}  // namespace

std::vector<std::string> verify_instance(const BenchmarkInstance& instance) {
    std::vector<std::string> problems;
    auto flag = [&](const std::string& text) { problems.push_back(text); };

    std::map<std::string, const StatementSet*> by_company;
    for (const StatementSet& set : instance.statement_sets) {
        by_company[set.company_id] = &set;

        for (const auto& [ref, st] : set.all()) {
            std::string where = set.company_id + " " +
                                std::string(statements::to_string(ref.kind)) + "/" +
                                std::string(statements::to_string(ref.scope)) + "/" +
                                std::to_string(ref.fiscal_year);
            if (ref.kind == StatementKind::BalanceSheet) {
                auto assets = item_value(st, LineItemKey::total_assets);
                auto liabilities = item_value(st, LineItemKey::total_liabilities);
                auto equity = item_value(st, LineItemKey::total_equity);
                if (assets && liabilities && equity && *assets != *liabilities + *equity)
                    flag(where + ": assets != liabilities + equity");
                auto ca = item_value(st, LineItemKey::current_assets);
                auto inv = item_value(st, LineItemKey::inventory);
                auto ar = item_value(st, LineItemKey::accounts_receivable);
                if (ca && inv && ar && *ca < *inv + *ar)
                    flag(where + ": current assets < inventory + receivables");
            }
            if (ref.kind == StatementKind::IncomeStatement) {
                auto revenue = item_value(st, LineItemKey::revenue);
                auto cogs = item_value(st, LineItemKey::cogs);
                if (revenue && cogs && *revenue <= *cogs)
                    flag(where + ": revenue does not exceed cogs");
            }
        }

        auto doc_it = instance.documents.find(set.company_id);
        if (doc_it == instance.documents.end())
            flag(set.company_id + ": no rendered document");
        else if (render_document(set, instance.profile) != doc_it->second)
            flag(set.company_id + ": document does not re-render identically");
    }

    for (const Query& q : instance.queries) {
        auto it = by_company.find(q.context.company_id);
        if (it == by_company.end()) {
            flag(q.id + ": no statement set for its company");
            continue;
        }
        auto outcome = indicators::compute_indicator(q.indicator, *it->second,
                                                     q.context.fiscal_year, q.context.scope);
        const auto* truth = std::get_if<IndicatorValue>(&outcome);
        if (!truth || !(*truth == q.truth))
            flag(q.id + ": stored truth does not match recomputation");
        if (!(q.tags == indicators::classify(q.indicator)))
            flag(q.id + ": stored tags do not match classification");
        if (q.context.document_text != instance.documents.at(q.context.company_id))
            flag(q.id + ": query document differs from the company document");
    }
    return problems;
}

}  // namespace ccb::benchgen
