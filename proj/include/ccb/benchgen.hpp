#pragma once
#include "ccb/decimal.hpp"
#include "ccb/indicators.hpp"
#include "ccb/pipeline.hpp"
#include "ccb/statements.hpp"

#include "json.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

// Seeded generation of internally consistent statement sets, noisy rendered
// documents, and ground-truth-labeled benchmark instances. Everything here is
// deterministic per seed: identical inputs produce identical bytes.

namespace ccb::benchgen {

// ---------------------------------------------------------------------------
// Noise profile

/// How a numeric cell's magnitude is written. Every style is a power of ten,
/// so any exact decimal can be rendered in any style and recovered exactly.
enum class MagnitudeStyle { Plain, Thousand, Million, Billion, Wan, Yi };

constexpr int kMagnitudeStyleCount = 6;

std::string_view to_string(MagnitudeStyle style);
/// Power of ten the style multiplies the written mantissa by (0 for Plain).
int style_exponent(MagnitudeStyle style);

struct NumericStyle {
    bool commas = false;
    bool parenthesized_negatives = false;

    bool operator==(const NumericStyle&) const = default;
};

struct NoiseProfile {
    /// Label tier choice per row: Explicit, Implicit, Ambiguous.
    std::array<double, 3> alias_tier_mix{1.0, 0.0, 0.0};
    /// Magnitude rendering choice per cell, indexed by MagnitudeStyle.
    std::array<double, kMagnitudeStyleCount> magnitude_style{1.0, 0, 0, 0, 0, 0};
    /// Extra line items inserted per rendered statement, drawn from the
    /// distractor pool (capped at the pool size for the statement kind).
    int distractor_items = 0;
    NumericStyle numeric_style;
    std::uint64_t seed = 0;

    bool operator==(const NoiseProfile&) const = default;
};

/// Throws InvalidRangeError unless both probability vectors are non-negative
/// and sum to 1, and distractor_items >= 0.
void validate_profile(const NoiseProfile& profile);

/// A representative mixed profile: all three label tiers, all magnitude
/// styles, three distractors per statement, commas and parenthesized
/// negatives on.
NoiseProfile standard_noise(std::uint64_t seed);

nlohmann::json to_json(const NoiseProfile& profile);
NoiseProfile profile_from_json(const nlohmann::json& doc);

// ---------------------------------------------------------------------------
// Statement synthesis

struct YearRange {
    int first = 0;
    int last = 0;  // inclusive

    bool operator==(const YearRange&) const = default;
};

/// Synthesizes one company's statements for every year in the range and
/// every requested scope. Balance sheets satisfy total assets = liabilities
/// + equity exactly and current assets >= inventory + receivables; income
/// statements keep revenue > cogs; net income goes negative only in sampled
/// loss years (rate loss_prob). Year-over-year revenue and profit factors
/// are bounded so growth magnitudes stay under 1.5. Deterministic per seed.
///
/// Throws InvalidRangeError for a range shorter than two years, an empty or
/// duplicated scope list, or loss_prob outside [0, 1].
statements::StatementSet generate_statement_set(
    std::uint64_t seed, YearRange years,
    const std::vector<statements::Scope>& scopes = {statements::Scope::Consolidated,
                                                    statements::Scope::Parent},
    double loss_prob = 0.10);

// ---------------------------------------------------------------------------
// Rendering

/// Renders one value in the given style; normalize_magnitude inverts the
/// result exactly for every (style, flags) combination.
std::string render_value(const Decimal& value, MagnitudeStyle style,
                         const NumericStyle& numeric_style);

/// Renders the set as labeled text tables, one section per (scope,
/// statement kind), one row per line item, one "FY<year>" column per year.
/// Row labels are drawn from the alias table per alias_tier_mix; cells are
/// styled per magnitude_style/numeric_style; distractor rows are added and
/// the row order shuffled. Deterministic per (set, profile).
std::string render_document(const statements::StatementSet& set, const NoiseProfile& profile);

/// Noise keys whose home statement is `kind`: never an input to any of the
/// 14 indicator formulas, so their values cannot change any ground truth.
const std::vector<statements::LineItemKey>& distractor_pool(statements::StatementKind kind);

// ---------------------------------------------------------------------------
// Benchmark instances

struct Query {
    std::string id;  // "<company>:<year>:<indicator>"
    potloop::QueryContext context;
    indicators::IndicatorId indicator = indicators::IndicatorId::roe;
    indicators::IndicatorValue truth;
    indicators::CCBTags tags;
};

inline constexpr std::string_view kInstanceFormat = "ccb-instance/1";
inline constexpr std::string_view kGeneratorVersion = "ccb-benchgen/1";

struct BenchmarkInstance {
    std::uint64_t seed = 0;
    int n_companies = 0;
    YearRange years;
    NoiseProfile profile;
    std::vector<statements::StatementSet> statement_sets;  // one per company
    std::map<std::string, std::string> documents;          // company id -> text
    std::vector<Query> queries;  // company-major, indicator enum order
};

/// One query per (company, latest year, indicator): 14 * n_companies
/// queries, ground truth via compute_indicator over the embedded set, tags
/// via classify. Throws InvalidRangeError (n_companies < 1, bad years or
/// profile).
BenchmarkInstance generate_benchmark(std::uint64_t seed, int n_companies, YearRange years,
                                     const NoiseProfile& profile);

nlohmann::json to_json(const BenchmarkInstance& instance);
/// Throws SchemaViolationError on a missing/foreign format tag or
/// structurally unusable payload.
BenchmarkInstance instance_from_json(const nlohmann::json& doc);

void save_instance(const BenchmarkInstance& instance, const std::string& path);
BenchmarkInstance load_instance(const std::string& path);

/// Re-checks the instance invariants: format fields, truth recomputability,
/// tag agreement, exact accounting identities, and document re-render
/// stability. Returns one line per violation; empty means clean.
std::vector<std::string> verify_instance(const BenchmarkInstance& instance);

}  // namespace ccb::benchgen
