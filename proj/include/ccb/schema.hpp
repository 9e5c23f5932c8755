#pragma once
#include "ccb/decimal.hpp"
#include "ccb/indicators.hpp"
#include "ccb/statements.hpp"

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

// The phase-1 intermediate representation: normalized variable bindings plus
// formula text per target indicator, parsed out of a fenced block:
//
//   ===SCHEMA===
//   TARGETS: roe[,roa...]
//   VAR name = <numeric text>            # kind/scope/year/raw label
//   FORMULA roe = <dsl-expression>
//   ===END===
//
// Line order inside the fences is free; text outside them is ignored.
// Unusable section structure (no fences, no or empty or duplicated TARGETS)
// throws SchemaParseError; every line-level problem is a returned Defect.

namespace ccb::schema {

struct NormalizedLiteral {
    Decimal value;
    std::string original_text;
    Decimal scale_applied;  // 1 unless a scale word was present

    bool operator==(const NormalizedLiteral&) const = default;
};

/// Applies the scale table {thousand, million, billion, 万, 亿}, strips
/// comma grouping, and maps parentheses to negation. Scale words do not
/// compose; unknown suffixes are NumberFormatError, never ignored.
NormalizedLiteral normalize_magnitude(std::string_view text);

struct Provenance {
    statements::StatementKind kind = statements::StatementKind::BalanceSheet;
    statements::Scope scope = statements::Scope::Consolidated;
    int fiscal_year = 0;
    std::string raw_label;

    bool operator==(const Provenance&) const = default;
};

struct VariableBinding {
    std::string name;  // DSL-legal identifier
    NormalizedLiteral literal;
    std::optional<Provenance> provenance;

    bool operator==(const VariableBinding&) const = default;
};

struct CalculationSchema {
    std::vector<indicators::IndicatorId> targets;
    std::vector<VariableBinding> bindings;
    std::vector<std::pair<indicators::IndicatorId, std::string>> formulas;

    bool operator==(const CalculationSchema&) const = default;
};

enum class DefectKind {
    UnknownLine,        // line matches no production of the contract
    BadNumber,          // VAR value failed magnitude normalization
    BadVarName,         // VAR name is not a usable DSL identifier
    DuplicateBinding,   // binding name bound more than once
    UnboundIdentifier,  // formula references a name with no binding
    FormulaSyntax,      // formula does not parse as a DSL expression
    UnknownTarget,      // FORMULA id is not one of the schema's targets
    MissingFormula,     // target has no formula entry
    DuplicateFormula,   // target has more than one formula entry
};

std::string_view to_string(DefectKind kind);

struct Defect {
    DefectKind kind = DefectKind::UnknownLine;
    std::string subject;  // offending name, indicator id, or line text
    std::string message;

    bool operator==(const Defect&) const = default;
};

struct ParsedSchema {
    CalculationSchema schema;
    std::vector<Defect> defects;  // line-level problems plus validate_schema
};

/// Parses a phase-1 output block. Throws SchemaParseError when the section
/// structure is unusable; otherwise collects recoverable problems in the
/// defect list (which already includes validate_schema of the result).
ParsedSchema parse_schema(std::string_view text);

/// Invariant check usable on any schema, hand-built or parsed: unique and
/// DSL-legal binding names, exactly one parseable formula per target, no
/// stray formula ids, no unbound identifiers. Empty means the schema will
/// execute without UndefinedVariable or SyntaxError exceptions.
std::vector<Defect> validate_schema(const CalculationSchema& schema);

/// Binding values keyed by name, ready to execute a program against.
std::map<std::string, Decimal> binding_env(const CalculationSchema& schema);

/// The schema in the exact block format parse_schema reads. Bindings render
/// their original numeric text when one is recorded.
std::string render_schema(const CalculationSchema& schema);

/// Human-readable defect lines for correction prompts; deterministic.
std::string format_defects(const std::vector<Defect>& defects);

}  // namespace ccb::schema
