#pragma once
#include "ccb/decimal.hpp"

#include <cstddef>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

// Hermetic calculation DSL: a closed, loop-free expression language executed
// under exact decimal arithmetic. Programs are newline-separated statements,
// "#" comments to end of line:
//
//   assign := IDENT "=" expr
//   output := "output" IDENT | "output" expr
//   expr   := term (("+"|"-") term)*
//   term   := factor (("*"|"/") factor)*
//   factor := NUMBER | IDENT | "DAYS" | call | "(" expr ")" | "-" factor
//   call   := ("avg"|"abs"|"min"|"max") "(" expr ("," expr)* ")"
//   IDENT  := [a-z_][a-z0-9_]*
//
// NUMBER is a plain decimal literal with optional fraction; a sign is
// accepted in factor position. DAYS is the builtin constant 365. Execution
// performs no I/O and is bounded: at most 512 statements evaluate, every
// value must stay within the decimal range, and oversized coefficients stop
// the statement. Failed assignments poison their targets; statements that
// read a poisoned name fail silently so the exception vector stays focused
// on root causes.

namespace ccb::calcdsl {

inline constexpr std::size_t kMaxStatements = 512;
inline constexpr std::size_t kMaxCoefficientDigits = 20000;

struct SourceSpan {
    std::size_t begin = 0;
    std::size_t end = 0;  // half-open, character offsets into the source text

    auto operator<=>(const SourceSpan&) const = default;
};

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
    enum class Kind { Number, Variable, Binary, Call, Days };
    enum class Fn { Avg, Abs, Min, Max };

    Kind kind = Kind::Number;
    Decimal number;              // Kind::Number
    std::string name;            // Kind::Variable
    char op = 0;                 // Kind::Binary: '+', '-', '*', '/'
    Fn fn = Fn::Avg;             // Kind::Call
    std::vector<ExprPtr> args;   // Binary: {lhs, rhs}; Call: arguments
    SourceSpan span;
};

struct Stmt {
    enum class Kind { Assign, Output };

    Kind kind = Kind::Assign;
    std::string name;  // assign target, or the output's result name
    ExprPtr expr;
    SourceSpan span;   // the statement's source line
};

struct DslProgram {
    std::vector<Stmt> statements;
};

enum class ExceptionKind {
    SyntaxError,
    UndefinedVariable,
    DivisionByZero,
    NonFiniteResult,
    MissingOutput,
    ResourceLimit,
};

std::string_view to_string(ExceptionKind kind);

struct ExceptionRecord {
    ExceptionKind kind = ExceptionKind::SyntaxError;
    std::string message;
    // SyntaxError carries a character span; every other kind carries the
    // index of the statement it occurred in.
    std::variant<std::size_t, SourceSpan> location;

    bool operator==(const ExceptionRecord&) const = default;
};

using ParseResult = std::variant<DslProgram, std::vector<ExceptionRecord>>;

/// Parses a whole program. Syntax errors are reported for every offending
/// line, each with its source span. A program with no output statement, or
/// with more than kMaxStatements statements, is itself a syntax error.
ParseResult parse_dsl(std::string_view text);

/// Parses a single expression (the schema FORMULA payload).
struct ExprParse {
    ExprPtr expr;  // null when errors is non-empty
    std::vector<ExceptionRecord> errors;
};
ExprParse parse_expression(std::string_view text);

/// Variable names referenced by an expression tree, sorted and deduplicated.
std::vector<std::string> referenced_variables(const Expr& expr);

struct ExecutionOutcome {
    std::map<std::string, Decimal> results;
    std::vector<ExceptionRecord> exceptions;
};

/// Success: no exceptions, and every declared output landed in results.
bool is_success(const ExecutionOutcome& outcome, const DslProgram& program);

/// Evaluates statements in order; records the first failure per statement
/// and keeps going, so one run reports every independent defect.
ExecutionOutcome execute(const DslProgram& program, const std::map<std::string, Decimal>& env);

/// Deterministic line-referenced diagnostics for the correction prompt.
/// Blocks appear in statement order (character order for syntax errors).
std::string format_exceptions(const std::vector<ExceptionRecord>& exceptions,
                              std::string_view program_text);

std::string pretty_print(const Expr& expr);
std::string pretty_print(const DslProgram& program);

/// Structural equality, ignoring source spans.
bool structurally_equal(const Expr& a, const Expr& b);
bool structurally_equal(const DslProgram& a, const DslProgram& b);

}  // namespace ccb::calcdsl
