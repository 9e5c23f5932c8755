#include "ccb/calcdsl.hpp"

#include "ccb/util.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace ccb::calcdsl {

namespace {

// ---------------------------------------------------------------------------
// Lexer

enum class TokKind {
    Ident,
    Number,
    KwOutput,
    KwFn,
    KwDays,
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
    Comma,
    Equals,
    End,
};

struct Token {
    TokKind kind;
    std::string_view text;
    SourceSpan span;
    Expr::Fn fn = Expr::Fn::Avg;
};

struct ParseError {
    std::string message;
    SourceSpan span;
};

bool ident_start(char c) { return (c >= 'a' && c <= 'z') || c == '_'; }
bool ident_char(char c) { return ident_start(c) || (c >= '0' && c <= '9'); }
bool word_char(char c) {
    return ident_char(c) || (c >= 'A' && c <= 'Z');
}

std::vector<Token> lex_line(std::string_view line, std::size_t base) {
    std::vector<Token> tokens;
    std::size_t i = 0;
    auto span_at = [&](std::size_t b, std::size_t e) { return SourceSpan{base + b, base + e}; };
    while (i < line.size()) {
        char c = line[i];
        if (c == ' ' || c == '\t' || c == '\r') {
            ++i;
            continue;
        }
        if (c == '#') break;  // comment to end of line
        std::size_t start = i;
        if (word_char(c) && !(c >= '0' && c <= '9')) {
            while (i < line.size() && word_char(line[i])) ++i;
            std::string_view word = line.substr(start, i - start);
            Token tok{TokKind::Ident, word, span_at(start, i)};
            if (word == "output") {
                tok.kind = TokKind::KwOutput;
            } else if (word == "DAYS") {
                tok.kind = TokKind::KwDays;
            } else if (word == "avg" || word == "abs" || word == "min" || word == "max") {
                tok.kind = TokKind::KwFn;
                tok.fn = word == "avg"   ? Expr::Fn::Avg
                         : word == "abs" ? Expr::Fn::Abs
                         : word == "min" ? Expr::Fn::Min
                                         : Expr::Fn::Max;
            } else {
                if (!ident_start(word[0]) ||
                    !std::all_of(word.begin(), word.end(), ident_char))
                    throw ParseError{"invalid identifier `" + std::string(word) +
                                         "` (identifiers are lowercase)",
                                     span_at(start, i)};
            }
            tokens.push_back(tok);
            continue;
        }
        if (c >= '0' && c <= '9') {
            while (i < line.size() && line[i] >= '0' && line[i] <= '9') ++i;
            if (i < line.size() && line[i] == '.') {
                ++i;
                if (i >= line.size() || !(line[i] >= '0' && line[i] <= '9'))
                    throw ParseError{"malformed number: digits required after decimal point",
                                     span_at(start, i)};
                while (i < line.size() && line[i] >= '0' && line[i] <= '9') ++i;
            }
            tokens.push_back({TokKind::Number, line.substr(start, i - start),
                              span_at(start, i)});
            continue;
        }
        TokKind kind;
        switch (c) {
            case '+': kind = TokKind::Plus; break;
            case '-': kind = TokKind::Minus; break;
            case '*': kind = TokKind::Star; break;
            case '/': kind = TokKind::Slash; break;
            case '(': kind = TokKind::LParen; break;
            case ')': kind = TokKind::RParen; break;
            case ',': kind = TokKind::Comma; break;
            case '=': kind = TokKind::Equals; break;
            default:
                throw ParseError{std::string("unexpected character `") + c + "`",
                                 span_at(start, start + 1)};
        }
        ++i;
        tokens.push_back({kind, line.substr(start, 1), span_at(start, start + 1)});
    }
    tokens.push_back({TokKind::End, {}, span_at(line.size(), line.size())});
    return tokens;
}

// ---------------------------------------------------------------------------
// Parser

class LineParser {
public:
    explicit LineParser(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

    ExprPtr parse_expr_only() {
        ExprPtr e = parse_expr();
        expect_end();
        return e;
    }

    Stmt parse_stmt(SourceSpan line_span) {
        Stmt stmt;
        stmt.span = line_span;
        if (peek().kind == TokKind::KwOutput) {
            advance();
            stmt.kind = Stmt::Kind::Output;
            if (peek().kind == TokKind::Ident && peek(1).kind == TokKind::End) {
                Token name = advance();
                stmt.name = std::string(name.text);
                auto var = std::make_shared<Expr>();
                var->kind = Expr::Kind::Variable;
                var->name = stmt.name;
                var->span = name.span;
                stmt.expr = std::move(var);
                advance();
                return stmt;
            }
            stmt.expr = parse_expr();
            expect_end();
            stmt.name = pretty_print(*stmt.expr);
            return stmt;
        }
        if (peek().kind == TokKind::Ident) {
            Token name = advance();
            if (peek().kind != TokKind::Equals)
                throw ParseError{"expected `=` after identifier", peek().span};
            advance();
            stmt.kind = Stmt::Kind::Assign;
            stmt.name = std::string(name.text);
            stmt.expr = parse_expr();
            expect_end();
            return stmt;
        }
        throw ParseError{"expected an assignment or an output statement", peek().span};
    }

private:
    const Token& peek(std::size_t ahead = 0) const {
        std::size_t i = std::min(pos_ + ahead, tokens_.size() - 1);
        return tokens_[i];
    }
    Token advance() { return tokens_[std::min(pos_++, tokens_.size() - 1)]; }

    void expect_end() {
        if (peek().kind != TokKind::End)
            throw ParseError{"unexpected trailing input `" + std::string(peek().text) + "`",
                             peek().span};
    }

    ExprPtr parse_expr() {
        ExprPtr lhs = parse_term();
        while (peek().kind == TokKind::Plus || peek().kind == TokKind::Minus) {
            Token op = advance();
            require_operand(op);
            ExprPtr rhs = parse_term();
            lhs = make_binary(op.kind == TokKind::Plus ? '+' : '-', std::move(lhs),
                              std::move(rhs));
        }
        return lhs;
    }

    ExprPtr parse_term() {
        ExprPtr lhs = parse_factor();
        while (peek().kind == TokKind::Star || peek().kind == TokKind::Slash) {
            Token op = advance();
            require_operand(op);
            ExprPtr rhs = parse_factor();
            lhs = make_binary(op.kind == TokKind::Star ? '*' : '/', std::move(lhs),
                              std::move(rhs));
        }
        return lhs;
    }

    // '*' and '/' can never begin an operand, so report the whole dangling
    // operator sequence as one span (e.g. the "+*" in "1 +* 2").
    void require_operand(const Token& op) {
        const Token& next = peek();
        if (next.kind == TokKind::Star || next.kind == TokKind::Slash)
            throw ParseError{"expected a value between `" + std::string(op.text) +
                                 "` and `" + std::string(next.text) + "`",
                             SourceSpan{op.span.begin, next.span.end}};
    }

    ExprPtr parse_factor() {
        const Token& tok = peek();
        switch (tok.kind) {
            case TokKind::Number: {
                advance();
                auto e = std::make_shared<Expr>();
                e->kind = Expr::Kind::Number;
                e->number = Decimal::parse(tok.text);
                e->span = tok.span;
                return e;
            }
            case TokKind::Plus: {
                // a '+' sign is part of its literal, so it must touch the digits
                Token plus = advance();
                if (peek().kind != TokKind::Number || peek().span.begin != plus.span.end)
                    throw ParseError{"expected a number immediately after `+`", plus.span};
                return parse_factor();
            }
            case TokKind::Minus: {
                Token minus = advance();
                ExprPtr inner = parse_factor();
                if (inner->kind == Expr::Kind::Number) {
                    auto e = std::make_shared<Expr>();
                    e->kind = Expr::Kind::Number;
                    e->number = -inner->number;
                    e->span = SourceSpan{minus.span.begin, inner->span.end};
                    return e;
                }
                // -x desugars to 0 - x
                auto zero = std::make_shared<Expr>();
                zero->kind = Expr::Kind::Number;
                zero->span = minus.span;
                auto e = std::make_shared<Expr>();
                e->kind = Expr::Kind::Binary;
                e->op = '-';
                e->span = SourceSpan{minus.span.begin, inner->span.end};
                e->args = {std::move(zero), std::move(inner)};
                return e;
            }
            case TokKind::Ident: {
                advance();
                auto e = std::make_shared<Expr>();
                e->kind = Expr::Kind::Variable;
                e->name = std::string(tok.text);
                e->span = tok.span;
                return e;
            }
            case TokKind::KwDays: {
                advance();
                auto e = std::make_shared<Expr>();
                e->kind = Expr::Kind::Days;
                e->number = Decimal(365);
                e->span = tok.span;
                return e;
            }
            case TokKind::KwFn:
                return parse_call();
            case TokKind::LParen: {
                advance();
                ExprPtr inner = parse_expr();
                if (peek().kind != TokKind::RParen)
                    throw ParseError{"expected `)`", peek().span};
                advance();
                return inner;
            }
            default:
                throw ParseError{"expected a value", tok.span};
        }
    }

    ExprPtr parse_call() {
        Token fn = advance();
        if (peek().kind != TokKind::LParen)
            throw ParseError{"expected `(` after `" + std::string(fn.text) + "`", peek().span};
        advance();
        auto call = std::make_shared<Expr>();
        call->kind = Expr::Kind::Call;
        call->fn = fn.fn;
        call->args.push_back(parse_expr());
        while (peek().kind == TokKind::Comma) {
            advance();
            call->args.push_back(parse_expr());
        }
        if (peek().kind != TokKind::RParen)
            throw ParseError{"expected `)`", peek().span};
        Token close = advance();
        call->span = SourceSpan{fn.span.begin, close.span.end};
        if (fn.fn == Expr::Fn::Abs && call->args.size() != 1)
            throw ParseError{"abs takes exactly one argument", call->span};
        return call;
    }

    static ExprPtr make_binary(char op, ExprPtr lhs, ExprPtr rhs) {
        auto e = std::make_shared<Expr>();
        e->kind = Expr::Kind::Binary;
        e->op = op;
        e->span = SourceSpan{lhs->span.begin, rhs->span.end};
        e->args = {std::move(lhs), std::move(rhs)};
        return e;
    }

    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
};

struct SourceLine {
    std::string_view text;  // without the newline
    std::size_t begin = 0;
};

std::vector<SourceLine> split_lines(std::string_view text) {
    std::vector<SourceLine> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t nl = text.find('\n', start);
        std::size_t end = nl == std::string_view::npos ? text.size() : nl;
        lines.push_back({text.substr(start, end - start), start});
        if (nl == std::string_view::npos) break;
        start = nl + 1;
    }
    return lines;
}

bool blank_line(std::string_view line) {
    for (char c : line) {
        if (c == '#') return true;
        if (c != ' ' && c != '\t' && c != '\r') return false;
    }
    return true;
}

// Statement-bearing lines in order; statement index n lives on the nth one.
std::vector<SourceLine> effective_lines(std::string_view text) {
    std::vector<SourceLine> out;
    for (const SourceLine& line : split_lines(text))
        if (!blank_line(line.text)) out.push_back(line);
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string_view to_string(ExceptionKind kind) {
    switch (kind) {
        case ExceptionKind::SyntaxError: return "SyntaxError";
        case ExceptionKind::UndefinedVariable: return "UndefinedVariable";
        case ExceptionKind::DivisionByZero: return "DivisionByZero";
        case ExceptionKind::NonFiniteResult: return "NonFiniteResult";
        case ExceptionKind::MissingOutput: return "MissingOutput";
        case ExceptionKind::ResourceLimit: return "ResourceLimit";
    }
    return "";
}

ParseResult parse_dsl(std::string_view text) {
    DslProgram program;
    std::vector<ExceptionRecord> errors;
    for (const SourceLine& line : effective_lines(text)) {
        SourceSpan line_span{line.begin, line.begin + line.text.size()};
        try {
            LineParser parser(lex_line(line.text, line.begin));
            program.statements.push_back(parser.parse_stmt(line_span));
        } catch (const ParseError& err) {
            errors.push_back({ExceptionKind::SyntaxError, err.message, err.span});
        }
    }
    if (errors.empty()) {
        if (program.statements.empty()) {
            errors.push_back({ExceptionKind::SyntaxError, "empty program",
                              SourceSpan{0, text.size()}});
        } else {
            if (program.statements.size() > kMaxStatements)
                errors.push_back({ExceptionKind::SyntaxError,
                                  "program exceeds the " +
                                      std::to_string(kMaxStatements) +
                                      " statement limit",
                                  SourceSpan{program.statements[kMaxStatements].span.begin,
                                             text.size()}});
            bool has_output = std::any_of(
                program.statements.begin(), program.statements.end(),
                [](const Stmt& s) { return s.kind == Stmt::Kind::Output; });
            if (!has_output)
                errors.push_back({ExceptionKind::SyntaxError,
                                  "program declares no output statement",
                                  SourceSpan{0, text.size()}});
        }
    }
    if (!errors.empty()) return errors;
    return program;
}

ExprParse parse_expression(std::string_view text) {
    ExprParse out;
    try {
        LineParser parser(lex_line(text, 0));
        out.expr = parser.parse_expr_only();
    } catch (const ParseError& err) {
        out.errors.push_back({ExceptionKind::SyntaxError, err.message, err.span});
    }
    return out;
}

std::vector<std::string> referenced_variables(const Expr& expr) {
    std::set<std::string> names;
    auto walk = [&](auto&& self, const Expr& e) -> void {
        if (e.kind == Expr::Kind::Variable) names.insert(e.name);
        for (const auto& arg : e.args) self(self, *arg);
    };
    walk(walk, expr);
    return {names.begin(), names.end()};
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

struct EvalFail {
    ExceptionKind kind;
    std::string message;
};
struct PoisonSignal {};

void check_value(const Decimal& value, const Expr& at) {
    if (!value.within_range())
        throw EvalFail{ExceptionKind::NonFiniteResult,
                       "magnitude out of range in `" + pretty_print(at) + "`"};
    if (value.digit_count() > kMaxCoefficientDigits)
        throw EvalFail{ExceptionKind::ResourceLimit,
                       "number grew past " + std::to_string(kMaxCoefficientDigits) +
                           " digits in `" + pretty_print(at) + "`"};
}

Decimal eval(const Expr& e, const std::map<std::string, Decimal>& vars,
             const std::set<std::string>& poisoned) {
    switch (e.kind) {
        case Expr::Kind::Number:
        case Expr::Kind::Days:
            return e.number;
        case Expr::Kind::Variable: {
            auto it = vars.find(e.name);
            if (it != vars.end()) return it->second;
            if (poisoned.contains(e.name)) throw PoisonSignal{};
            throw EvalFail{ExceptionKind::UndefinedVariable,
                           "variable `" + e.name + "` is not defined"};
        }
        case Expr::Kind::Binary: {
            Decimal lhs = eval(*e.args[0], vars, poisoned);
            Decimal rhs = eval(*e.args[1], vars, poisoned);
            Decimal result;
            switch (e.op) {
                case '+': result = lhs + rhs; break;
                case '-': result = lhs - rhs; break;
                case '*': result = lhs * rhs; break;
                case '/':
                    if (rhs.is_zero())
                        throw EvalFail{ExceptionKind::DivisionByZero,
                                       "divisor `" + pretty_print(*e.args[1]) +
                                           "` evaluated to zero in `" + pretty_print(e) + "`"};
                    result = lhs.divide(rhs);
                    break;
            }
            check_value(result, e);
            return result;
        }
        case Expr::Kind::Call: {
            std::vector<Decimal> args;
            args.reserve(e.args.size());
            for (const auto& arg : e.args) args.push_back(eval(*arg, vars, poisoned));
            Decimal result;
            switch (e.fn) {
                case Expr::Fn::Avg: {
                    Decimal sum = args[0];
                    for (std::size_t i = 1; i < args.size(); ++i) sum = sum + args[i];
                    result = sum.divide(Decimal(static_cast<long>(args.size())));
                    break;
                }
                case Expr::Fn::Abs:
                    result = args[0].abs();
                    break;
                case Expr::Fn::Min: {
                    result = args[0];
                    for (const Decimal& a : args)
                        if (a < result) result = a;
                    break;
                }
                case Expr::Fn::Max: {
                    result = args[0];
                    for (const Decimal& a : args)
                        if (a > result) result = a;
                    break;
                }
            }
            check_value(result, e);
            return result;
        }
    }
    return Decimal();
}

}  // namespace

bool is_success(const ExecutionOutcome& outcome, const DslProgram& program) {
    if (!outcome.exceptions.empty()) return false;
    for (const Stmt& st : program.statements)
        if (st.kind == Stmt::Kind::Output && !outcome.results.contains(st.name)) return false;
    return true;
}

ExecutionOutcome execute(const DslProgram& program, const std::map<std::string, Decimal>& env) {
    ExecutionOutcome out;
    std::map<std::string, Decimal> vars(env);
    std::set<std::string> poisoned;

    std::size_t budget = std::min(program.statements.size(), kMaxStatements);
    for (std::size_t i = 0; i < budget; ++i) {
        const Stmt& st = program.statements[i];
        try {
            Decimal value = eval(*st.expr, vars, poisoned);
            check_value(value, *st.expr);
            if (st.kind == Stmt::Kind::Assign) {
                vars[st.name] = std::move(value);
                poisoned.erase(st.name);
            } else {
                out.results[st.name] = std::move(value);
            }
        } catch (const EvalFail& fail) {
            out.exceptions.push_back({fail.kind, fail.message, i});
            if (st.kind == Stmt::Kind::Assign) {
                vars.erase(st.name);
                poisoned.insert(st.name);
            }
        } catch (const PoisonSignal&) {
            // root cause already recorded; keep the vector noise-free
            if (st.kind == Stmt::Kind::Assign) {
                vars.erase(st.name);
                poisoned.insert(st.name);
            }
        }
    }
    if (program.statements.size() > kMaxStatements)
        out.exceptions.push_back(
            {ExceptionKind::ResourceLimit,
             "statement limit (" + std::to_string(kMaxStatements) +
                 ") reached; later statements did not run",
             kMaxStatements});

    std::set<std::string> reported;
    for (std::size_t i = 0; i < program.statements.size(); ++i) {
        const Stmt& st = program.statements[i];
        if (st.kind != Stmt::Kind::Output) continue;
        if (out.results.contains(st.name) || reported.contains(st.name)) continue;
        reported.insert(st.name);
        out.exceptions.push_back({ExceptionKind::MissingOutput,
                                  "output `" + st.name + "` was never produced", i});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

int precedence(const Expr& e) {
    if (e.kind != Expr::Kind::Binary) return 3;
    return (e.op == '*' || e.op == '/') ? 2 : 1;
}

std::string_view fn_name(Expr::Fn fn) {
    switch (fn) {
        case Expr::Fn::Avg: return "avg";
        case Expr::Fn::Abs: return "abs";
        case Expr::Fn::Min: return "min";
        case Expr::Fn::Max: return "max";
    }
    return "";
}

}  // namespace

std::string pretty_print(const Expr& expr) {
    switch (expr.kind) {
        case Expr::Kind::Number: return expr.number.to_string();
        case Expr::Kind::Variable: return expr.name;
        case Expr::Kind::Days: return "DAYS";
        case Expr::Kind::Call: {
            std::string out(fn_name(expr.fn));
            out += "(";
            for (std::size_t i = 0; i < expr.args.size(); ++i) {
                if (i) out += ", ";
                out += pretty_print(*expr.args[i]);
            }
            out += ")";
            return out;
        }
        case Expr::Kind::Binary: {
            int prec = precedence(expr);
            const Expr& lhs = *expr.args[0];
            const Expr& rhs = *expr.args[1];
            std::string left = pretty_print(lhs);
            if (precedence(lhs) < prec) left = "(" + left + ")";
            std::string right = pretty_print(rhs);
            // left-associative grammar: same-precedence right operands need parens
            if (precedence(rhs) <= prec) right = "(" + right + ")";
            return left + " " + expr.op + " " + right;
        }
    }
    return "";
}

std::string pretty_print(const DslProgram& program) {
    std::string out;
    for (const Stmt& st : program.statements) {
        if (st.kind == Stmt::Kind::Assign) {
            out += st.name;
            out += " = ";
            out += pretty_print(*st.expr);
        } else if (st.expr->kind == Expr::Kind::Variable && st.expr->name == st.name) {
            out += "output ";
            out += st.name;
        } else {
            out += "output ";
            out += pretty_print(*st.expr);
        }
        out += "\n";
    }
    return out;
}

bool structurally_equal(const Expr& a, const Expr& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
        case Expr::Kind::Number: return a.number == b.number;
        case Expr::Kind::Variable: return a.name == b.name;
        case Expr::Kind::Days: return true;
        case Expr::Kind::Binary:
            if (a.op != b.op) return false;
            break;
        case Expr::Kind::Call:
            if (a.fn != b.fn) return false;
            break;
    }
    if (a.args.size() != b.args.size()) return false;
    for (std::size_t i = 0; i < a.args.size(); ++i)
        if (!structurally_equal(*a.args[i], *b.args[i])) return false;
    return true;
}

bool structurally_equal(const DslProgram& a, const DslProgram& b) {
    if (a.statements.size() != b.statements.size()) return false;
    for (std::size_t i = 0; i < a.statements.size(); ++i) {
        const Stmt& sa = a.statements[i];
        const Stmt& sb = b.statements[i];
        if (sa.kind != sb.kind || sa.name != sb.name) return false;
        if (!structurally_equal(*sa.expr, *sb.expr)) return false;
    }
    return true;
}

std::string format_exceptions(const std::vector<ExceptionRecord>& exceptions,
                              std::string_view program_text) {
    std::vector<SourceLine> lines = effective_lines(program_text);

    // statement order; syntax errors slot in by character position
    std::vector<const ExceptionRecord*> ordered;
    ordered.reserve(exceptions.size());
    for (const auto& record : exceptions) ordered.push_back(&record);
    auto sort_key = [&](const ExceptionRecord* r) -> std::size_t {
        if (std::holds_alternative<SourceSpan>(r->location))
            return std::get<SourceSpan>(r->location).begin;
        std::size_t idx = std::get<std::size_t>(r->location);
        return idx < lines.size() ? lines[idx].begin : program_text.size() + idx;
    };
    std::stable_sort(ordered.begin(), ordered.end(),
                     [&](auto* a, auto* b) { return sort_key(a) < sort_key(b); });

    std::string out;
    std::size_t ordinal = 1;
    for (const ExceptionRecord* record : ordered) {
        out += "[" + std::to_string(ordinal++) + "] ";
        out += to_string(record->kind);
        if (std::holds_alternative<SourceSpan>(record->location)) {
            auto span = std::get<SourceSpan>(record->location);
            std::size_t b = std::min(span.begin, program_text.size());
            std::size_t e = std::min(std::max(span.end, b), program_text.size());
            out += " at " + std::to_string(span.begin) + ".." + std::to_string(span.end);
            out += ": `" + std::string(program_text.substr(b, e - b)) + "`";
        } else {
            std::size_t idx = std::get<std::size_t>(record->location);
            out += " at statement " + std::to_string(idx);
            if (idx < lines.size())
                out += ": `" + std::string(trim(lines[idx].text)) + "`";
        }
        out += "\n    ";
        out += record->message;
        out += "\n";
    }
    return out;
}

}  // namespace ccb::calcdsl
