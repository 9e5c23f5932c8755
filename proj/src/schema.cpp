#include "ccb/schema.hpp"

#include "ccb/calcdsl.hpp"
#include "ccb/errors.hpp"
#include "ccb/util.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <set>

namespace ccb::schema {

namespace {

struct Suffix {
    std::string_view word;
    int exp10;
    bool needs_space;  // English words are separate tokens; CJK units attach
};

constexpr Suffix kSuffixes[] = {
    {"thousand", 3, true}, {"million", 6, true}, {"billion", 9, true},
    {"万", 4, false},      {"亿", 8, false},
};

std::optional<std::pair<std::size_t, int>> find_suffix(std::string_view t) {
    for (const Suffix& s : kSuffixes) {
        if (t.size() <= s.word.size()) continue;
        std::size_t at = t.size() - s.word.size();
        if (s.needs_space) {
            if (to_lower(t.substr(at)) == s.word &&
                (t[at - 1] == ' ' || t[at - 1] == '\t'))
                return {{at, s.exp10}};
        } else if (t.substr(at) == s.word) {
            return {{at, s.exp10}};
        }
    }
    return std::nullopt;
}

bool dsl_legal_name(const std::string& name) {
    calcdsl::ExprParse parsed = calcdsl::parse_expression(name);
    return parsed.errors.empty() && parsed.expr->kind == calcdsl::Expr::Kind::Variable &&
           parsed.expr->name == name;
}

}  // namespace

NormalizedLiteral normalize_magnitude(std::string_view text) {
    std::string_view trimmed = trim(text);
    if (trimmed.empty()) throw NumberFormatError("empty magnitude text");

    NormalizedLiteral out;
    out.original_text = std::string(trimmed);
    out.scale_applied = Decimal(1);

    std::string_view mantissa = trimmed;
    if (auto hit = find_suffix(trimmed)) {
        mantissa = trim(trimmed.substr(0, hit->first));
        if (find_suffix(mantissa))
            throw NumberFormatError("scale words do not compose: \"" +
                                    std::string(trimmed) + "\"");
        out.scale_applied = Decimal::scaled(1, hit->second);
    }
    out.value = statements::parse_money(mantissa) * out.scale_applied;
    return out;
}

std::string_view to_string(DefectKind kind) {
    switch (kind) {
        case DefectKind::UnknownLine: return "UnknownLine";
        case DefectKind::BadNumber: return "BadNumber";
        case DefectKind::BadVarName: return "BadVarName";
        case DefectKind::DuplicateBinding: return "DuplicateBinding";
        case DefectKind::UnboundIdentifier: return "UnboundIdentifier";
        case DefectKind::FormulaSyntax: return "FormulaSyntax";
        case DefectKind::UnknownTarget: return "UnknownTarget";
        case DefectKind::MissingFormula: return "MissingFormula";
        case DefectKind::DuplicateFormula: return "DuplicateFormula";
    }
    return "";
}

namespace {

std::optional<Provenance> parse_provenance(std::string_view comment) {
    // kind/scope/year/raw label; the label may itself contain '/'
    std::array<std::string_view, 4> parts;
    std::string_view rest = comment;
    for (int i = 0; i < 3; ++i) {
        std::size_t slash = rest.find('/');
        if (slash == std::string_view::npos) return std::nullopt;
        parts[i] = trim(rest.substr(0, slash));
        rest = rest.substr(slash + 1);
    }
    parts[3] = trim(rest);

    auto kind = statements::statement_kind_from_string(parts[0]);
    auto scope = statements::scope_from_string(parts[1]);
    if (!kind || !scope || parts[3].empty()) return std::nullopt;
    int year = 0;
    auto [ptr, ec] = std::from_chars(parts[2].data(), parts[2].data() + parts[2].size(), year);
    if (ec != std::errc() || ptr != parts[2].data() + parts[2].size()) return std::nullopt;

    return Provenance{*kind, *scope, year, std::string(parts[3])};
}

void parse_var_line(std::string_view body, CalculationSchema& schema,
                    std::vector<Defect>& defects, std::string_view whole_line) {
    std::size_t eq = body.find('=');
    if (eq == std::string_view::npos) {
        defects.push_back({DefectKind::UnknownLine, std::string(whole_line),
                           "VAR line has no `=`"});
        return;
    }
    std::string name(trim(body.substr(0, eq)));
    std::string_view value_part = body.substr(eq + 1);
    std::string_view comment;
    if (std::size_t hash = value_part.find('#'); hash != std::string_view::npos) {
        comment = trim(value_part.substr(hash + 1));
        value_part = value_part.substr(0, hash);
    }
    value_part = trim(value_part);
    if (name.empty() || value_part.empty()) {
        defects.push_back({DefectKind::UnknownLine, std::string(whole_line),
                           "VAR line needs a name and a value"});
        return;
    }
    if (!dsl_legal_name(name)) {
        defects.push_back({DefectKind::BadVarName, name,
                           "not a usable identifier (lowercase letters, digits, `_`, "
                           "and not a reserved word)"});
        return;
    }
    VariableBinding binding;
    binding.name = std::move(name);
    try {
        binding.literal = normalize_magnitude(value_part);
    } catch (const NumberFormatError& err) {
        defects.push_back({DefectKind::BadNumber, binding.name, err.what()});
        return;
    }
    if (!comment.empty()) binding.provenance = parse_provenance(comment);
    schema.bindings.push_back(std::move(binding));
}

void parse_formula_line(std::string_view body, CalculationSchema& schema,
                        std::vector<Defect>& defects, std::string_view whole_line) {
    std::size_t eq = body.find('=');
    if (eq == std::string_view::npos) {
        defects.push_back({DefectKind::UnknownLine, std::string(whole_line),
                           "FORMULA line has no `=`"});
        return;
    }
    std::string_view id_text = trim(body.substr(0, eq));
    std::string_view expr_text = trim(body.substr(eq + 1));
    auto id = indicators::indicator_from_string(id_text);
    if (!id) {
        defects.push_back({DefectKind::UnknownTarget, std::string(id_text),
                           "not an indicator id"});
        return;
    }
    schema.formulas.emplace_back(*id, std::string(expr_text));
}

std::vector<indicators::IndicatorId> parse_targets(std::string_view payload) {
    std::vector<indicators::IndicatorId> targets;
    for (const std::string& piece : split(payload, ',')) {
        std::string_view id_text = trim(piece);
        if (id_text.empty())
            throw SchemaParseError("malformed target list: empty entry");
        auto id = indicators::indicator_from_string(id_text);
        if (!id)
            throw SchemaParseError("unknown target indicator \"" + std::string(id_text) +
                                   "\"");
        if (std::find(targets.begin(), targets.end(), *id) != targets.end())
            throw SchemaParseError("duplicate target \"" + std::string(id_text) + "\"");
        targets.push_back(*id);
    }
    if (targets.empty()) throw SchemaParseError("empty targets section");
    return targets;
}

}  // namespace

ParsedSchema parse_schema(std::string_view text) {
    std::vector<std::string> lines = split(text, '\n');
    std::size_t open = lines.size(), close = lines.size();
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (trim(lines[i]) == "===SCHEMA===") {
            open = i;
            break;
        }
    }
    if (open == lines.size()) throw SchemaParseError("missing ===SCHEMA=== fence");
    for (std::size_t i = open + 1; i < lines.size(); ++i) {
        if (trim(lines[i]) == "===END===") {
            close = i;
            break;
        }
    }
    if (close == lines.size()) throw SchemaParseError("missing ===END=== fence");

    ParsedSchema out;
    bool saw_targets = false;
    for (std::size_t i = open + 1; i < close; ++i) {
        std::string_view line = trim(lines[i]);
        if (line.empty()) continue;
        if (line.starts_with("TARGETS")) {
            std::string_view after = trim(line.substr(7));
            if (after.starts_with(":")) {
                if (saw_targets) throw SchemaParseError("duplicate TARGETS line");
                saw_targets = true;
                out.schema.targets = parse_targets(after.substr(1));
                continue;
            }
        }
        if (line.starts_with("VAR") && line.size() > 3 &&
            (line[3] == ' ' || line[3] == '\t')) {
            parse_var_line(line.substr(4), out.schema, out.defects, line);
            continue;
        }
        if (line.starts_with("FORMULA") && line.size() > 7 &&
            (line[7] == ' ' || line[7] == '\t')) {
            parse_formula_line(line.substr(8), out.schema, out.defects, line);
            continue;
        }
        out.defects.push_back({DefectKind::UnknownLine, std::string(line),
                               "line matches no schema production"});
    }
    if (!saw_targets) throw SchemaParseError("missing TARGETS line");

    std::vector<Defect> invariant_defects = validate_schema(out.schema);
    out.defects.insert(out.defects.end(), invariant_defects.begin(),
                       invariant_defects.end());
    return out;
}

std::vector<Defect> validate_schema(const CalculationSchema& schema) {
    std::vector<Defect> out;

    std::set<std::string> names, duplicate_reported;
    for (const VariableBinding& binding : schema.bindings) {
        if (!dsl_legal_name(binding.name))
            out.push_back({DefectKind::BadVarName, binding.name,
                           "not a usable identifier"});
        if (!names.insert(binding.name).second &&
            duplicate_reported.insert(binding.name).second)
            out.push_back({DefectKind::DuplicateBinding, binding.name,
                           "bound more than once"});
    }

    std::set<indicators::IndicatorId> target_set(schema.targets.begin(),
                                                 schema.targets.end());
    std::map<indicators::IndicatorId, int> formula_counts;
    for (const auto& [id, text] : schema.formulas) ++formula_counts[id];
    for (indicators::IndicatorId target : schema.targets) {
        auto it = formula_counts.find(target);
        if (it == formula_counts.end())
            out.push_back({DefectKind::MissingFormula,
                           std::string(indicators::to_string(target)),
                           "target has no formula"});
        else if (it->second > 1)
            out.push_back({DefectKind::DuplicateFormula,
                           std::string(indicators::to_string(target)),
                           "target has more than one formula"});
    }
    std::set<indicators::IndicatorId> stray_reported;
    for (const auto& [id, text] : schema.formulas)
        if (!target_set.contains(id) && stray_reported.insert(id).second)
            out.push_back({DefectKind::UnknownTarget,
                           std::string(indicators::to_string(id)),
                           "formula for an id outside the target list"});

    std::set<std::string> unbound_reported;
    for (const auto& [id, text] : schema.formulas) {
        calcdsl::ExprParse parsed = calcdsl::parse_expression(text);
        if (!parsed.errors.empty()) {
            out.push_back({DefectKind::FormulaSyntax,
                           std::string(indicators::to_string(id)),
                           parsed.errors[0].message});
            continue;
        }
        for (const std::string& name : calcdsl::referenced_variables(*parsed.expr))
            if (!names.contains(name) && unbound_reported.insert(name).second)
                out.push_back({DefectKind::UnboundIdentifier, name,
                               "referenced but never bound"});
    }
    return out;
}

std::map<std::string, Decimal> binding_env(const CalculationSchema& schema) {
    std::map<std::string, Decimal> env;
    for (const VariableBinding& binding : schema.bindings)
        env[binding.name] = binding.literal.value;
    return env;
}

std::string render_schema(const CalculationSchema& schema) {
    std::string out = "===SCHEMA===\nTARGETS: ";
    for (std::size_t i = 0; i < schema.targets.size(); ++i) {
        if (i) out += ", ";
        out += indicators::to_string(schema.targets[i]);
    }
    out += "\n";
    for (const VariableBinding& binding : schema.bindings) {
        out += "VAR " + binding.name + " = ";
        out += binding.literal.original_text.empty() ? binding.literal.value.to_string()
                                                     : binding.literal.original_text;
        if (binding.provenance) {
            const Provenance& p = *binding.provenance;
            out += " # ";
            out += statements::to_string(p.kind);
            out += "/";
            out += statements::to_string(p.scope);
            out += "/" + std::to_string(p.fiscal_year) + "/" + p.raw_label;
        }
        out += "\n";
    }
    for (const auto& [id, text] : schema.formulas) {
        out += "FORMULA ";
        out += indicators::to_string(id);
        out += " = " + text + "\n";
    }
    out += "===END===\n";
    return out;
}

std::string format_defects(const std::vector<Defect>& defects) {
    std::string out;
    for (const Defect& defect : defects) {
        out += "- ";
        out += to_string(defect.kind);
        out += ": " + defect.subject + ": " + defect.message + "\n";
    }
    return out;
}

}  // namespace ccb::schema
