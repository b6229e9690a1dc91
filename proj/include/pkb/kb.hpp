#pragma once

// Facts, rules and queries: the value types every other module works on,
// plus the line-oriented parser/printer and AE-fragment skolemization.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <compare>
#include <cstddef>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace pkb {

inline constexpr std::string_view kBottom = "bot";

class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& msg)
        : std::runtime_error("line " + std::to_string(line) + ": " + msg), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

struct Constant {
    std::string label;
    auto operator<=>(const Constant&) const = default;
};

struct Variable {
    std::string name;
    auto operator<=>(const Variable&) const = default;
};

// sk_<n>(args) introduced by skolemization. Once every argument is bound it
// denotes the constant whose label is the printed application.
struct SkolemTerm {
    std::string function;
    std::vector<std::variant<Constant, Variable>> args;
    auto operator<=>(const SkolemTerm&) const = default;
};

using Term = std::variant<Constant, Variable, SkolemTerm>;

struct Atom {
    std::string predicate;
    std::vector<Term> args;

    auto operator<=>(const Atom&) const = default;
    std::size_t arity() const { return args.size(); }
    bool is_bottom() const { return predicate == kBottom; }
};

struct GroundAtom {
    std::string predicate;
    std::vector<std::string> args;

    auto operator<=>(const GroundAtom&) const = default;
    std::size_t arity() const { return args.size(); }
    bool is_bottom() const { return predicate == kBottom; }
};

inline GroundAtom bottom_atom() { return GroundAtom{std::string(kBottom), {}}; }

class RuleWeight {
public:
    static RuleWeight hard() { return RuleWeight(0.0, true); }
    static RuleWeight soft(double w) { return RuleWeight(w, false); }

    bool is_hard() const noexcept { return hard_; }
    // Only meaningful for soft weights.
    double value() const noexcept { return value_; }

    auto operator<=>(const RuleWeight&) const = default;

private:
    RuleWeight(double v, bool h) : value_(v), hard_(h) {}
    double value_;
    bool hard_;
};

struct Fact {
    GroundAtom atom;
    double weight = 1.0;
    std::string source = "db";

    auto operator<=>(const Fact&) const = default;
};

struct Rule {
    std::vector<Atom> body;
    Atom head;
    RuleWeight weight = RuleWeight::hard();
    std::size_t universals = 0;   // h
    std::size_t existentials = 0; // k, eliminated by skolemization

    auto operator<=>(const Rule&) const = default;
};

struct Query {
    std::vector<Atom> body;
    Atom head;
    // Bounded universals: body variables the compiler grounds over the domain.
    std::vector<std::string> bounded;

    auto operator<=>(const Query&) const = default;
};

struct KnowledgeBase {
    std::vector<Fact> facts; // sorted by atom, unique atoms
    std::vector<Rule> rules;
    std::map<std::string, std::size_t> arity;

    std::set<std::string> domain() const {
        std::set<std::string> d;
        for (const auto& f : facts)
            d.insert(f.atom.args.begin(), f.atom.args.end());
        return d;
    }

    std::set<std::string> sources() const {
        std::set<std::string> s;
        for (const auto& f : facts) s.insert(f.source);
        return s;
    }

    const Fact* find_fact(const GroundAtom& a) const {
        auto it = std::lower_bound(facts.begin(), facts.end(), a,
                                   [](const Fact& f, const GroundAtom& x) { return f.atom < x; });
        return (it != facts.end() && it->atom == a) ? &*it : nullptr;
    }
};

// Structural equality modulo fact/rule ordering.
inline bool equivalent(const KnowledgeBase& a, const KnowledgeBase& b) {
    auto fa = a.facts, fb = b.facts;
    auto ra = a.rules, rb = b.rules;
    std::sort(fa.begin(), fa.end());
    std::sort(fb.begin(), fb.end());
    std::sort(ra.begin(), ra.end());
    std::sort(rb.begin(), rb.end());
    return fa == fb && ra == rb && a.arity == b.arity;
}

// ---------------------------------------------------------------------------
// Printing

// Shortest decimal text that parses back to exactly the same double.
inline std::string format_double(double v) {
    char buf[64];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

namespace detail {

inline bool is_ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

inline bool is_upper_start(char c) {
    return std::isupper(static_cast<unsigned char>(c)) || c == '_';
}

inline bool is_constant_start(char c) {
    return std::islower(static_cast<unsigned char>(c)) || std::isdigit(static_cast<unsigned char>(c));
}

// True when `s` is a ground term the lexer reads back unquoted as exactly `s`:
// an identifier, optionally applied to comma-separated ground terms.
inline bool is_bare_ground_term(std::string_view s, std::size_t& pos) {
    if (pos >= s.size() || !is_constant_start(s[pos])) return false;
    while (pos < s.size() && is_ident_char(s[pos])) ++pos;
    if (pos < s.size() && s[pos] == '(') {
        ++pos;
        for (;;) {
            if (!is_bare_ground_term(s, pos)) return false;
            if (pos < s.size() && s[pos] == ',') { ++pos; continue; }
            if (pos < s.size() && s[pos] == ')') { ++pos; break; }
            return false;
        }
    }
    return true;
}

inline std::string quote(std::string_view s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    out += '"';
    return out;
}

} // namespace detail

inline std::string print_constant(std::string_view label) {
    std::size_t pos = 0;
    if (detail::is_bare_ground_term(label, pos) && pos == label.size()) return std::string(label);
    return detail::quote(label);
}

inline std::string to_string(const GroundAtom& a) {
    if (a.args.empty()) return a.predicate;
    std::string s = a.predicate + "(";
    for (std::size_t i = 0; i < a.args.size(); ++i) {
        if (i) s += ',';
        s += print_constant(a.args[i]);
    }
    return s + ")";
}

inline std::string to_string(const Term& t) {
    return std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Constant>) {
                return print_constant(v.label);
            } else if constexpr (std::is_same_v<T, Variable>) {
                return v.name;
            } else {
                std::string s = v.function;
                if (v.args.empty()) return s;
                s += '(';
                for (std::size_t i = 0; i < v.args.size(); ++i) {
                    if (i) s += ',';
                    if (auto c = std::get_if<Constant>(&v.args[i]))
                        s += print_constant(c->label);
                    else
                        s += std::get<Variable>(v.args[i]).name;
                }
                return s + ')';
            }
        },
        t);
}

inline std::string to_string(const Atom& a) {
    if (a.args.empty()) return a.predicate;
    std::string s = a.predicate + "(";
    for (std::size_t i = 0; i < a.args.size(); ++i) {
        if (i) s += ',';
        s += to_string(a.args[i]);
    }
    return s + ")";
}

inline std::string to_string(const RuleWeight& w) {
    return w.is_hard() ? "hard" : format_double(w.value());
}

inline std::string to_string(const Fact& f) {
    return to_string(f.atom) + " @ w=" + format_double(f.weight) + " src=" + f.source;
}

namespace detail {
inline std::string print_body(const std::vector<Atom>& body) {
    std::string s;
    for (std::size_t i = 0; i < body.size(); ++i) {
        if (i) s += ", ";
        s += to_string(body[i]);
    }
    return s;
}
} // namespace detail

inline std::string to_string(const Rule& r) {
    return to_string(r.head) + " :- " + detail::print_body(r.body) + ". w=" + to_string(r.weight);
}

inline std::string to_string(const Query& q) {
    std::string s;
    if (!q.bounded.empty()) {
        s = "forall ";
        for (std::size_t i = 0; i < q.bounded.size(); ++i) {
            if (i) s += ", ";
            s += q.bounded[i];
        }
        s += ". ";
    }
    return s + to_string(q.head) + " :- " + detail::print_body(q.body) + ".";
}

inline std::string print(const KnowledgeBase& kb) {
    std::string out;
    for (const auto& f : kb.facts) out += to_string(f) + "\n";
    for (const auto& r : kb.rules) out += to_string(r) + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Term helpers shared by grounding and matching

// Splits the label of a ground skolem application into function and argument
// labels; nullopt for plain labels.
inline std::optional<std::pair<std::string, std::vector<std::string>>>
split_application(std::string_view label) {
    auto open = label.find('(');
    if (open == std::string_view::npos || label.back() != ')') return std::nullopt;
    std::pair<std::string, std::vector<std::string>> out{std::string(label.substr(0, open)), {}};
    int depth = 0;
    std::string cur;
    for (std::size_t i = open + 1; i + 1 < label.size(); ++i) {
        char c = label[i];
        if (c == '(') ++depth;
        if (c == ')') --depth;
        if (c == ',' && depth == 0) {
            out.second.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.second.push_back(cur);
    return out;
}

inline std::string skolem_label(const std::string& function, const std::vector<std::string>& args) {
    if (args.empty()) return function;
    std::string s = function + "(";
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (i) s += ',';
        s += print_constant(args[i]);
    }
    return s + ")";
}

inline void collect_variables(const Term& t, std::set<std::string>& out) {
    if (auto v = std::get_if<Variable>(&t)) {
        out.insert(v->name);
    } else if (auto sk = std::get_if<SkolemTerm>(&t)) {
        for (const auto& a : sk->args)
            if (auto av = std::get_if<Variable>(&a)) out.insert(av->name);
    }
}

inline std::set<std::string> variables_of(const Atom& a) {
    std::set<std::string> out;
    for (const auto& t : a.args) collect_variables(t, out);
    return out;
}

inline std::set<std::string> variables_of(const std::vector<Atom>& atoms) {
    std::set<std::string> out;
    for (const auto& a : atoms)
        for (const auto& t : a.args) collect_variables(t, out);
    return out;
}

inline bool is_safe(const std::vector<Atom>& body, const Atom& head) {
    auto bv = variables_of(body);
    for (const auto& v : variables_of(head))
        if (!bv.count(v)) return false;
    return true;
}

inline bool is_ground(const Atom& a) {
    return std::all_of(a.args.begin(), a.args.end(),
                       [](const Term& t) { return std::holds_alternative<Constant>(t); });
}

// ---------------------------------------------------------------------------
// Skolemization

enum class Quantifier { forall, exists };

struct QuantifiedVariable {
    Quantifier kind;
    std::string name;
};

// ∀…∃… prefix over a rule matrix. Variables of the matrix not bound by the
// prefix are implicitly universal.
struct QuantifiedRule {
    std::vector<QuantifiedVariable> prefix;
    Rule matrix;

    static QuantifiedRule lift(const Rule& r) { return QuantifiedRule{{}, r}; }
};

namespace detail {
inline bool is_skolem_constant(std::string_view label) {
    if (label.substr(0, 3) != "sk_" || label.size() == 3) return false;
    return std::all_of(label.begin() + 3, label.end(),
                       [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}
} // namespace detail

// Recomputes h (distinct variables) and k (distinct skolem symbols) from the
// rule's structure, so the counters survive a print/parse round trip.
inline void count_quantifiers(Rule& r) {
    std::set<std::string> vars = variables_of(r.body);
    auto hv = variables_of(r.head);
    vars.insert(hv.begin(), hv.end());
    std::set<std::string> skolems;
    auto scan = [&](const Atom& a) {
        for (const auto& t : a.args) {
            if (auto sk = std::get_if<SkolemTerm>(&t)) skolems.insert(sk->function);
            if (auto c = std::get_if<Constant>(&t); c && detail::is_skolem_constant(c->label))
                skolems.insert(c->label);
        }
    };
    scan(r.head);
    for (const auto& b : r.body) scan(b);
    r.universals = vars.size();
    r.existentials = skolems.size();
}

class SkolemError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Fresh sk_<n> names, shared across one knowledge base.
class SkolemCounter {
public:
    explicit SkolemCounter(std::size_t next = 1) : next_(next) {}
    std::string fresh() { return "sk_" + std::to_string(next_++); }
    std::size_t next() const { return next_; }

private:
    std::size_t next_;
};

inline Rule skolemize(const QuantifiedRule& qr, SkolemCounter& counter) {
    bool seen_exists = false;
    std::vector<std::string> universals;
    std::map<std::string, SkolemTerm> replacement;
    for (const auto& q : qr.prefix) {
        if (q.kind == Quantifier::exists) {
            seen_exists = true;
            SkolemTerm sk{counter.fresh(), {}};
            for (const auto& u : universals) sk.args.emplace_back(Variable{u});
            replacement[q.name] = sk;
        } else {
            if (seen_exists)
                throw SkolemError("quantifier prefix is not in the AE fragment: forall " + q.name +
                                  " follows an existential");
            universals.push_back(q.name);
        }
    }

    auto rewrite = [&](const Atom& a) {
        Atom out{a.predicate, {}};
        for (const auto& t : a.args) {
            const auto* v = std::get_if<Variable>(&t);
            auto it = v ? replacement.find(v->name) : replacement.end();
            if (it == replacement.end()) {
                out.args.push_back(t);
            } else if (it->second.args.empty()) {
                out.args.emplace_back(Constant{it->second.function});
            } else {
                out.args.emplace_back(it->second);
            }
        }
        return out;
    };

    Rule r;
    r.weight = qr.matrix.weight;
    r.head = rewrite(qr.matrix.head);
    for (const auto& b : qr.matrix.body) r.body.push_back(rewrite(b));

    count_quantifiers(r);
    return r;
}

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

class LineLexer {
public:
    LineLexer(std::string_view text, std::size_t line) : s_(text), line_(line) {}

    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(line_, msg); }

    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    bool at_end() {
        skip_ws();
        return pos_ >= s_.size();
    }
    bool peek(char c) {
        skip_ws();
        return pos_ < s_.size() && s_[pos_] == c;
    }
    bool peek(std::string_view tok) {
        skip_ws();
        return s_.substr(pos_, tok.size()) == tok;
    }
    bool accept(char c) {
        if (!peek(c)) return false;
        ++pos_;
        return true;
    }
    bool accept(std::string_view tok) {
        if (!peek(tok)) return false;
        pos_ += tok.size();
        return true;
    }
    void expect(char c) {
        if (!accept(c)) fail(std::string("expected '") + c + "'" + context());
    }
    std::string context() const {
        if (pos_ >= s_.size()) return " at end of line";
        return " near '" + std::string(s_.substr(pos_, 12)) + "'";
    }

    std::string identifier() {
        skip_ws();
        std::size_t start = pos_;
        while (pos_ < s_.size() && is_ident_char(s_[pos_])) ++pos_;
        if (start == pos_) fail("expected identifier" + context());
        return std::string(s_.substr(start, pos_ - start));
    }

    // Keyword followed by a non-identifier character.
    bool accept_keyword(std::string_view kw) {
        skip_ws();
        if (s_.substr(pos_, kw.size()) != kw) return false;
        std::size_t end = pos_ + kw.size();
        if (end < s_.size() && is_ident_char(s_[end])) return false;
        pos_ = end;
        return true;
    }

    std::string quoted() {
        expect('"');
        std::string out;
        while (pos_ < s_.size() && s_[pos_] != '"') {
            if (s_[pos_] == '\\' && pos_ + 1 < s_.size()) ++pos_;
            out += s_[pos_++];
        }
        if (pos_ >= s_.size()) fail("unterminated string");
        ++pos_;
        return out;
    }

    Term term() {
        skip_ws();
        if (pos_ >= s_.size()) fail("expected term at end of line");
        char c = s_[pos_];
        if (c == '"') {
            auto label = quoted();
            if (label.empty()) fail("empty constant");
            if (label == "NULL") fail("NULL is not a domain constant");
            return Constant{label};
        }
        if (is_upper_start(c)) return Variable{identifier()};
        if (!is_constant_start(c)) fail("expected term" + context());
        auto name = identifier();
        if (!accept('(')) return Constant{name};
        SkolemTerm app{name, {}};
        bool ground = true;
        std::vector<std::string> labels;
        do {
            Term t = term();
            if (auto cst = std::get_if<Constant>(&t)) {
                labels.push_back(cst->label);
                app.args.emplace_back(*cst);
            } else if (auto v = std::get_if<Variable>(&t)) {
                ground = false;
                app.args.emplace_back(*v);
            } else {
                fail("nested function terms must be ground");
            }
        } while (accept(','));
        expect(')');
        if (ground) return Constant{skolem_label(name, labels)};
        return app;
    }

    Atom atom() {
        Atom a{identifier(), {}};
        if (!std::islower(static_cast<unsigned char>(a.predicate[0])))
            fail("predicate '" + a.predicate + "' must start lowercase");
        if (accept('(')) {
            if (!accept(')')) {
                do a.args.push_back(term());
                while (accept(','));
                expect(')');
            }
        }
        return a;
    }

    double number() {
        skip_ws();
        std::size_t start = pos_;
        while (pos_ < s_.size() && !std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        std::string tok(s_.substr(start, pos_ - start));
        char* end = nullptr;
        double v = std::strtod(tok.c_str(), &end);
        if (tok.empty() || end != tok.c_str() + tok.size()) fail("malformed number '" + tok + "'");
        return v;
    }

    std::string word() {
        skip_ws();
        std::size_t start = pos_;
        while (pos_ < s_.size() && !std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        if (start == pos_) fail("expected value" + context());
        return std::string(s_.substr(start, pos_ - start));
    }

    std::size_t line() const { return line_; }

private:
    std::string_view s_;
    std::size_t pos_ = 0;
    std::size_t line_;
};

inline std::string_view strip_comment(std::string_view line) {
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
        if (line[i] == '#' && !in_string) return line.substr(0, i);
    }
    return line;
}

inline std::vector<QuantifiedVariable> parse_prefix(LineLexer& lx) {
    std::vector<QuantifiedVariable> prefix;
    for (;;) {
        Quantifier kind;
        if (lx.accept_keyword("forall")) {
            kind = Quantifier::forall;
        } else if (lx.accept_keyword("exists")) {
            kind = Quantifier::exists;
        } else {
            break;
        }
        do {
            auto v = lx.identifier();
            if (!is_upper_start(v[0])) lx.fail("quantified name '" + v + "' is not a variable");
            prefix.push_back({kind, v});
        } while (lx.accept(','));
        lx.accept('.');
    }
    return prefix;
}

struct RuleShape {
    std::vector<QuantifiedVariable> prefix;
    Atom head;
    std::vector<Atom> body;
};

inline RuleShape parse_rule_shape(LineLexer& lx) {
    RuleShape r;
    r.prefix = parse_prefix(lx);
    r.head = lx.atom();
    if (!lx.accept(":-")) lx.fail("expected ':-'" + lx.context());
    if (lx.peek('.')) lx.fail("empty body");
    do {
        auto a = lx.atom();
        if (a.is_bottom()) lx.fail("'bot' cannot appear in a body");
        r.body.push_back(std::move(a));
    } while (lx.accept(','));
    lx.expect('.');
    if (r.head.is_bottom() && r.head.arity() != 0) lx.fail("'bot' has arity 0");
    return r;
}

class ArityTable {
public:
    explicit ArityTable(std::map<std::string, std::size_t>& t) : t_(t) {}
    void note(const std::string& pred, std::size_t n, const LineLexer& lx) {
        auto [it, inserted] = t_.emplace(pred, n);
        if (!inserted && it->second != n)
            lx.fail("arity conflict for '" + pred + "': " + std::to_string(n) + " vs " +
                    std::to_string(it->second));
    }

private:
    std::map<std::string, std::size_t>& t_;
};

} // namespace detail

inline KnowledgeBase parse_kb(std::string_view text) {
    KnowledgeBase kb;
    detail::ArityTable arity(kb.arity);
    arity.note(std::string(kBottom), 0, detail::LineLexer("", 0));
    SkolemCounter skolems;
    std::set<GroundAtom> seen;

    std::size_t lineno = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto nl = text.find('\n', start);
        auto raw = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
        start = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++lineno;

        auto body = detail::strip_comment(raw);
        detail::LineLexer lx(body, lineno);
        if (lx.at_end()) continue;

        if (body.find(":-") != std::string_view::npos) {
            auto shape = detail::parse_rule_shape(lx);
            if (!lx.accept_keyword("w")) lx.fail("rule needs a weight 'w=<float>' or 'w=hard'");
            lx.expect('=');
            QuantifiedRule qr{shape.prefix, Rule{}};
            if (lx.accept_keyword("hard")) {
                qr.matrix.weight = RuleWeight::hard();
            } else {
                double w = lx.number();
                if (!(w > 0.0) || w == std::numeric_limits<double>::infinity())
                    lx.fail("rule weight must be a positive finite number or 'hard'");
                qr.matrix.weight = RuleWeight::soft(w);
            }
            if (!lx.at_end()) lx.fail("trailing input" + lx.context());
            qr.matrix.head = shape.head;
            qr.matrix.body = shape.body;
            Rule r;
            try {
                r = skolemize(qr, skolems);
            } catch (const SkolemError& e) {
                lx.fail(e.what());
            }
            if (!is_safe(r.body, r.head)) lx.fail("unsafe rule: head variable missing from body");
            arity.note(r.head.predicate, r.head.arity(), lx);
            for (const auto& b : r.body) arity.note(b.predicate, b.arity(), lx);
            kb.rules.push_back(std::move(r));
            continue;
        }

        Atom a = lx.atom();
        if (a.is_bottom()) lx.fail("'bot' cannot be asserted as a fact");
        if (!is_ground(a)) lx.fail("fact contains a variable");
        Fact f;
        f.atom.predicate = a.predicate;
        for (const auto& t : a.args) f.atom.args.push_back(std::get<Constant>(t).label);
        lx.accept('.');
        if (lx.accept('@')) {
            while (!lx.at_end()) {
                auto key = lx.identifier();
                lx.expect('=');
                if (key == "w") {
                    f.weight = lx.number();
                    if (!(f.weight > 0.0 && f.weight <= 1.0)) lx.fail("fact weight must be in (0,1]");
                } else if (key == "src") {
                    f.source = lx.word();
                } else {
                    lx.fail("unknown fact annotation '" + key + "'");
                }
            }
        }
        if (!lx.at_end()) lx.fail("trailing input" + lx.context());
        arity.note(f.atom.predicate, f.atom.arity(), lx);
        if (!seen.insert(f.atom).second) lx.fail("duplicate fact " + to_string(f.atom));
        kb.facts.push_back(std::move(f));
    }
    std::sort(kb.facts.begin(), kb.facts.end(),
              [](const Fact& x, const Fact& y) { return x.atom < y.atom; });
    return kb;
}

inline Query parse_query(std::string_view text) {
    std::optional<Query> out;
    std::size_t lineno = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto nl = text.find('\n', start);
        auto raw = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
        start = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++lineno;

        detail::LineLexer lx(detail::strip_comment(raw), lineno);
        if (lx.at_end()) continue;
        if (out) lx.fail("only one query per input");

        auto shape = detail::parse_rule_shape(lx);
        if (!lx.at_end()) lx.fail("trailing input" + lx.context());
        if (shape.head.is_bottom()) lx.fail("a query head cannot be 'bot'");
        Query q{shape.body, shape.head, {}};
        for (const auto& qv : shape.prefix) {
            if (qv.kind == Quantifier::exists)
                lx.fail("existential '" + qv.name + "' in a query: body variables are already existential");
            q.bounded.push_back(qv.name);
        }
        auto hv = variables_of(q.head);
        auto bv = variables_of(q.body);
        for (const auto& b : q.bounded) {
            if (hv.count(b)) lx.fail("bounded universal '" + b + "' cannot occur in the head");
            if (!bv.count(b)) lx.fail("bounded universal '" + b + "' does not occur in the body");
        }
        if (hv.empty()) lx.fail("query head needs at least one variable");
        if (!is_safe(q.body, q.head)) lx.fail("unsafe query: head variable missing from body");
        out = std::move(q);
    }
    if (!out) throw ParseError(lineno, "no query found");
    return *out;
}

} // namespace pkb
