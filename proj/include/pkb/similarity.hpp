#pragma once

// The single similarity ∼ used for query compilation error, approximate
// matching, clustering and ranking.
//
// sim(g, h) = predicate_weight · P + structure_weight · S
//
//   P  symmetric mean of best-match predicate-name similarity
//   S  max over injective node correspondences of
//        Σ_{matched atom pairs} w(a, b) / (|g| + |h| − |matched|)
//      where a pair needs equal arity and w is the predicate-name
//      similarity times the mean label similarity of the corresponding
//      arguments (variables are wildcards).
//
// A union that fails Cons is capped at 1 − 2⁻¹⁶, so sim = 1 ⇒ Cons(g ∪ h).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "grounding.hpp"
#include "kb.hpp"

namespace pkb {

inline constexpr double kInconsistencyGap = 1.0 / 65536.0;

inline std::size_t levenshtein(std::string_view a, std::string_view b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

// 1 − lev(a,b) / max(|a|,|b|); two empty strings are identical.
inline double string_similarity(std::string_view a, std::string_view b) {
    std::size_t n = std::max(a.size(), b.size());
    if (n == 0) return 1.0;
    return 1.0 - static_cast<double>(levenshtein(a, b)) / static_cast<double>(n);
}

// Symmetric pairs of interchangeable predicate or constant names.
class SynonymTable {
public:
    void add(std::string a, std::string b) {
        if (b < a) std::swap(a, b);
        pairs_.emplace(std::move(a), std::move(b));
    }
    bool synonyms(const std::string& a, const std::string& b) const {
        return a < b ? pairs_.count({a, b}) != 0 : pairs_.count({b, a}) != 0;
    }
    std::vector<std::string> synonyms_of(const std::string& a) const {
        std::vector<std::string> out;
        for (const auto& [x, y] : pairs_) {
            if (x == a) out.push_back(y);
            if (y == a) out.push_back(x);
        }
        std::sort(out.begin(), out.end());
        return out;
    }
    bool empty() const { return pairs_.empty(); }
    std::size_t size() const { return pairs_.size(); }

private:
    std::set<std::pair<std::string, std::string>> pairs_;
};

// One `left ~ right` pair per line; `#` comments.
inline SynonymTable parse_synonyms(std::string_view text) {
    SynonymTable table;
    std::size_t lineno = 0, start = 0;
    while (start <= text.size()) {
        auto nl = text.find('\n', start);
        auto line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
        start = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++lineno;
        if (auto h = line.find('#'); h != std::string_view::npos) line = line.substr(0, h);
        auto trim = [](std::string_view s) {
            while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
            while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
            return s;
        };
        line = trim(line);
        if (line.empty()) continue;
        auto tilde = line.find('~');
        if (tilde == std::string_view::npos) throw ParseError(lineno, "expected 'left ~ right'");
        auto l = trim(line.substr(0, tilde)), r = trim(line.substr(tilde + 1));
        if (l.empty() || r.empty()) throw ParseError(lineno, "expected 'left ~ right'");
        table.add(std::string(l), std::string(r));
    }
    return table;
}

struct SimilarityConfig {
    double theta_r = 0.5;
    double predicate_weight = 0.7;
    double structure_weight = 0.3;
    SynonymTable synonyms;

    void validate() const {
        if (!(theta_r >= 0.0 && theta_r <= 1.0)) throw std::invalid_argument("theta_r must be in [0,1]");
        if (!(predicate_weight >= 0.0) || !(structure_weight >= 0.0))
            throw std::invalid_argument("similarity weights must be non-negative");
        if (std::abs(predicate_weight + structure_weight - 1.0) > 1e-9)
            throw std::invalid_argument("predicate_weight + structure_weight must equal 1");
    }
};

// Names compare equal, as synonyms (1) or by edit similarity.
inline double label_similarity(const std::string& a, const std::string& b, const SimilarityConfig& cfg) {
    if (a == b || cfg.synonyms.synonyms(a, b)) return 1.0;
    return string_similarity(a, b);
}

// Atom set viewed as a labeled graph: constants are nodes, unary atoms node
// labels, binary atoms edges, higher arities hyperedges. Labels listed in
// `variables` are wildcard nodes (used for query graphs).
struct HypGraph {
    std::set<GroundAtom> atoms;
    std::set<std::string> variables;

    auto operator<=>(const HypGraph&) const = default;

    std::set<std::string> nodes() const {
        std::set<std::string> n;
        for (const auto& a : atoms) n.insert(a.args.begin(), a.args.end());
        return n;
    }
};

inline std::string to_string(const HypGraph& g) {
    std::string out = "{";
    bool first = true;
    for (const auto& a : g.atoms) {
        if (!first) out += ", ";
        first = false;
        out += to_string(a);
    }
    return out + "}";
}

// Graph view of a rule-shaped atom list; variables become wildcard nodes
// named after the variable.
inline HypGraph query_graph(const std::vector<Atom>& body) {
    HypGraph g;
    for (const auto& a : body) {
        GroundAtom ga{a.predicate, {}};
        for (const auto& t : a.args) {
            if (auto c = std::get_if<Constant>(&t)) {
                ga.args.push_back(c->label);
            } else if (auto v = std::get_if<Variable>(&t)) {
                ga.args.push_back("?" + v->name);
                g.variables.insert("?" + v->name);
            } else {
                ga.args.push_back(to_string(t));
            }
        }
        g.atoms.insert(std::move(ga));
    }
    return g;
}

namespace detail {

struct StructureSearch {
    std::vector<const GroundAtom*> left, right;
    const HypGraph* lg;
    const HypGraph* rg;
    const SimilarityConfig* cfg;
    std::vector<std::vector<double>> pair_weight; // < 0: incompatible
    std::map<std::string, std::string> fwd, bwd;
    std::vector<bool> right_used;
    double best = 0.0;
    std::size_t budget = 200000;

    double node_similarity(const std::string& a, const std::string& b) const {
        if (lg->variables.count(a) || rg->variables.count(b)) return 1.0;
        return label_similarity(a, b, *cfg);
    }

    void init() {
        pair_weight.assign(left.size(), std::vector<double>(right.size(), -1.0));
        for (std::size_t i = 0; i < left.size(); ++i) {
            for (std::size_t j = 0; j < right.size(); ++j) {
                const auto& a = *left[i];
                const auto& b = *right[j];
                if (a.arity() != b.arity()) continue;
                double ps = label_similarity(a.predicate, b.predicate, *cfg);
                if (ps <= 0.0) continue;
                if (a.args.empty()) {
                    pair_weight[i][j] = ps;
                    continue;
                }
                double w = 0.0;
                for (std::size_t k = 0; k < a.args.size(); ++k) w += node_similarity(a.args[k], b.args[k]);
                pair_weight[i][j] = ps * w / static_cast<double>(a.args.size());
            }
        }
        right_used.assign(right.size(), false);
    }

    double total() const { return static_cast<double>(left.size() + right.size()); }

    void run(std::size_t i, std::size_t matched, double sum) {
        if (budget == 0) return;
        --budget;
        if (matched > 0) best = std::max(best, sum / (total() - static_cast<double>(matched)));
        if (i == left.size()) return;
        std::size_t rest = std::min(left.size() - i, right.size() - matched);
        double bound = (sum + static_cast<double>(rest)) / (total() - static_cast<double>(matched + rest));
        if (rest == 0 || bound <= best) return;

        for (std::size_t j = 0; j < right.size(); ++j) {
            if (right_used[j] || pair_weight[i][j] < 0.0) continue;
            const auto& a = *left[i];
            const auto& b = *right[j];
            std::vector<std::string> added;
            bool ok = true;
            for (std::size_t k = 0; k < a.args.size() && ok; ++k) {
                auto f = fwd.find(a.args[k]);
                auto r = bwd.find(b.args[k]);
                if (f != fwd.end() || r != bwd.end()) {
                    ok = f != fwd.end() && r != bwd.end() && f->second == b.args[k];
                } else {
                    fwd.emplace(a.args[k], b.args[k]);
                    bwd.emplace(b.args[k], a.args[k]);
                    added.push_back(a.args[k]);
                }
            }
            if (ok) {
                right_used[j] = true;
                run(i + 1, matched + 1, sum + pair_weight[i][j]);
                right_used[j] = false;
            }
            for (const auto& n : added) {
                bwd.erase(fwd[n]);
                fwd.erase(n);
            }
        }
        run(i + 1, matched, sum);
    }
};

} // namespace detail

inline double predicate_similarity(const HypGraph& g, const HypGraph& h, const SimilarityConfig& cfg) {
    if (g.atoms.empty() && h.atoms.empty()) return 1.0;
    if (g.atoms.empty() || h.atoms.empty()) return 0.0;
    auto best_from = [&](const HypGraph& x, const HypGraph& y) {
        double total = 0.0;
        for (const auto& a : x.atoms) {
            double best = 0.0;
            for (const auto& b : y.atoms) best = std::max(best, label_similarity(a.predicate, b.predicate, cfg));
            total += best;
        }
        return total;
    };
    double sum = best_from(g, h) + best_from(h, g);
    return sum / static_cast<double>(g.atoms.size() + h.atoms.size());
}

inline double structure_similarity(const HypGraph& g, const HypGraph& h, const SimilarityConfig& cfg) {
    if (g.atoms.empty() && h.atoms.empty()) return 1.0;
    detail::StructureSearch s;
    s.lg = &g;
    s.rg = &h;
    s.cfg = &cfg;
    for (const auto& a : g.atoms) s.left.push_back(&a);
    for (const auto& b : h.atoms) s.right.push_back(&b);
    s.init();
    s.run(0, 0, 0.0);
    return s.best;
}

// Default ∼. `gkb`, when given, enforces the consistency cap.
inline double similarity(const HypGraph& g, const HypGraph& h, const SimilarityConfig& cfg,
                         const GroundedKB* gkb = nullptr) {
    const HypGraph& a = h < g ? h : g;
    const HypGraph& b = h < g ? g : h;
    double p = predicate_similarity(a, b, cfg);
    double s = structure_similarity(a, b, cfg);
    double sim = (p == 1.0 && s == 1.0) ? 1.0 : cfg.predicate_weight * p + cfg.structure_weight * s;
    sim = std::clamp(sim, 0.0, 1.0);
    if (gkb && gkb->has_provenance) {
        std::set<GroundAtom> u = a.atoms;
        u.insert(b.atoms.begin(), b.atoms.end());
        if (!cons(*gkb, u)) sim = std::min(sim, 1.0 - kInconsistencyGap);
    }
    return sim;
}

// Similarity of a query atom to a ground atom: predicate name plus the mean
// label similarity over constant positions (variables match anything).
inline double atom_similarity(const Atom& q, const GroundAtom& g, const SimilarityConfig& cfg) {
    if (q.arity() != g.arity()) return 0.0;
    double ps = label_similarity(q.predicate, g.predicate, cfg);
    double args = 1.0;
    if (!g.args.empty()) {
        double total = 0.0;
        for (std::size_t i = 0; i < g.args.size(); ++i) {
            const auto& t = q.args[i];
            if (auto c = std::get_if<Constant>(&t))
                total += label_similarity(c->label, g.args[i], cfg);
            else if (std::holds_alternative<Variable>(t))
                total += 1.0;
            else
                total += label_similarity(to_string(t), g.args[i], cfg);
        }
        args = total / static_cast<double>(g.args.size());
    }
    if (ps == 1.0 && args == 1.0) return 1.0;
    return cfg.predicate_weight * ps + cfg.structure_weight * args;
}

using SimilarityFn = std::function<double(const HypGraph&, const HypGraph&)>;

inline SimilarityFn default_similarity(SimilarityConfig cfg, const GroundedKB* gkb = nullptr) {
    return [cfg = std::move(cfg), gkb](const HypGraph& g, const HypGraph& h) { return similarity(g, h, cfg, gkb); };
}

// ≡: 1 on identical graphs, 0 otherwise.
inline SimilarityFn equivalence_similarity() {
    return [](const HypGraph& g, const HypGraph& h) { return g == h ? 1.0 : 0.0; };
}

} // namespace pkb
