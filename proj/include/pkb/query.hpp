#pragma once

// Query answering over a grounded knowledge base: consistent unifications,
// candidate answers, hypotheses and the justification map, plus the query
// compiler (schema alignment and bounded-universal grounding) and its
// generalized unifier.

#include <algorithm>
#include <cstddef>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "grounding.hpp"
#include "kb.hpp"
#include "similarity.hpp"

namespace pkb {

// A grounded query instance B ⇒ γ, tagged with the interpretation error of
// the compiled query that produced it.
struct Unification {
    std::set<GroundAtom> body;
    GroundAtom head;
    double error = 0.0;
    std::string origin = "identity";

    bool same_match(const Unification& o) const { return body == o.body && head == o.head; }
};

struct Hypothesis {
    std::set<GroundAtom> body;
    GroundAtom answer;
    double score = 1.0;
    double error = 0.0;
    std::string origin = "identity";
    bool exact = true;

    HypGraph graph() const { return HypGraph{body, {}}; }
    double likelihood() const { return (1.0 - error) * score; }
    bool operator==(const Hypothesis&) const = default;
};

struct CompiledQuery {
    Query query;
    double error = 0.0;
    std::string origin = "identity";
};

using Unifier = std::function<std::vector<Unification>(const GroundedKB&, const Query&)>;
using Summarizer = std::function<std::vector<Hypothesis>(std::vector<Hypothesis>)>;

namespace detail {

inline bool body_less(const Unification& a, const Unification& b) {
    if (a.error != b.error) return a.error < b.error;
    if (a.body != b.body) return a.body < b.body;
    return a.head < b.head;
}

} // namespace detail

// 𝒰_𝔾𝔹(q): every θ grounding q's body into 𝔾𝔹 whose body passes Cons.
inline std::vector<Unification> consistent_unifications(const GroundedKB& gkb, const Query& q) {
    std::vector<Unification> out;
    std::set<std::pair<std::set<GroundAtom>, GroundAtom>> seen;
    for (const auto& theta : unify(gkb.atoms, std::span<const Atom>(q.body))) {
        Unification u;
        for (const auto& b : q.body) u.body.insert(apply(theta, b));
        u.head = apply(theta, q.head);
        if (!seen.emplace(u.body, u.head).second) continue;
        if (!cons(gkb, u.body)) continue;
        out.push_back(std::move(u));
    }
    std::sort(out.begin(), out.end(), detail::body_less);
    return out;
}

inline Unifier exact_unifier() { return consistent_unifications; }

inline Summarizer identity_summarizer() {
    return [](std::vector<Hypothesis> h) { return h; };
}

// 𝒜: distinct heads of the unifier's output.
inline std::vector<GroundAtom> candidates(const GroundedKB& gkb, const Query& q,
                                          const Unifier& unifier = exact_unifier()) {
    std::set<GroundAtom> heads;
    for (const auto& u : unifier(gkb, q))
        if (!u.head.is_bottom()) heads.insert(u.head);
    return {heads.begin(), heads.end()};
}

namespace detail {

inline std::vector<Hypothesis> raw_hypotheses(const std::vector<Unification>& us, const GroundAtom& gamma) {
    std::vector<Hypothesis> out;
    for (const auto& u : us)
        if (u.head == gamma) out.push_back(Hypothesis{u.body, u.head, 1.0, u.error, u.origin, true});
    return out;
}

} // namespace detail

// ℋ(q, γ) = Γ̃({H | H ⇒ γ ∈ 𝒰}).
inline std::vector<Hypothesis> hypotheses(const GroundedKB& gkb, const Query& q, const GroundAtom& gamma,
                                          const Summarizer& summarizer = identity_summarizer(),
                                          const Unifier& unifier = exact_unifier()) {
    auto raw = detail::raw_hypotheses(unifier(gkb, q), gamma);
    if (raw.empty()) return {};
    return summarizer(std::move(raw));
}

using Justification = std::map<GroundAtom, std::vector<Hypothesis>>;

// 𝒥: γ ↦ ℋ(q, γ) for every candidate γ.
inline Justification justify(const GroundedKB& gkb, const Query& q,
                             const Unifier& unifier = exact_unifier(),
                             const Summarizer& summarizer = identity_summarizer()) {
    Justification j;
    auto us = unifier(gkb, q);
    std::set<GroundAtom> heads;
    for (const auto& u : us) heads.insert(u.head);
    for (const auto& gamma : heads) {
        auto hs = summarizer(detail::raw_hypotheses(us, gamma));
        if (!hs.empty()) j.emplace(gamma, std::move(hs));
    }
    return j;
}

// ---------------------------------------------------------------------------
// Alignment and compilation

struct RewriteRule {
    enum class Kind { predicate, constant };
    Kind kind;
    std::string from;
    std::string to;
    double similarity = 1.0;

    auto operator<=>(const RewriteRule&) const = default;
};

// Default aligner: a symbol present in the target keeps its identity
// correspondence (plus synonyms); an absent one maps to its synonyms and to
// every target symbol whose edit similarity reaches theta_r. Predicates must
// also agree on arity.
inline std::vector<RewriteRule> align(const std::vector<Query>& queries,
                                      const std::map<std::string, std::size_t>& schema,
                                      const std::set<std::string>& domain, const SimilarityConfig& cfg) {
    std::set<RewriteRule> out;
    std::map<std::string, std::size_t> preds;
    std::set<std::string> consts;
    for (const auto& q : queries) {
        for (const auto& a : q.body) {
            preds.emplace(a.predicate, a.arity());
            for (const auto& t : a.args)
                if (auto c = std::get_if<Constant>(&t)) consts.insert(c->label);
        }
    }
    using K = RewriteRule::Kind;
    for (const auto& [p, n] : preds) {
        auto it = schema.find(p);
        bool present = it != schema.end() && it->second == n;
        if (present) out.insert({K::predicate, p, p, 1.0});
        for (const auto& [s, m] : schema) {
            if (s == p || m != n || s == kBottom) continue;
            if (cfg.synonyms.synonyms(p, s)) {
                out.insert({K::predicate, p, s, 1.0});
            } else if (!present) {
                double sim = string_similarity(p, s);
                if (sim >= cfg.theta_r) out.insert({K::predicate, p, s, sim});
            }
        }
    }
    for (const auto& c : consts) {
        bool present = domain.count(c) != 0;
        if (present) out.insert({K::constant, c, c, 1.0});
        for (const auto& d : domain) {
            if (d == c) continue;
            if (cfg.synonyms.synonyms(c, d)) {
                out.insert({K::constant, c, d, 1.0});
            } else if (!present) {
                double sim = string_similarity(c, d);
                if (sim >= cfg.theta_r) out.insert({K::constant, c, d, sim});
            }
        }
    }
    return {out.begin(), out.end()};
}

struct CompilerConfig {
    std::vector<RewriteRule> rewrites;
    std::set<std::string> domain; // for bounded universals
    SimilarityConfig similarity;
    std::size_t max_variants = 256;
};

// Rewrite table and domain taken from a grounded KB.
inline CompilerConfig compiler_for(const GroundedKB& gkb, const Query& q, SimilarityConfig sim) {
    CompilerConfig cfg;
    std::map<std::string, std::size_t> schema;
    for (const auto& a : gkb.atoms) schema.emplace(a.predicate, a.arity());
    cfg.domain = gkb.domain();
    cfg.rewrites = align({q}, schema, cfg.domain, sim);
    cfg.similarity = std::move(sim);
    return cfg;
}

// ε(q_i) = 1 − (q ∼ q_i), measured on the query graphs.
inline double interpretation_error(const Query& original, const Query& compiled, const SimilarityConfig& cfg) {
    double sim = similarity(query_graph(original.body), query_graph(compiled.body), cfg);
    return std::clamp(1.0 - sim, 0.0, 1.0);
}

namespace detail {

inline Atom rename_atom(const Atom& a, const std::map<std::string, std::string>& preds,
                        const std::map<std::string, std::string>& consts,
                        const std::map<std::string, std::string>& ground) {
    Atom out{a.predicate, {}};
    if (auto it = preds.find(a.predicate); it != preds.end()) out.predicate = it->second;
    for (const auto& t : a.args) {
        if (auto c = std::get_if<Constant>(&t)) {
            auto it = consts.find(c->label);
            out.args.emplace_back(Constant{it == consts.end() ? c->label : it->second});
        } else if (auto v = std::get_if<Variable>(&t)) {
            auto it = ground.find(v->name);
            if (it == ground.end())
                out.args.push_back(t);
            else
                out.args.emplace_back(Constant{it->second});
        } else {
            out.args.push_back(t);
        }
    }
    return out;
}

} // namespace detail

// 𝒞(q): the identity compilation, every alignment rewrite, every grounding of
// the bounded universals over the domain, and their compositions.
inline std::vector<CompiledQuery> compile(const Query& q, const CompilerConfig& cfg) {
    std::vector<CompiledQuery> out{{q, 0.0, "identity"}};

    // Choice lists: one slot per query predicate, constant and bounded variable.
    struct Slot {
        int kind; // 0 predicate, 1 constant, 2 bounded variable
        std::string name;
        std::vector<std::string> options; // options[0] is the identity
    };
    std::vector<Slot> slots;
    std::set<std::string> preds, consts;
    for (const auto& a : q.body) {
        preds.insert(a.predicate);
        for (const auto& t : a.args)
            if (auto c = std::get_if<Constant>(&t)) consts.insert(c->label);
    }
    auto targets = [&](RewriteRule::Kind k, const std::string& from) {
        std::vector<std::string> opts{from};
        for (const auto& r : cfg.rewrites)
            if (r.kind == k && r.from == from && r.to != from) opts.push_back(r.to);
        return opts;
    };
    for (const auto& p : preds) slots.push_back({0, p, targets(RewriteRule::Kind::predicate, p)});
    for (const auto& c : consts) slots.push_back({1, c, targets(RewriteRule::Kind::constant, c)});
    for (const auto& v : q.bounded) {
        Slot s{2, v, {""}};
        s.options.insert(s.options.end(), cfg.domain.begin(), cfg.domain.end());
        slots.push_back(std::move(s));
    }

    std::vector<std::size_t> choice(slots.size(), 0);
    auto advance = [&] {
        for (std::size_t i = slots.size(); i-- > 0;) {
            if (++choice[i] < slots[i].options.size()) return true;
            choice[i] = 0;
        }
        return false;
    };
    while (advance()) {
        if (out.size() >= cfg.max_variants) break;
        std::map<std::string, std::string> pm, cm, gm;
        std::string align_tag, ground_tag;
        for (std::size_t i = 0; i < slots.size(); ++i) {
            if (choice[i] == 0) continue;
            const auto& s = slots[i];
            const auto& to = s.options[choice[i]];
            if (s.kind == 2) {
                gm[s.name] = to;
                ground_tag += (ground_tag.empty() ? "" : ";") + s.name + "=" + print_constant(to);
            } else {
                (s.kind == 0 ? pm : cm)[s.name] = to;
                align_tag += (align_tag.empty() ? "" : ";") + s.name + "->" + to;
            }
        }
        CompiledQuery cq;
        cq.query.head = q.head;
        for (const auto& a : q.body) cq.query.body.push_back(detail::rename_atom(a, pm, cm, gm));
        for (const auto& v : q.bounded)
            if (!gm.count(v)) cq.query.bounded.push_back(v);
        if (!align_tag.empty()) cq.origin = "align[" + align_tag + "]";
        if (!ground_tag.empty()) cq.origin = (align_tag.empty() ? "" : cq.origin + "+") + "ground[" + ground_tag + "]";
        cq.error = interpretation_error(q, cq.query, cfg.similarity);
        out.push_back(std::move(cq));
    }
    return out;
}

// 𝒰^𝒞(𝔾𝔹, q) = ⋃_{q_i ∈ 𝒞(q)} 𝒰(𝔾𝔹, q_i), deduplicated on (body, head)
// keeping the smallest ε.
inline std::vector<Unification> unify_compiled(const GroundedKB& gkb, const Query& q, const CompilerConfig& cfg) {
    std::map<std::pair<std::set<GroundAtom>, GroundAtom>, Unification> best;
    for (const auto& cq : compile(q, cfg)) {
        for (auto u : consistent_unifications(gkb, cq.query)) {
            u.error = cq.error;
            u.origin = cq.origin;
            auto key = std::make_pair(u.body, u.head);
            auto it = best.find(key);
            if (it == best.end() || u.error < it->second.error) best[key] = std::move(u);
        }
    }
    std::vector<Unification> out;
    for (auto& [_, u] : best) out.push_back(std::move(u));
    std::stable_sort(out.begin(), out.end(), detail::body_less);
    return out;
}

inline Unifier compiled_unifier(CompilerConfig cfg) {
    return [cfg = std::move(cfg)](const GroundedKB& gkb, const Query& q) { return unify_compiled(gkb, q, cfg); };
}

} // namespace pkb
