#pragma once

// Knowledge expansion: unification of rule bodies against a ground atom set,
// the semi-naive least fixed point, why-provenance over base facts, minimal
// inconsistent subsets and the Cons predicate.

#include <algorithm>
#include <cstddef>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "kb.hpp"

namespace pkb {

class CapExceeded : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Substitution {
    std::map<std::string, std::string> bindings;

    auto operator<=>(const Substitution&) const = default;

    const std::string* find(const std::string& var) const {
        auto it = bindings.find(var);
        return it == bindings.end() ? nullptr : &it->second;
    }
};

// Applies θ to an atom. Every variable must be bound.
inline GroundAtom apply(const Substitution& theta, const Atom& a) {
    GroundAtom g{a.predicate, {}};
    g.args.reserve(a.args.size());
    auto value = [&](const std::variant<Constant, Variable>& t) -> std::string {
        if (auto c = std::get_if<Constant>(&t)) return c->label;
        const auto* v = theta.find(std::get<Variable>(t).name);
        if (!v) throw std::logic_error("unbound variable " + std::get<Variable>(t).name);
        return *v;
    };
    for (const auto& t : a.args) {
        if (auto c = std::get_if<Constant>(&t)) {
            g.args.push_back(c->label);
        } else if (auto v = std::get_if<Variable>(&t)) {
            g.args.push_back(value(*v));
        } else {
            const auto& sk = std::get<SkolemTerm>(t);
            std::vector<std::string> labels;
            for (const auto& arg : sk.args) labels.push_back(value(arg));
            g.args.push_back(skolem_label(sk.function, labels));
        }
    }
    return g;
}

// A set of base facts, kept sorted and unique.
class SupportSet {
public:
    SupportSet() = default;
    explicit SupportSet(std::vector<GroundAtom> facts) : facts_(std::move(facts)) {
        std::sort(facts_.begin(), facts_.end());
        facts_.erase(std::unique(facts_.begin(), facts_.end()), facts_.end());
    }
    static SupportSet of(GroundAtom a) { return SupportSet(std::vector<GroundAtom>{std::move(a)}); }

    auto operator<=>(const SupportSet&) const = default;

    bool subset_of(const SupportSet& other) const {
        return std::includes(other.facts_.begin(), other.facts_.end(), facts_.begin(), facts_.end());
    }
    bool contains(const GroundAtom& a) const {
        return std::binary_search(facts_.begin(), facts_.end(), a);
    }
    SupportSet unite(const SupportSet& other) const {
        SupportSet out;
        std::set_union(facts_.begin(), facts_.end(), other.facts_.begin(), other.facts_.end(),
                       std::back_inserter(out.facts_));
        return out;
    }
    SupportSet without(const GroundAtom& a) const {
        SupportSet out = *this;
        out.facts_.erase(std::remove(out.facts_.begin(), out.facts_.end(), a), out.facts_.end());
        return out;
    }

    std::size_t size() const { return facts_.size(); }
    bool empty() const { return facts_.empty(); }
    auto begin() const { return facts_.begin(); }
    auto end() const { return facts_.end(); }
    const std::vector<GroundAtom>& facts() const { return facts_; }

private:
    std::vector<GroundAtom> facts_;
};

inline std::string to_string(const SupportSet& s) {
    std::string out = "{";
    bool first = true;
    for (const auto& a : s) {
        if (!first) out += ", ";
        first = false;
        out += to_string(a);
    }
    return out + "}";
}

// Preference used when a family overflows its cap: smaller sets first.
inline bool better_support(const SupportSet& a, const SupportSet& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
}

// An antichain of support sets under ⊆, sorted by better_support.
using SupportFamily = std::vector<SupportSet>;
using ProvenanceMap = std::map<GroundAtom, SupportFamily>;

// Adds `s` keeping the family ⊆-minimal and at most `cap` long. Returns true
// when the family changed.
inline bool insert_support(SupportFamily& family, SupportSet s, std::size_t cap) {
    for (const auto& existing : family)
        if (existing.subset_of(s)) return false;
    std::erase_if(family, [&](const SupportSet& existing) { return s.subset_of(existing); });
    auto pos = std::lower_bound(family.begin(), family.end(), s, better_support);
    auto inserted = family.insert(pos, std::move(s));
    bool kept = true;
    if (family.size() > cap) {
        kept = inserted != family.end() - 1;
        family.pop_back();
    }
    return kept;
}

inline SupportFamily minimize(SupportFamily family, std::size_t cap = static_cast<std::size_t>(-1)) {
    SupportFamily out;
    std::sort(family.begin(), family.end(), better_support);
    for (auto& s : family) insert_support(out, std::move(s), cap);
    return out;
}

struct RuleGrounding {
    std::size_t rule;
    Substitution theta;
    std::vector<GroundAtom> body;
    GroundAtom head;

    auto operator<=>(const RuleGrounding& o) const {
        if (auto c = rule <=> o.rule; c != 0) return c;
        return theta <=> o.theta;
    }
    bool operator==(const RuleGrounding& o) const { return rule == o.rule && theta == o.theta; }
};

struct GroundedKB {
    std::set<GroundAtom> atoms;
    ProvenanceMap provenance;
    std::vector<RuleGrounding> rule_groundings; // sorted, unique on (rule, θ)
    std::vector<SupportSet> mis;                // ⊆-minimal supports of bot
    bool has_provenance = false;

    bool contains(const GroundAtom& a) const { return atoms.count(a) != 0; }

    const SupportFamily& supports(const GroundAtom& a) const {
        static const SupportFamily none;
        auto it = provenance.find(a);
        return it == provenance.end() ? none : it->second;
    }

    std::set<std::string> domain() const {
        std::set<std::string> d;
        for (const auto& a : atoms) d.insert(a.args.begin(), a.args.end());
        return d;
    }
};

struct GroundingOptions {
    std::size_t support_cap = 64;
    std::size_t iteration_cap = 1000;
};

// ---------------------------------------------------------------------------
// Unification

namespace detail {

// Ground atoms grouped by predicate; pointers stay valid as long as the
// backing std::set is only inserted into.
class AtomIndex {
public:
    AtomIndex() = default;
    template <class Range>
    explicit AtomIndex(const Range& atoms) {
        for (const auto& a : atoms) add(a);
    }
    void add(const GroundAtom& a) { by_pred_[a.predicate].push_back(&a); }
    std::span<const GroundAtom* const> lookup(const std::string& pred) const {
        auto it = by_pred_.find(pred);
        if (it == by_pred_.end()) return {};
        return it->second;
    }
    bool empty() const { return by_pred_.empty(); }

private:
    std::map<std::string, std::vector<const GroundAtom*>> by_pred_;
};

// Binds `t` to `label`, recording new variables in `trail`.
inline bool bind_term(const std::variant<Constant, Variable>& t, const std::string& label,
                      Substitution& theta, std::vector<std::string>& trail) {
    if (auto c = std::get_if<Constant>(&t)) return c->label == label;
    const auto& name = std::get<Variable>(t).name;
    if (const auto* cur = theta.find(name)) return *cur == label;
    theta.bindings.emplace(name, label);
    trail.push_back(name);
    return true;
}

inline bool match_atom(const Atom& pattern, const GroundAtom& g, Substitution& theta,
                       std::vector<std::string>& trail) {
    if (pattern.predicate != g.predicate || pattern.arity() != g.arity()) return false;
    for (std::size_t i = 0; i < g.args.size(); ++i) {
        const auto& t = pattern.args[i];
        if (auto c = std::get_if<Constant>(&t)) {
            if (c->label != g.args[i]) return false;
        } else if (auto v = std::get_if<Variable>(&t)) {
            if (!bind_term(*v, g.args[i], theta, trail)) return false;
        } else {
            const auto& sk = std::get<SkolemTerm>(t);
            auto app = split_application(g.args[i]);
            if (sk.args.empty()) {
                if (g.args[i] != sk.function) return false;
                continue;
            }
            if (!app || app->first != sk.function || app->second.size() != sk.args.size()) return false;
            for (std::size_t j = 0; j < sk.args.size(); ++j) {
                // Argument labels inside the application are printed constants.
                std::string arg = app->second[j];
                if (arg.size() >= 2 && arg.front() == '"') {
                    std::string unq;
                    for (std::size_t k = 1; k + 1 < arg.size(); ++k) {
                        if (arg[k] == '\\' && k + 2 < arg.size()) ++k;
                        unq += arg[k];
                    }
                    arg = unq;
                }
                if (!bind_term(sk.args[j], arg, theta, trail)) return false;
            }
        }
    }
    return true;
}

// Enumerates every θ grounding all of `body`. `candidates(i)` yields the
// ground atoms eligible for body position i.
template <class Candidates, class Visit>
void for_each_match(std::span<const Atom> body, const Candidates& candidates, Visit&& visit) {
    Substitution theta;
    std::vector<const GroundAtom*> matched(body.size(), nullptr);
    std::function<void(std::size_t)> go = [&](std::size_t i) {
        if (i == body.size()) {
            visit(theta, std::span<const GroundAtom* const>(matched));
            return;
        }
        for (const GroundAtom* g : candidates(i)) {
            std::vector<std::string> trail;
            if (match_atom(body[i], *g, theta, trail)) {
                matched[i] = g;
                go(i + 1);
            }
            for (const auto& v : trail) theta.bindings.erase(v);
        }
    };
    go(0);
}

} // namespace detail

// U(kb, λ): every substitution grounding all body atoms of `rule` into `kb`.
inline std::vector<Substitution> unify(const std::set<GroundAtom>& kb, std::span<const Atom> body) {
    detail::AtomIndex index(kb);
    std::set<Substitution> out;
    detail::for_each_match(body, [&](std::size_t i) { return index.lookup(body[i].predicate); },
                           [&](const Substitution& theta, auto) { out.insert(theta); });
    return {out.begin(), out.end()};
}

inline std::vector<Substitution> unify(const std::set<GroundAtom>& kb, const Rule& rule) {
    return unify(kb, std::span<const Atom>(rule.body));
}

// ES: one naive expansion step.
inline std::set<GroundAtom> expansion_step(const std::set<GroundAtom>& atoms, std::span<const Rule> rules) {
    std::set<GroundAtom> out = atoms;
    for (const auto& r : rules)
        for (const auto& theta : unify(atoms, r)) out.insert(apply(theta, r.head));
    return out;
}

struct ProvenanceState {
    std::set<GroundAtom> atoms;
    ProvenanceMap provenance;

    bool operator==(const ProvenanceState&) const = default;
};

// κ⁰: every base fact supports itself.
inline ProvenanceState initial_provenance(const KnowledgeBase& kb) {
    ProvenanceState st;
    for (const auto& f : kb.facts) {
        st.atoms.insert(f.atom);
        st.provenance[f.atom] = {SupportSet::of(f.atom)};
    }
    return st;
}

namespace detail {

// Cross product of the body families: {s₁∪…∪sₙ | sᵢ ∈ κ(bᵢ)}, minimized and
// capped after every factor.
inline SupportFamily combine(std::span<const GroundAtom* const> body, const ProvenanceMap& prov,
                             std::size_t cap) {
    SupportFamily acc{SupportSet{}};
    for (const GroundAtom* b : body) {
        auto it = prov.find(*b);
        if (it == prov.end() || it->second.empty()) return {};
        SupportFamily next;
        for (const auto& partial : acc)
            for (const auto& s : it->second) insert_support(next, partial.unite(s), cap);
        acc = std::move(next);
    }
    return acc;
}

} // namespace detail

// ES′: one naive step that also extends κ for every firing.
inline ProvenanceState expansion_step_prov(const ProvenanceState& state, std::span<const Rule> rules,
                                           std::size_t support_cap = 64) {
    ProvenanceState out = state;
    detail::AtomIndex index(state.atoms);
    for (const auto& r : rules) {
        detail::for_each_match(
            r.body, [&](std::size_t i) { return index.lookup(r.body[i].predicate); },
            [&](const Substitution& theta, std::span<const GroundAtom* const> matched) {
                auto head = apply(theta, r.head);
                out.atoms.insert(head);
                auto& fam = out.provenance[head];
                for (auto& s : detail::combine(matched, state.provenance, support_cap))
                    insert_support(fam, std::move(s), support_cap);
            });
    }
    return out;
}

namespace detail {

// Semi-naive driver. Each round re-fires only the matches that use at least
// one atom whose support family changed (or which is new) in the previous
// round; firings are computed against the round's snapshot and then merged.
inline GroundedKB expand(const KnowledgeBase& kb, const GroundingOptions& opts, bool track) {
    GroundedKB gkb;
    gkb.has_provenance = track;
    AtomIndex index;
    std::set<GroundAtom> delta;
    for (const auto& f : kb.facts) {
        auto [it, _] = gkb.atoms.insert(f.atom);
        index.add(*it);
        delta.insert(f.atom);
        gkb.provenance[f.atom] = {SupportSet::of(f.atom)};
    }
    std::set<RuleGrounding> groundings;

    for (std::size_t round = 0; !delta.empty(); ++round) {
        if (round >= opts.iteration_cap)
            throw CapExceeded("grounding did not reach a fixed point within " +
                              std::to_string(opts.iteration_cap) + " rounds");
        AtomIndex delta_index(delta);
        std::map<GroundAtom, SupportFamily> pending;
        std::set<GroundAtom> new_atoms;

        for (std::size_t ri = 0; ri < kb.rules.size(); ++ri) {
            const Rule& r = kb.rules[ri];
            std::set<Substitution> fired;
            for (std::size_t pivot = 0; pivot < r.body.size(); ++pivot) {
                if (delta_index.lookup(r.body[pivot].predicate).empty()) continue;
                for_each_match(
                    r.body,
                    [&](std::size_t i) {
                        return i == pivot ? delta_index.lookup(r.body[i].predicate)
                                          : index.lookup(r.body[i].predicate);
                    },
                    [&](const Substitution& theta, std::span<const GroundAtom* const> matched) {
                        if (!fired.insert(theta).second) return;
                        auto head = apply(theta, r.head);
                        RuleGrounding rg{ri, theta, {}, head};
                        for (const auto* m : matched) rg.body.push_back(*m);
                        groundings.insert(std::move(rg));
                        if (!gkb.atoms.count(head)) new_atoms.insert(head);
                        if (track) {
                            auto& fam = pending[head];
                            for (auto& s : combine(matched, gkb.provenance, opts.support_cap))
                                insert_support(fam, std::move(s), opts.support_cap);
                        }
                    });
            }
        }

        delta.clear();
        for (const auto& a : new_atoms) {
            auto [it, _] = gkb.atoms.insert(a);
            index.add(*it);
            delta.insert(a);
        }
        for (auto& [head, fam] : pending) {
            auto& target = gkb.provenance[head];
            bool changed = false;
            for (auto& s : fam) changed |= insert_support(target, std::move(s), opts.support_cap);
            if (changed) delta.insert(head);
        }
    }

    gkb.rule_groundings.assign(groundings.begin(), groundings.end());
    if (track) {
        gkb.mis = minimize(gkb.supports(bottom_atom()));
        std::sort(gkb.mis.begin(), gkb.mis.end());
    } else {
        // Without tracking only κ⁰ is meaningful.
        for (auto it = gkb.provenance.begin(); it != gkb.provenance.end();) {
            if (!kb.find_fact(it->first))
                it = gkb.provenance.erase(it);
            else
                ++it;
        }
    }
    return gkb;
}

} // namespace detail

// KE: least fixed point of ES over the base facts.
inline GroundedKB ground_fixpoint(const KnowledgeBase& kb, const GroundingOptions& opts = {}) {
    return detail::expand(kb, opts, false);
}

// KE′: fixed point of ES′, yielding ⟨𝔾𝔹, κᶠ⟩ and the minimized κᶠ(⊥).
inline GroundedKB ground_fixpoint_prov(const KnowledgeBase& kb, const GroundingOptions& opts = {}) {
    return detail::expand(kb, opts, true);
}

inline std::vector<SupportSet> minimal_inconsistent_subsets(const GroundedKB& gkb) {
    if (!gkb.has_provenance)
        throw std::invalid_argument("minimal inconsistent subsets need a provenance-tracking grounding");
    auto out = minimize(gkb.mis);
    std::sort(out.begin(), out.end());
    return out;
}

// Cons over base supports: true iff some choice of one support per atom
// yields a union that embeds no MIS. Atoms without recorded support add
// nothing to the union.
inline bool cons(std::span<const GroundAtom> candidate, std::span<const SupportSet> mis,
                 const ProvenanceMap& provenance) {
    if (mis.empty()) return true;
    std::vector<const SupportFamily*> families;
    for (const auto& a : candidate) {
        auto it = provenance.find(a);
        if (it != provenance.end() && !it->second.empty()) families.push_back(&it->second);
    }
    auto embeds = [&](const SupportSet& u) {
        return std::any_of(mis.begin(), mis.end(), [&](const SupportSet& m) { return m.subset_of(u); });
    };
    std::function<bool(std::size_t, const SupportSet&)> search = [&](std::size_t i, const SupportSet& acc) {
        if (embeds(acc)) return false;
        if (i == families.size()) return true;
        for (const auto& s : *families[i])
            if (search(i + 1, acc.unite(s))) return true;
        return false;
    };
    return search(0, SupportSet{});
}

inline bool cons(const GroundedKB& gkb, std::span<const GroundAtom> candidate) {
    return cons(candidate, gkb.mis, gkb.provenance);
}

inline bool cons(const GroundedKB& gkb, const std::set<GroundAtom>& candidate) {
    std::vector<GroundAtom> v(candidate.begin(), candidate.end());
    return cons(gkb, std::span<const GroundAtom>(v));
}

// Consistent support choice for `candidate` (lexicographically first in
// family order), or nullopt when none exists.
inline std::optional<SupportSet> consistent_support(const GroundedKB& gkb,
                                                    const std::set<GroundAtom>& candidate) {
    std::vector<const SupportFamily*> families;
    for (const auto& a : candidate) {
        const auto& f = gkb.supports(a);
        if (!f.empty()) families.push_back(&f);
    }
    auto embeds = [&](const SupportSet& u) {
        return std::any_of(gkb.mis.begin(), gkb.mis.end(), [&](const SupportSet& m) { return m.subset_of(u); });
    };
    std::optional<SupportSet> found;
    std::function<bool(std::size_t, const SupportSet&)> search = [&](std::size_t i, const SupportSet& acc) {
        if (embeds(acc)) return false;
        if (i == families.size()) {
            found = acc;
            return true;
        }
        for (const auto& s : *families[i])
            if (search(i + 1, acc.unite(s))) return true;
        return false;
    };
    search(0, SupportSet{});
    return found;
}

} // namespace pkb
