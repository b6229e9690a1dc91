#pragma once

// Brute-force reference implementations. Deliberately naive: full
// cross-product grounding, exhaustive subset search, and direct world
// enumeration. Nothing here calls into the grounding or inference engines.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "kb.hpp"
#include "worlds.hpp"

namespace pkb::oracle {

using AtomSet = std::set<GroundAtom>;

namespace detail {

using Binding = std::map<std::string, std::string>;

inline std::string value_of(const std::variant<Constant, Variable>& t, const Binding& b) {
    if (auto c = std::get_if<Constant>(&t)) return c->label;
    return b.at(std::get<Variable>(t).name);
}

inline GroundAtom instantiate(const Atom& a, const Binding& b) {
    GroundAtom g{a.predicate, {}};
    for (const auto& t : a.args) {
        if (auto c = std::get_if<Constant>(&t)) {
            g.args.push_back(c->label);
        } else if (auto v = std::get_if<Variable>(&t)) {
            g.args.push_back(b.at(v->name));
        } else {
            const auto& sk = std::get<SkolemTerm>(t);
            std::vector<std::string> args;
            for (const auto& x : sk.args) args.push_back(value_of(x, b));
            g.args.push_back(skolem_label(sk.function, args));
        }
    }
    return g;
}

inline void rule_constants(const Atom& a, std::set<std::string>& out) {
    for (const auto& t : a.args) {
        if (auto c = std::get_if<Constant>(&t)) out.insert(c->label);
        if (auto sk = std::get_if<SkolemTerm>(&t))
            for (const auto& x : sk->args)
                if (auto c = std::get_if<Constant>(&x)) out.insert(c->label);
    }
}

// Every binding of `vars` over `domain`, in odometer order.
inline std::vector<Binding> all_bindings(const std::vector<std::string>& vars, const std::vector<std::string>& domain) {
    std::vector<Binding> out;
    if (domain.empty() && !vars.empty()) return out;
    std::vector<std::size_t> pos(vars.size(), 0);
    for (;;) {
        Binding b;
        for (std::size_t i = 0; i < vars.size(); ++i) b[vars[i]] = domain[pos[i]];
        out.push_back(std::move(b));
        std::size_t i = 0;
        while (i < vars.size() && ++pos[i] == domain.size()) pos[i++] = 0;
        if (i == vars.size()) return out;
    }
}

} // namespace detail

// Least fixed point by repeated full cross-product firing of every rule.
inline AtomSet naive_ground(const std::vector<GroundAtom>& facts, const std::vector<Rule>& rules) {
    AtomSet atoms(facts.begin(), facts.end());
    std::set<std::string> rule_consts;
    for (const auto& r : rules) {
        for (const auto& b : r.body) detail::rule_constants(b, rule_consts);
        detail::rule_constants(r.head, rule_consts);
    }
    for (bool changed = true; changed;) {
        changed = false;
        std::set<std::string> d = rule_consts;
        for (const auto& a : atoms) d.insert(a.args.begin(), a.args.end());
        std::vector<std::string> domain(d.begin(), d.end());
        AtomSet next = atoms;
        for (const auto& r : rules) {
            std::set<std::string> vs;
            for (const auto& b : r.body)
                for (const auto& v : variables_of(b)) vs.insert(v);
            for (const auto& b : detail::all_bindings({vs.begin(), vs.end()}, domain)) {
                bool fires = std::all_of(r.body.begin(), r.body.end(),
                                         [&](const Atom& a) { return atoms.count(detail::instantiate(a, b)) != 0; });
                if (fires) next.insert(detail::instantiate(r.head, b));
            }
        }
        if (next.size() != atoms.size()) {
            atoms = std::move(next);
            changed = true;
        }
    }
    return atoms;
}

inline AtomSet naive_ground(const KnowledgeBase& kb) {
    std::vector<GroundAtom> facts;
    for (const auto& f : kb.facts) facts.push_back(f.atom);
    return naive_ground(facts, kb.rules);
}

// ⊆-minimal fact subsets whose closure contains bot, by exhaustive search.
inline std::set<AtomSet> brute_mis(const KnowledgeBase& kb) {
    const std::size_t n = kb.facts.size();
    if (n > 20) throw std::invalid_argument("brute_mis is limited to 20 facts");
    std::vector<std::uint32_t> order(std::size_t{1} << n);
    for (std::uint32_t m = 0; m < order.size(); ++m) order[m] = m;
    std::stable_sort(order.begin(), order.end(),
                     [](std::uint32_t a, std::uint32_t b) { return std::popcount(a) < std::popcount(b); });
    std::vector<std::uint32_t> minimal;
    for (auto m : order) {
        if (std::any_of(minimal.begin(), minimal.end(), [&](std::uint32_t x) { return (x & m) == x; })) continue;
        std::vector<GroundAtom> subset;
        for (std::size_t i = 0; i < n; ++i)
            if (m >> i & 1u) subset.push_back(kb.facts[i].atom);
        if (naive_ground(subset, kb.rules).count(bottom_atom())) minimal.push_back(m);
    }
    std::set<AtomSet> out;
    for (auto m : minimal) {
        AtomSet s;
        for (std::size_t i = 0; i < n; ++i)
            if (m >> i & 1u) s.insert(kb.facts[i].atom);
        out.insert(std::move(s));
    }
    return out;
}

// Every world of `fg` with its normalized probability, by a direct product
// of factor values.
inline std::vector<std::pair<World, double>> enumerate_worlds(const FactorGraph& fg) {
    const auto& atoms = fg.atoms();
    if (atoms.size() > 16) throw std::invalid_argument("enumerate_worlds is limited to 16 atoms");
    std::vector<std::pair<World, double>> out;
    double z = 0.0;
    for (std::uint32_t m = 0; m < (std::uint32_t{1} << atoms.size()); ++m) {
        auto truth = [&](std::size_t i) { return (m >> i & 1u) != 0; };
        double w = 1.0;
        for (const auto& f : fg.factors()) {
            if (f.kind == Factor::Kind::atom) {
                if (truth(*f.head)) w *= std::exp(f.theta);
                continue;
            }
            bool body = std::all_of(f.body.begin(), f.body.end(), truth);
            bool ok = !body || (f.head && truth(*f.head));
            if (f.hard && !ok) w = 0.0;
            if (!f.hard && ok) w *= std::exp(f.theta);
        }
        World world;
        for (std::size_t i = 0; i < atoms.size(); ++i)
            if (truth(i)) world.true_atoms.insert(atoms[i]);
        out.emplace_back(std::move(world), w);
        z += w;
    }
    if (z == 0.0) throw Unsatisfiable("no world satisfies the hard constraints");
    for (auto& [_, p] : out) p /= z;
    return out;
}

// Marginal probability that the atoms in `scope` take exactly the values
// given by `w`, summed over the full enumeration.
inline double marginal(const FactorGraph& fg, const World& w, const std::set<GroundAtom>& scope) {
    double p = 0.0;
    for (const auto& [world, q] : enumerate_worlds(fg)) {
        bool agrees = std::all_of(scope.begin(), scope.end(), [&](const GroundAtom& a) {
            return world.true_atoms.count(a) == w.true_atoms.count(a);
        });
        if (agrees) p += q;
    }
    return p;
}

} // namespace pkb::oracle
