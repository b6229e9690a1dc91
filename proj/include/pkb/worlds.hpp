#pragma once

// Possible-world semantics over the grounded KB: the factor graph (one factor
// per grounded atom and per rule grounding), exact enumeration of the joint
// distribution, maximum relevant worlds, and the total-probability ranking of
// candidate answers.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "grounding.hpp"
#include "kb.hpp"
#include "matching.hpp"
#include "query.hpp"

namespace pkb {

class Unsatisfiable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr double kMaxAtomWeight = 30.0;
inline constexpr std::size_t kDefaultEnumerationCap = 22;

// θ_A = ln(w / (1 − w)), clamped to ±30.
inline double confidence_to_weight(double w) {
    if (w >= 1.0) return kMaxAtomWeight;
    if (w <= 0.0) return -kMaxAtomWeight;
    return std::clamp(std::log(w / (1.0 - w)), -kMaxAtomWeight, kMaxAtomWeight);
}

struct Factor {
    enum class Kind { atom, rule };
    Kind kind = Kind::atom;
    std::vector<GroundAtom> scope;
    double theta = 0.0; // ignored when hard
    bool hard = false;
    // Rule factors: body atom indices and the head index (none for bot).
    std::vector<std::size_t> body;
    std::optional<std::size_t> head;
};

class FactorGraph {
public:
    // Adds `a` as a variable with its atom factor.
    std::size_t add_atom(const GroundAtom& a, double theta) {
        if (a.is_bottom()) throw std::invalid_argument("bot is not a random variable");
        if (index_.count(a)) throw std::invalid_argument("duplicate atom " + to_string(a));
        if (atoms_.size() >= 64) throw CapExceeded("factor graphs are limited to 64 atoms");
        std::size_t i = atoms_.size();
        atoms_.push_back(a);
        index_.emplace(a, i);
        Factor f;
        f.kind = Factor::Kind::atom;
        f.scope = {a};
        f.theta = theta;
        f.head = i;
        factors_.push_back(std::move(f));
        atom_theta_.push_back(theta);
        return i;
    }

    // Grounded implication body ⇒ head; a missing head means ⊥.
    void add_rule(const std::vector<GroundAtom>& body, const std::optional<GroundAtom>& head, RuleWeight w) {
        Factor f;
        f.kind = Factor::Kind::rule;
        f.hard = w.is_hard();
        f.theta = w.is_hard() ? 0.0 : w.value();
        for (const auto& b : body) {
            f.body.push_back(require(b));
            f.scope.push_back(b);
        }
        if (head && !head->is_bottom()) {
            f.head = require(*head);
            f.scope.push_back(*head);
        }
        RuleMask m;
        for (auto b : f.body) m.body |= std::uint64_t{1} << b;
        m.has_head = f.head.has_value();
        if (f.head) m.head = std::uint64_t{1} << *f.head;
        m.theta = f.theta;
        m.hard = f.hard;
        rules_.push_back(m);
        factors_.push_back(std::move(f));
    }

    const std::vector<GroundAtom>& atoms() const { return atoms_; }
    const std::vector<Factor>& factors() const { return factors_; }
    std::size_t size() const { return atoms_.size(); }

    std::optional<std::size_t> index_of(const GroundAtom& a) const {
        auto it = index_.find(a);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    std::size_t atom_factor_count() const { return atoms_.size(); }
    std::size_t rule_factor_count() const { return rules_.size(); }
    std::size_t hard_factor_count() const {
        return static_cast<std::size_t>(std::count_if(rules_.begin(), rules_.end(), [](const RuleMask& r) { return r.hard; }));
    }

    // log ∏ φ over a world given as a bitmask over atoms(); −∞ when a hard
    // factor is violated.
    double log_weight(std::uint64_t world) const { return shifted_log_weight(world) + shift(); }

    // log_weight minus shift(): every factor contributes at most 0, so
    // probabilities computed from it avoid cancelling large logs.
    double shifted_log_weight(std::uint64_t world) const {
        double lw = 0.0;
        for (std::size_t i = 0; i < atoms_.size(); ++i)
            if (bool(world >> i & 1u) != (atom_theta_[i] > 0.0)) lw -= std::abs(atom_theta_[i]);
        for (const auto& r : rules_) {
            bool body_true = (world & r.body) == r.body;
            bool satisfied = !body_true || (r.has_head && (world & r.head));
            if (r.hard) {
                if (!satisfied) return -std::numeric_limits<double>::infinity();
            } else if (satisfied != (r.theta > 0.0)) {
                lw -= std::abs(r.theta);
            }
        }
        return lw;
    }

    // Σ max(θ, 0) over atom and soft rule factors.
    double shift() const {
        double s = 0.0;
        for (double t : atom_theta_) s += std::max(t, 0.0);
        for (const auto& r : rules_)
            if (!r.hard) s += std::max(r.theta, 0.0);
        return s;
    }

private:
    struct RuleMask {
        std::uint64_t body = 0;
        std::uint64_t head = 0;
        bool has_head = false;
        double theta = 0.0;
        bool hard = false;
    };

    std::size_t require(const GroundAtom& a) const {
        auto it = index_.find(a);
        if (it == index_.end()) throw std::invalid_argument("factor references unknown atom " + to_string(a));
        return it->second;
    }

    std::vector<GroundAtom> atoms_;
    std::map<GroundAtom, std::size_t> index_;
    std::vector<Factor> factors_;
    std::vector<double> atom_theta_;
    std::vector<RuleMask> rules_;
};

// One atom factor per grounded atom (base facts weighted by their confidence,
// derived atoms neutral) and one rule factor per recorded grounding. Hard
// bot-headed groundings act as world filters.
inline FactorGraph build_factor_graph(const GroundedKB& gkb, const KnowledgeBase& kb,
                                      std::size_t cap = kDefaultEnumerationCap) {
    std::size_t n = 0;
    for (const auto& a : gkb.atoms)
        if (!a.is_bottom()) ++n;
    if (n > cap)
        throw CapExceeded("grounded KB has " + std::to_string(n) + " atoms; exact enumeration is capped at " +
                          std::to_string(cap));
    FactorGraph fg;
    for (const auto& a : gkb.atoms) {
        if (a.is_bottom()) continue;
        const Fact* f = kb.find_fact(a);
        fg.add_atom(a, f ? confidence_to_weight(f->weight) : 0.0);
    }
    for (const auto& g : gkb.rule_groundings) fg.add_rule(g.body, g.head, kb.rules.at(g.rule).weight);
    return fg;
}

struct World {
    std::set<GroundAtom> true_atoms;
    auto operator<=>(const World&) const = default;
};

inline std::string to_string(const World& w) {
    std::string out = "{";
    bool first = true;
    for (const auto& a : w.true_atoms) {
        if (!first) out += ", ";
        first = false;
        out += to_string(a);
    }
    return out + "}";
}

inline std::uint64_t world_mask(const FactorGraph& fg, const World& w) {
    std::uint64_t m = 0;
    for (const auto& a : w.true_atoms)
        if (auto i = fg.index_of(a)) m |= std::uint64_t{1} << *i;
    return m;
}

inline World world_from_mask(const FactorGraph& fg, std::uint64_t m) {
    World w;
    for (std::size_t i = 0; i < fg.size(); ++i)
        if (m >> i & 1u) w.true_atoms.insert(fg.atoms()[i]);
    return w;
}

inline double world_weight(const FactorGraph& fg, const World& w) {
    return std::exp(fg.log_weight(world_mask(fg, w)));
}

namespace detail {

// Streaming log-sum-exp over the worlds of `fg`.
inline double log_partition(const FactorGraph& fg, std::size_t cap) {
    if (fg.size() > cap)
        throw CapExceeded("exact enumeration of " + std::to_string(fg.size()) + " atoms exceeds the cap of " +
                          std::to_string(cap));
    double m = -std::numeric_limits<double>::infinity();
    double s = 0.0;
    const std::uint64_t worlds = std::uint64_t{1} << fg.size();
    for (std::uint64_t w = 0; w < worlds; ++w) {
        double lw = fg.shifted_log_weight(w);
        if (lw == -std::numeric_limits<double>::infinity()) continue;
        if (lw > m) {
            s = s * std::exp(m - lw) + 1.0;
            m = lw;
        } else {
            s += std::exp(lw - m);
        }
    }
    if (s == 0.0) throw Unsatisfiable("no world satisfies the hard constraints");
    return m + std::log(s);
}

} // namespace detail

inline double log_partition_function(const FactorGraph& fg, std::size_t cap = kDefaultEnumerationCap) {
    return detail::log_partition(fg, cap) + fg.shift();
}

// Z = Σ_worlds ∏ φ. May overflow to +∞ for very large weights; use
// log_partition_function for ratios.
inline double partition_function(const FactorGraph& fg, std::size_t cap = kDefaultEnumerationCap) {
    return std::exp(log_partition_function(fg, cap));
}

inline double world_probability(const FactorGraph& fg, const World& w, std::size_t cap = kDefaultEnumerationCap) {
    double lz = detail::log_partition(fg, cap);
    return std::exp(fg.shifted_log_weight(world_mask(fg, w)) - lz);
}

// P(𝒲) for every world, indexed by its bitmask over fg.atoms().
inline std::vector<double> world_probabilities(const FactorGraph& fg, std::size_t cap = kDefaultEnumerationCap) {
    double lz = detail::log_partition(fg, cap);
    std::vector<double> out(std::size_t{1} << fg.size());
    for (std::uint64_t m = 0; m < out.size(); ++m) out[m] = std::exp(fg.shifted_log_weight(m) - lz);
    return out;
}

// ---------------------------------------------------------------------------
// Independent components and scoped marginals

// Connected components of the factor graph (atoms linked by shared factors).
inline std::vector<std::size_t> component_ids(const FactorGraph& fg) {
    std::vector<std::size_t> parent(fg.size());
    std::iota(parent.begin(), parent.end(), 0);
    std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (const auto& f : fg.factors()) {
        std::optional<std::size_t> first;
        for (const auto& a : f.scope) {
            auto i = *fg.index_of(a);
            if (!first) {
                first = i;
            } else {
                auto ra = find(*first), rb = find(i);
                if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
            }
        }
    }
    std::vector<std::size_t> comp(fg.size());
    for (std::size_t i = 0; i < fg.size(); ++i) comp[i] = find(i);
    return comp;
}

// The factor graph restricted to the atoms in `scope` (a union of whole
// components, so no factor straddles the boundary).
inline FactorGraph restrict_to(const FactorGraph& fg, const std::set<GroundAtom>& scope) {
    FactorGraph sub;
    for (const auto& f : fg.factors())
        if (f.kind == Factor::Kind::atom && scope.count(f.scope.front())) sub.add_atom(f.scope.front(), f.theta);
    for (const auto& f : fg.factors()) {
        if (f.kind != Factor::Kind::rule) continue;
        std::vector<GroundAtom> body;
        for (auto b : f.body) body.push_back(fg.atoms()[b]);
        if (!scope.count(body.front())) continue;
        std::optional<GroundAtom> head;
        if (f.head) head = fg.atoms()[*f.head];
        sub.add_rule(body, head, f.hard ? RuleWeight::hard() : RuleWeight::soft(f.theta));
    }
    return sub;
}

// Atoms of every component touching `seeds`.
inline std::set<GroundAtom> relevant_scope(const FactorGraph& fg, const std::set<GroundAtom>& seeds) {
    auto comp = component_ids(fg);
    std::set<std::size_t> touched;
    for (const auto& a : seeds)
        if (auto i = fg.index_of(a)) touched.insert(comp[*i]);
    std::set<GroundAtom> scope;
    for (std::size_t i = 0; i < fg.size(); ++i)
        if (touched.count(comp[i])) scope.insert(fg.atoms()[i]);
    return scope;
}

// P(scope-assignment of w): the joint probability with every component
// outside `scope` marginalized out.
inline double scoped_probability(const FactorGraph& fg, const World& w, const std::set<GroundAtom>& scope,
                                 std::size_t cap = kDefaultEnumerationCap) {
    auto sub = restrict_to(fg, scope);
    double lz = detail::log_partition(sub, cap);
    return std::exp(sub.shifted_log_weight(world_mask(sub, w)) - lz);
}

// ---------------------------------------------------------------------------
// Worlds of a candidate

// ⟦s⟧: for each member hypothesis ē, every atom having a support inside the
// base closure of ē. The closure is the union of all supports of ē's atoms,
// or ē's first consistent support choice when that union embeds a MIS.
inline World max_relevant_world(const SummaryGraph& s, const GroundedKB& gkb) {
    World w;
    for (const auto& member : s.members) {
        SupportSet closure;
        for (const auto& a : member.atoms)
            for (const auto& sup : gkb.supports(a)) closure = closure.unite(sup);
        bool embeds = std::any_of(gkb.mis.begin(), gkb.mis.end(),
                                  [&](const SupportSet& m) { return m.subset_of(closure); });
        if (embeds) {
            auto choice = consistent_support(gkb, member.atoms);
            if (!choice) throw std::logic_error("hypothesis " + to_string(member) + " fails Cons");
            closure = *choice;
        }
        for (const auto& [atom, family] : gkb.provenance) {
            if (atom.is_bottom() || !gkb.contains(atom)) continue;
            if (std::any_of(family.begin(), family.end(), [&](const SupportSet& c) { return c.subset_of(closure); }))
                w.true_atoms.insert(atom);
        }
    }
    return w;
}

// 𝒰_γ: one maximum relevant world per summary, duplicates collapsed.
inline std::vector<World> candidate_universe(std::span<const SummaryGraph> summaries, const GroundedKB& gkb) {
    std::set<World> out;
    for (const auto& s : summaries) out.insert(max_relevant_world(s, gkb));
    return {out.begin(), out.end()};
}

// Default likelihood combinator: the best (1 − ε)·score among the matches.
inline double match_likelihood(std::span<const Hypothesis> matches) {
    double best = 0.0;
    for (const auto& h : matches) best = std::max(best, h.likelihood());
    return best;
}

// P(𝒲 ∈ 𝒰_γ | w(𝒲)): cached on the summary by summarize_hypotheses.
inline double likelihood(const World&, const SummaryGraph& s) { return s.likelihood; }

struct UniverseWorld {
    World world;
    double likelihood = 0.0;
    double prior = 0.0;
};

struct RankedAnswer {
    GroundAtom candidate;
    double probability = 0.0;
    std::vector<UniverseWorld> universe;
    std::vector<SummaryGraph> summaries;
};

// P(𝒲) for a world of a candidate, given the candidate's relevant scope.
using PriorFn = std::function<double(const World&, const std::set<GroundAtom>& scope)>;

struct RankOptions {
    std::size_t cap = kDefaultEnumerationCap;
    PriorFn prior; // defaults to scoped_probability on the factor graph
};

// P(γ; w) = Σ_{𝒲 ∈ 𝒰_γ} P(𝒲 ∈ 𝒰_γ | w(𝒲)) · P(𝒲). Priors are taken over the
// factor-graph components that the candidate's worlds touch; all worlds of
// one candidate share that scope.
inline std::vector<RankedAnswer> rank_candidates(const std::map<GroundAtom, std::vector<SummaryGraph>>& justification,
                                                 const GroundedKB& gkb, const FactorGraph& fg,
                                                 const RankOptions& opt = {}) {
    std::vector<RankedAnswer> out;
    for (const auto& [gamma, summaries] : justification) {
        if (gamma.is_bottom()) continue;
        std::map<World, double> worlds;
        for (const auto& s : summaries) {
            auto w = max_relevant_world(s, gkb);
            auto& l = worlds[w];
            l = std::max(l, likelihood(w, s));
        }
        std::set<GroundAtom> seeds;
        for (const auto& [w, _] : worlds) seeds.insert(w.true_atoms.begin(), w.true_atoms.end());
        auto scope = relevant_scope(fg, seeds);

        std::optional<FactorGraph> sub;
        double lz = 0.0;
        auto prior = [&](const World& w) {
            if (opt.prior) return opt.prior(w, scope);
            if (!sub) {
                sub = restrict_to(fg, scope);
                lz = detail::log_partition(*sub, opt.cap);
            }
            return std::exp(sub->shifted_log_weight(world_mask(*sub, w)) - lz);
        };

        RankedAnswer ra;
        ra.candidate = gamma;
        ra.summaries = summaries;
        for (const auto& [w, l] : worlds) {
            UniverseWorld uw{w, l, prior(w)};
            ra.probability += uw.likelihood * uw.prior;
            ra.universe.push_back(std::move(uw));
        }
        ra.probability = std::clamp(ra.probability, 0.0, 1.0);
        out.push_back(std::move(ra));
    }
    std::stable_sort(out.begin(), out.end(), [](const RankedAnswer& a, const RankedAnswer& b) {
        if (a.probability != b.probability) return a.probability > b.probability;
        return a.candidate < b.candidate;
    });
    return out;
}

} // namespace pkb
