#pragma once

// Approximate matching of compiled queries against the grounded KB, and the
// clustering/summarization Γ̃ of hypothesis graphs with its graph provenance.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstddef>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "grounding.hpp"
#include "kb.hpp"
#include "query.hpp"
#include "similarity.hpp"

namespace pkb {

class ProvenanceMiss : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline bool hypothesis_rank_less(const Hypothesis& a, const Hypothesis& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.exact != b.exact) return a.exact;
    if (a.answer != b.answer) return a.answer < b.answer;
    return a.body < b.body;
}

} // namespace detail

// Atom-at-a-time candidates, then a backtracking join (most selective query
// atom first). Every assembled body must pass Cons; it is scored against the
// query body instantiated with the same bindings. Returns at most k
// hypotheses, best first.
inline std::vector<Hypothesis> approx_match(const GroundedKB& gkb, const CompiledQuery& cq,
                                            const SimilarityConfig& cfg, std::size_t k) {
    if (k == 0) throw std::invalid_argument("approx_match needs k >= 1");
    const auto& body = cq.query.body;
    std::vector<std::vector<const GroundAtom*>> cands(body.size());
    for (std::size_t i = 0; i < body.size(); ++i)
        for (const auto& g : gkb.atoms)
            if (!g.is_bottom() && g.arity() == body[i].arity() && atom_similarity(body[i], g, cfg) >= cfg.theta_r) cands[i].push_back(&g);

    std::vector<std::size_t> order(body.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return cands[a].size() < cands[b].size(); });

    std::map<std::pair<std::set<GroundAtom>, GroundAtom>, Hypothesis> found;
    Substitution theta;
    std::vector<const GroundAtom*> chosen(body.size(), nullptr);

    auto bind = [&](const Atom& q, const GroundAtom& g, std::vector<std::string>& trail) {
        for (std::size_t p = 0; p < q.args.size(); ++p) {
            const auto* v = std::get_if<Variable>(&q.args[p]);
            if (!v) continue;
            if (const auto* cur = theta.find(v->name)) {
                if (*cur != g.args[p]) return false;
            } else {
                theta.bindings.emplace(v->name, g.args[p]);
                trail.push_back(v->name);
            }
        }
        return true;
    };

    std::function<void(std::size_t)> join = [&](std::size_t depth) {
        if (depth == order.size()) {
            Hypothesis h;
            std::set<GroundAtom> query_body;
            for (std::size_t i = 0; i < body.size(); ++i) {
                h.body.insert(*chosen[i]);
                query_body.insert(apply(theta, body[i]));
            }
            if (!cons(gkb, h.body)) return;
            h.answer = apply(theta, cq.query.head);
            h.exact = h.body == query_body;
            h.score = h.exact ? 1.0 : similarity(HypGraph{h.body, {}}, HypGraph{query_body, {}}, cfg, &gkb);
            h.error = cq.error;
            h.origin = cq.origin;
            auto key = std::make_pair(h.body, h.answer);
            auto it = found.find(key);
            if (it == found.end() || detail::hypothesis_rank_less(h, it->second)) found[key] = std::move(h);
            return;
        }
        std::size_t i = order[depth];
        for (const auto* g : cands[i]) {
            std::vector<std::string> trail;
            if (bind(body[i], *g, trail)) {
                chosen[i] = g;
                join(depth + 1);
            }
            for (const auto& v : trail) theta.bindings.erase(v);
        }
    };
    join(0);

    std::vector<Hypothesis> out;
    for (auto& [_, h] : found) out.push_back(std::move(h));
    std::sort(out.begin(), out.end(), detail::hypothesis_rank_less);
    if (out.size() > k) out.resize(k);
    return out;
}

// Approximate justification: every compiled query matched approximately,
// hypotheses grouped by answer. Identical bodies for one answer keep the
// best likelihood.
inline Justification justify_approx(const GroundedKB& gkb, const Query& q, const CompilerConfig& cfg,
                                    std::size_t k) {
    std::map<GroundAtom, std::map<std::set<GroundAtom>, Hypothesis>> grouped;
    for (const auto& cq : compile(q, cfg)) {
        for (auto& h : approx_match(gkb, cq, cfg.similarity, k)) {
            auto& slot = grouped[h.answer];
            auto it = slot.find(h.body);
            if (it == slot.end() || h.likelihood() > it->second.likelihood() ||
                (h.likelihood() == it->second.likelihood() && h.exact && !it->second.exact))
                slot[h.body] = std::move(h);
        }
    }
    Justification j;
    for (auto& [gamma, bodies] : grouped) {
        auto& v = j[gamma];
        for (auto& [_, h] : bodies) v.push_back(std::move(h));
    }
    return j;
}

// ---------------------------------------------------------------------------
// Summarization

struct SummaryGraph {
    HypGraph merged;
    std::vector<HypGraph> members; // sorted
    std::map<GroundAtom, std::size_t> support_counts;
    double likelihood = 1.0;

    // Identity is the merged graph plus the member set.
    bool operator==(const SummaryGraph& o) const { return merged == o.merged && members == o.members; }
    bool operator<(const SummaryGraph& o) const {
        if (merged != o.merged) return merged < o.merged;
        return members < o.members;
    }
};

using SummaryUdf = std::function<SummaryGraph(std::span<const HypGraph>)>;

// Default ν_UDF: atom-set union with per-atom multiplicities; members kept
// verbatim.
inline SummaryGraph nu_udf(std::span<const HypGraph> cluster) {
    if (cluster.empty()) throw std::invalid_argument("cannot summarize an empty cluster");
    SummaryGraph s;
    s.members.assign(cluster.begin(), cluster.end());
    std::sort(s.members.begin(), s.members.end());
    for (const auto& g : s.members) {
        for (const auto& a : g.atoms) {
            s.merged.atoms.insert(a);
            ++s.support_counts[a];
        }
        s.merged.variables.insert(g.variables.begin(), g.variables.end());
    }
    return s;
}

struct SummarizeOptions {
    double theta_r = 0.5;
    const GroundedKB* gkb = nullptr; // consistency of merged clusters
    SummaryUdf udf = nu_udf;
};

namespace detail {

using Cluster = std::vector<std::size_t>;

// Connected components of the `sim > theta_r` relation restricted to `ids`.
inline std::vector<Cluster> components(const Cluster& ids, const std::vector<std::vector<double>>& sim,
                                       double theta_r) {
    std::vector<Cluster> out;
    std::set<std::size_t> left(ids.begin(), ids.end());
    while (!left.empty()) {
        Cluster c{*left.begin()};
        left.erase(left.begin());
        for (std::size_t head = 0; head < c.size(); ++head) {
            for (auto it = left.begin(); it != left.end();) {
                if (sim[c[head]][*it] > theta_r) {
                    c.push_back(*it);
                    it = left.erase(it);
                } else {
                    ++it;
                }
            }
        }
        std::sort(c.begin(), c.end());
        out.push_back(std::move(c));
    }
    return out;
}

inline bool cluster_consistent(const Cluster& c, std::span<const HypGraph> graphs, const GroundedKB* gkb) {
    if (!gkb || !gkb->has_provenance || c.size() <= 1) return true;
    std::set<GroundAtom> u;
    for (auto i : c) u.insert(graphs[i].atoms.begin(), graphs[i].atoms.end());
    return cons(*gkb, u);
}

// Splits an inconsistent cluster by dropping the member least similar (on
// average) to the rest, then re-clustering what remains.
inline void split(const Cluster& c, std::span<const HypGraph> graphs, const std::vector<std::vector<double>>& sim,
                  const SummarizeOptions& opt, std::vector<Cluster>& out) {
    if (cluster_consistent(c, graphs, opt.gkb)) {
        out.push_back(c);
        return;
    }
    std::size_t worst = c.front();
    double worst_mean = 2.0;
    for (auto i : c) {
        double total = 0.0;
        for (auto j : c)
            if (j != i) total += sim[i][j];
        double mean = total / static_cast<double>(c.size() - 1);
        if (mean < worst_mean || (mean == worst_mean && graphs[worst] < graphs[i])) {
            worst = i;
            worst_mean = mean;
        }
    }
    Cluster rest;
    for (auto i : c)
        if (i != worst) rest.push_back(i);
    out.push_back({worst});
    for (const auto& sub : components(rest, sim, opt.theta_r)) split(sub, graphs, sim, opt, out);
}

} // namespace detail

// Γ̃: clusters are the connected components of the θ_r-similarity relation
// (each pivot's θ_r-ball closed under reachability), split until every
// merged graph is consistent, then merged by the UDF.
inline std::vector<SummaryGraph> summarize(std::span<const HypGraph> input, const SimilarityFn& sim,
                                           const SummarizeOptions& opt = {}) {
    std::vector<HypGraph> graphs(input.begin(), input.end());
    std::sort(graphs.begin(), graphs.end());
    graphs.erase(std::unique(graphs.begin(), graphs.end()), graphs.end());
    std::size_t n = graphs.size();
    std::vector<std::vector<double>> table(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) table[i][j] = table[j][i] = sim(graphs[i], graphs[j]);

    detail::Cluster all(n);
    std::iota(all.begin(), all.end(), 0);
    std::vector<detail::Cluster> clusters;
    for (const auto& c : detail::components(all, table, opt.theta_r)) detail::split(c, graphs, table, opt, clusters);

    std::set<SummaryGraph> out;
    for (const auto& c : clusters) {
        std::vector<HypGraph> members;
        for (auto i : c) members.push_back(graphs[i]);
        out.insert(opt.udf(members));
    }
    return {out.begin(), out.end()};
}

// 𝒥map: the largest G′ ⊆ all with Γ̃(G′) = {s}, found by enumerating the
// supersets of s's members inside `all`.
inline std::vector<HypGraph> graph_provenance(const SummaryGraph& s, std::span<const HypGraph> all,
                                              const SimilarityFn& sim, const SummarizeOptions& opt = {}) {
    std::vector<HypGraph> pool(all.begin(), all.end());
    std::sort(pool.begin(), pool.end());
    pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
    std::vector<HypGraph> extra;
    for (const auto& g : pool)
        if (!std::binary_search(s.members.begin(), s.members.end(), g)) extra.push_back(g);
    for (const auto& m : s.members)
        if (!std::binary_search(pool.begin(), pool.end(), m))
            throw ProvenanceMiss("summary member " + to_string(m) + " is not among the input graphs");
    if (extra.size() > 20) throw CapExceeded("graph provenance search limited to 20 non-member graphs");

    // Subsets of `extra`, largest first, lexicographic by mask within a size.
    std::vector<std::uint32_t> masks(std::size_t{1} << extra.size());
    std::iota(masks.begin(), masks.end(), 0u);
    std::stable_sort(masks.begin(), masks.end(), [](std::uint32_t a, std::uint32_t b) {
        return std::popcount(a) > std::popcount(b);
    });
    for (auto mask : masks) {
        std::vector<HypGraph> g = s.members;
        for (std::size_t i = 0; i < extra.size(); ++i)
            if (mask & (1u << i)) g.push_back(extra[i]);
        auto summary = summarize(g, sim, opt);
        if (summary.size() == 1 && summary.front() == s) {
            std::sort(g.begin(), g.end());
            return g;
        }
    }
    throw ProvenanceMiss("no subset of the input graphs summarizes to " + to_string(s.merged));
}

// Γ̃ over the hypotheses of one answer. The likelihood of each summary is the
// best (1 − ε)·score among the hypotheses it summarizes.
inline std::vector<SummaryGraph> summarize_hypotheses(std::span<const Hypothesis> hyps, const SimilarityFn& sim,
                                                      const SummarizeOptions& opt = {}) {
    std::map<HypGraph, double> best;
    for (const auto& h : hyps) {
        auto [it, inserted] = best.emplace(h.graph(), h.likelihood());
        if (!inserted) it->second = std::max(it->second, h.likelihood());
    }
    std::vector<HypGraph> graphs;
    for (const auto& [g, _] : best) graphs.push_back(g);
    auto out = summarize(graphs, sim, opt);
    for (auto& s : out) {
        s.likelihood = 0.0;
        for (const auto& m : s.members) s.likelihood = std::max(s.likelihood, best.at(m));
    }
    return out;
}

// Γ̃ as a hypothesis summarizer: one hypothesis per summary carrying the
// merged body, the best member score and the smallest member error.
inline Summarizer summarizing(SimilarityFn sim, SummarizeOptions opt) {
    return [sim = std::move(sim), opt = std::move(opt)](std::vector<Hypothesis> hyps) {
        if (hyps.empty()) return hyps;
        std::map<HypGraph, const Hypothesis*> by_graph;
        for (const auto& h : hyps) {
            auto [it, inserted] = by_graph.emplace(h.graph(), &h);
            if (!inserted && h.likelihood() > it->second->likelihood()) it->second = &h;
        }
        std::vector<Hypothesis> out;
        for (const auto& s : summarize_hypotheses(hyps, sim, opt)) {
            Hypothesis merged;
            merged.body = s.merged.atoms;
            merged.answer = hyps.front().answer;
            merged.score = 0.0;
            merged.error = 1.0;
            merged.exact = s.members.size() == 1;
            for (const auto& m : s.members) {
                const Hypothesis* h = by_graph.at(m);
                merged.score = std::max(merged.score, h->score);
                merged.error = std::min(merged.error, h->error);
                merged.exact = merged.exact && h->exact;
                merged.origin = h->origin;
            }
            out.push_back(std::move(merged));
        }
        return out;
    };
}

} // namespace pkb
