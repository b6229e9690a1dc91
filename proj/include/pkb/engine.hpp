#pragma once

// End-to-end pipeline (expand → match → rank) plus the engine configuration
// file and the structured-text reports printed by pkbq.

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "grounding.hpp"
#include "kb.hpp"
#include "matching.hpp"
#include "oracle.hpp"
#include "query.hpp"
#include "similarity.hpp"
#include "worlds.hpp"

namespace pkb {

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

enum class Likelihood { max, mean };

struct EngineConfig {
    SimilarityConfig similarity;
    std::string synonyms_file;
    std::size_t enumeration_cap = kDefaultEnumerationCap;
    std::size_t topk = 10;
    Likelihood likelihood = Likelihood::max;
    std::size_t support_cap = 64;
    std::size_t iteration_cap = 1000;
    std::size_t max_compilations = 256;

    void validate() const {
        similarity.validate();
        if (enumeration_cap == 0 || enumeration_cap > 30) throw std::invalid_argument("enumeration_cap must be in [1,30]");
        if (topk == 0) throw std::invalid_argument("topk must be >= 1");
        if (support_cap == 0) throw std::invalid_argument("support_cap must be >= 1");
        if (iteration_cap == 0) throw std::invalid_argument("iteration_cap must be >= 1");
        if (max_compilations == 0) throw std::invalid_argument("max_compilations must be >= 1");
    }
};

namespace detail {

inline std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline double to_real(const std::string& v, std::size_t line) {
    try {
        std::size_t used = 0;
        double d = std::stod(v, &used);
        if (used == v.size()) return d;
    } catch (const std::exception&) {
    }
    throw ParseError(line, "expected a number, got '" + v + "'");
}

inline std::size_t to_count(const std::string& v, std::size_t line) {
    if (!v.empty() && std::all_of(v.begin(), v.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        try {
            return std::stoull(v);
        } catch (const std::exception&) {
        }
    }
    throw ParseError(line, "expected a non-negative integer, got '" + v + "'");
}

} // namespace detail

// `key = value` lines; `#` comments. Unknown keys are errors. Applied on
// top of `base`.
inline EngineConfig parse_config(std::string_view text, EngineConfig base = {}) {
    std::size_t line_no = 0;
    std::istringstream in{std::string(text)};
    for (std::string raw; std::getline(in, raw);) {
        ++line_no;
        if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
        auto line = detail::trim(raw);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError(line_no, "expected key = value");
        auto key = detail::trim(line.substr(0, eq));
        auto value = detail::trim(line.substr(eq + 1));
        if (key == "theta_r") base.similarity.theta_r = detail::to_real(value, line_no);
        else if (key == "predicate_weight") base.similarity.predicate_weight = detail::to_real(value, line_no);
        else if (key == "structure_weight") base.similarity.structure_weight = detail::to_real(value, line_no);
        else if (key == "synonyms_file") base.synonyms_file = value;
        else if (key == "enumeration_cap") base.enumeration_cap = detail::to_count(value, line_no);
        else if (key == "topk") base.topk = detail::to_count(value, line_no);
        else if (key == "support_cap") base.support_cap = detail::to_count(value, line_no);
        else if (key == "iteration_cap") base.iteration_cap = detail::to_count(value, line_no);
        else if (key == "max_compilations") base.max_compilations = detail::to_count(value, line_no);
        else if (key == "likelihood") {
            if (value == "max") base.likelihood = Likelihood::max;
            else if (value == "mean") base.likelihood = Likelihood::mean;
            else throw ParseError(line_no, "unknown likelihood combinator '" + value + "'");
        } else {
            throw ParseError(line_no, "unknown configuration key '" + key + "'");
        }
    }
    try {
        base.validate();
    } catch (const std::invalid_argument& e) {
        throw ParseError(line_no, e.what());
    }
    return base;
}

inline GroundingOptions grounding_options(const EngineConfig& cfg) {
    return GroundingOptions{cfg.support_cap, cfg.iteration_cap};
}

inline CompilerConfig compiler_config(const GroundedKB& gkb, const Query& q, const EngineConfig& cfg) {
    auto cc = compiler_for(gkb, q, cfg.similarity);
    cc.max_variants = cfg.max_compilations;
    return cc;
}

// ---------------------------------------------------------------------------
// Pipeline

struct Answers {
    GroundedKB gkb;
    Justification hypotheses;
    std::map<GroundAtom, std::vector<SummaryGraph>> summaries;
};

// Exact mode: consistent unifications of every compiled query, summarized
// under the equivalence similarity. Approximate mode: similarity-driven
// matching and Γ̃ under the default metric.
inline Answers answer(const KnowledgeBase& kb, const Query& q, const EngineConfig& cfg, bool approx) {
    Answers out;
    out.gkb = ground_fixpoint_prov(kb, grounding_options(cfg));
    auto cc = compiler_config(out.gkb, q, cfg);
    if (approx) {
        out.hypotheses = justify_approx(out.gkb, q, cc, cfg.topk);
    } else {
        out.hypotheses = justify(out.gkb, q, compiled_unifier(cc), identity_summarizer());
        for (auto& [_, hs] : out.hypotheses) {
            std::stable_sort(hs.begin(), hs.end(), [](const Hypothesis& a, const Hypothesis& b) {
                if (a.likelihood() != b.likelihood()) return a.likelihood() > b.likelihood();
                return a.body < b.body;
            });
        }
    }
    SimilarityFn sim = approx ? default_similarity(cfg.similarity, &out.gkb) : equivalence_similarity();
    SummarizeOptions opt;
    opt.theta_r = cfg.similarity.theta_r;
    opt.gkb = &out.gkb;
    for (const auto& [gamma, hs] : out.hypotheses) {
        auto ss = summarize_hypotheses(hs, sim, opt);
        if (cfg.likelihood == Likelihood::mean) {
            std::map<HypGraph, double> best;
            for (const auto& h : hs) {
                auto& l = best[h.graph()];
                l = std::max(l, h.likelihood());
            }
            for (auto& s : ss) {
                double total = 0.0;
                for (const auto& m : s.members) total += best.at(m);
                s.likelihood = total / static_cast<double>(s.members.size());
            }
        }
        out.summaries[gamma] = std::move(ss);
    }
    return out;
}

struct Ranking {
    Answers answers;
    FactorGraph graph;
    std::vector<RankedAnswer> ranked;
};

// With `use_oracle`, world priors come from the brute-force marginal over
// the full enumeration instead of the engine's component-scoped inference.
inline Ranking rank(const KnowledgeBase& kb, const Query& q, const EngineConfig& cfg, bool approx,
                    bool use_oracle = false) {
    Ranking r{answer(kb, q, cfg, approx), {}, {}};
    r.graph = build_factor_graph(r.answers.gkb, kb, cfg.enumeration_cap);
    RankOptions opt;
    opt.cap = cfg.enumeration_cap;
    if (use_oracle) {
        opt.prior = [&g = r.graph](const World& w, const std::set<GroundAtom>& scope) {
            return oracle::marginal(g, w, scope);
        };
    }
    r.ranked = rank_candidates(r.answers.summaries, r.answers.gkb, r.graph, opt);
    return r;
}

// ---------------------------------------------------------------------------
// Reports

inline constexpr std::string_view kReportVersion = "v1";

inline std::string report_header(std::string_view command) {
    return "# pkbq " + std::string(command) + " " + std::string(kReportVersion) + "\n";
}

inline std::string family_string(const SupportFamily& family) {
    std::vector<std::string> parts;
    for (const auto& s : family) parts.push_back(to_string(s));
    std::sort(parts.begin(), parts.end());
    std::string out = "{";
    for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? ", " : "") + parts[i];
    return out + "}";
}

inline std::string atoms_section(const std::set<GroundAtom>& atoms) {
    std::string out = "atoms " + std::to_string(atoms.size()) + "\n";
    for (const auto& a : atoms) out += to_string(a) + "\n";
    return out;
}

inline std::string ground_report(const GroundedKB& gkb) {
    std::string out = report_header("ground") + atoms_section(gkb.atoms);
    out += "provenance " + std::to_string(gkb.provenance.size()) + "\n";
    for (const auto& [atom, family] : gkb.provenance) out += to_string(atom) + "\t" + family_string(family) + "\n";
    return out;
}

inline std::string ground_report_oracle(const std::set<GroundAtom>& atoms) {
    return report_header("ground") + atoms_section(atoms);
}

// One MIS per line, lexicographically sorted; empty for a consistent KB.
inline std::string mis_report(const std::vector<std::set<GroundAtom>>& mis) {
    std::vector<std::string> lines;
    for (const auto& m : mis) lines.push_back(to_string(SupportSet(std::vector<GroundAtom>(m.begin(), m.end()))));
    std::sort(lines.begin(), lines.end());
    std::string out;
    for (const auto& l : lines) out += l + "\n";
    return out;
}

inline std::string graph_string(const std::set<GroundAtom>& atoms) {
    return to_string(HypGraph{atoms, {}});
}

inline std::string hypothesis_line(const Hypothesis& h) {
    return "  hypothesis score=" + format_double(h.score) + " error=" + format_double(h.error) +
           " likelihood=" + format_double(h.likelihood()) + " exact=" + (h.exact ? "yes" : "no") +
           " origin=" + h.origin + "\n    body " + graph_string(h.body) + "\n";
}

inline std::string summary_lines(const SummaryGraph& s, std::string_view indent) {
    std::string in(indent);
    std::string out = in + "summary likelihood=" + format_double(s.likelihood) + " members=" +
                      std::to_string(s.members.size()) + "\n" + in + "  merged " + to_string(s.merged) + "\n";
    for (const auto& m : s.members) out += in + "  member " + to_string(m) + "\n";
    return out;
}

inline double best_likelihood(const std::vector<Hypothesis>& hs) {
    double best = 0.0;
    for (const auto& h : hs) best = std::max(best, h.likelihood());
    return best;
}

inline std::string query_report(const Answers& a, bool approx) {
    std::vector<const GroundAtom*> order;
    for (const auto& [gamma, _] : a.hypotheses) order.push_back(&gamma);
    std::stable_sort(order.begin(), order.end(), [&](const GroundAtom* x, const GroundAtom* y) {
        double lx = best_likelihood(a.hypotheses.at(*x)), ly = best_likelihood(a.hypotheses.at(*y));
        if (lx != ly) return lx > ly;
        return *x < *y;
    });
    std::string out = report_header("query");
    out += std::string("mode ") + (approx ? "approx" : "exact") + "\n";
    out += "candidates " + std::to_string(order.size()) + "\n";
    for (const auto* gamma : order) {
        const auto& hs = a.hypotheses.at(*gamma);
        out += "candidate " + to_string(*gamma) + " hypotheses=" + std::to_string(hs.size()) + "\n";
        for (const auto& h : hs) out += hypothesis_line(h);
        if (approx)
            for (const auto& s : a.summaries.at(*gamma)) out += summary_lines(s, "  ");
    }
    return out;
}

inline std::string factor_graph_line(const FactorGraph& fg) {
    return "factor_graph atoms=" + std::to_string(fg.size()) + " factors=" + std::to_string(fg.factors().size()) +
           " rule_factors=" + std::to_string(fg.rule_factor_count()) + " hard=" + std::to_string(fg.hard_factor_count()) +
           "\n";
}

inline std::string rank_report(const Ranking& r, bool approx) {
    std::string out = report_header("rank");
    out += std::string("mode ") + (approx ? "approx" : "exact") + "\n";
    out += factor_graph_line(r.graph);
    out += "candidates " + std::to_string(r.ranked.size()) + "\n";
    std::size_t pos = 0;
    for (const auto& ra : r.ranked) {
        out += std::to_string(++pos) + " " + to_string(ra.candidate) + " P=" + format_double(ra.probability) + "\n";
        for (const auto& w : ra.universe)
            out += "  world " + to_string(w.world) + " likelihood=" + format_double(w.likelihood) +
                   " prior=" + format_double(w.prior) + "\n";
        for (const auto& s : ra.summaries) out += summary_lines(s, "  ");
    }
    return out;
}

// hypotheses → supports → MIS checks → worlds for one candidate.
inline std::string explain_report(const Ranking& r, const GroundAtom& candidate) {
    const auto& gkb = r.answers.gkb;
    std::string out = report_header("explain");
    out += "candidate " + to_string(candidate) + "\n";
    auto it = r.answers.hypotheses.find(candidate);
    if (it == r.answers.hypotheses.end()) return out + "status not-a-candidate\n";

    out += "hypotheses " + std::to_string(it->second.size()) + "\n";
    for (const auto& h : it->second) {
        out += hypothesis_line(h);
        for (const auto& atom : h.body) out += "    support " + to_string(atom) + "\t" + family_string(gkb.supports(atom)) + "\n";
        auto choice = consistent_support(gkb, h.body);
        out += "    cons " + std::string(choice ? "yes" : "no");
        if (choice) out += " via " + to_string(*choice);
        out += "\n";
        for (const auto& m : gkb.mis) {
            bool touches = std::any_of(m.begin(), m.end(), [&](const GroundAtom& f) {
                return choice && choice->contains(f);
            });
            if (touches) out += "    mis " + to_string(m) + " partially covered, not embedded\n";
        }
    }
    out += "mis " + std::to_string(gkb.mis.size()) + "\n";
    for (const auto& m : gkb.mis) out += "  " + to_string(m) + "\n";
    out += factor_graph_line(r.graph);
    for (const auto& ra : r.ranked) {
        if (ra.candidate != candidate) continue;
        for (const auto& s : ra.summaries) out += summary_lines(s, "");
        for (const auto& w : ra.universe)
            out += "world " + to_string(w.world) + " likelihood=" + format_double(w.likelihood) +
                   " prior=" + format_double(w.prior) + "\n";
        out += "probability " + format_double(ra.probability) + "\n";
    }
    return out;
}

} // namespace pkb
