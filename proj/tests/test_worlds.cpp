#include <gtest/gtest.h>

#include <cmath>

#include "pkb/engine.hpp"
#include "pkb/oracle.hpp"
#include "pkb/worlds.hpp"
#include "support/generators.hpp"

using namespace pkb;
using pkb::testing::ga;

namespace {

const GroundAtom A = ga("a");
const GroundAtom B = ga("b");

// Atoms A, B and the rule A ∧ B → bot.
FactorGraph contradiction_graph(double ta, double tb, RuleWeight f) {
    FactorGraph fg;
    fg.add_atom(A, ta);
    fg.add_atom(B, tb);
    fg.add_rule({A, B}, std::nullopt, f);
    return fg;
}

double closed_form(double ta, double tb, double tf) {
    return 1.0 / (1.0 + std::exp(tf) * (1.0 + std::exp(ta) + std::exp(tb)) / std::exp(ta + tb));
}

World world(std::set<GroundAtom> atoms) { return World{std::move(atoms)}; }

Ranking rank_text(const std::string& kb, const std::string& q, bool approx = false) {
    return rank(parse_kb(kb), parse_query(q), EngineConfig{}, approx);
}

const RankedAnswer& find(const Ranking& r, const GroundAtom& gamma) {
    for (const auto& ra : r.ranked)
        if (ra.candidate == gamma) return ra;
    throw std::runtime_error("candidate missing: " + to_string(gamma));
}

} // namespace

TEST(ConfidenceWeight, LogitAndClamp) {
    EXPECT_EQ(confidence_to_weight(0.5), 0.0);
    EXPECT_NEAR(confidence_to_weight(0.9), std::log(9.0), 1e-15);
    EXPECT_EQ(confidence_to_weight(1.0), 30.0);
    EXPECT_EQ(confidence_to_weight(1e-20), -30.0);
}

TEST(BuildFactorGraph, TwoFactsNoRules) {
    auto kb = parse_kb("p(a) @ w=0.9\nq(b) @ w=0.5");
    auto fg = build_factor_graph(ground_fixpoint_prov(kb), kb);
    EXPECT_EQ(fg.atom_factor_count(), 2u);
    EXPECT_EQ(fg.rule_factor_count(), 0u);
    EXPECT_NEAR(fg.factors()[0].theta, std::log(9.0), 1e-15);
}

TEST(BuildFactorGraph, ContradictionSetup) {
    auto kb = parse_kb("a @ w=0.5\nb @ w=0.5\nbot :- a, b. w=hard");
    auto fg = build_factor_graph(ground_fixpoint_prov(kb), kb);
    EXPECT_EQ(fg.atom_factor_count(), 2u);
    EXPECT_EQ(fg.rule_factor_count(), 1u);
    EXPECT_EQ(fg.hard_factor_count(), 1u);
    EXPECT_FALSE(fg.index_of(bottom_atom()));
}

TEST(BuildFactorGraph, Tweety) {
    auto kb = parse_kb(pkb::testing::tweety_text());
    auto fg = build_factor_graph(ground_fixpoint_prov(kb), kb);
    EXPECT_EQ(fg.atom_factor_count(), 4u);
    EXPECT_EQ(fg.rule_factor_count(), 3u);
    EXPECT_EQ(fg.hard_factor_count(), 1u);
    // Derived atoms carry no weight of their own.
    EXPECT_EQ(fg.factors()[*fg.index_of(ga("flies", {"tweety"}))].theta, 0.0);
}

TEST(BuildFactorGraph, CapExceeded) {
    std::string text;
    for (int i = 0; i < 5; ++i) text += "p(c" + std::to_string(i) + ")\n";
    auto kb = parse_kb(text);
    EXPECT_THROW(build_factor_graph(ground_fixpoint_prov(kb), kb, 4), CapExceeded);
    EXPECT_NO_THROW(build_factor_graph(ground_fixpoint_prov(kb), kb, 5));
}

TEST(FactorGraph, RejectsBotAndDuplicates) {
    FactorGraph fg;
    fg.add_atom(A, 0.0);
    EXPECT_THROW(fg.add_atom(A, 1.0), std::invalid_argument);
    EXPECT_THROW(fg.add_atom(bottom_atom(), 0.0), std::invalid_argument);
    EXPECT_THROW(fg.add_rule({B}, A, RuleWeight::soft(1.0)), std::invalid_argument);
}

TEST(WorldWeight, AllFalseSatisfiesEveryRule) {
    FactorGraph fg;
    fg.add_atom(A, 1.3);
    fg.add_atom(B, -0.4);
    fg.add_rule({A}, B, RuleWeight::soft(0.7));
    fg.add_rule({B}, std::nullopt, RuleWeight::soft(1.1));
    EXPECT_NEAR(world_weight(fg, world({})), std::exp(0.7 + 1.1), 1e-12);
}

TEST(WorldWeight, ContradictionWorlds) {
    auto hard = contradiction_graph(0.0, 0.0, RuleWeight::hard());
    EXPECT_EQ(world_weight(hard, world({A, B})), 0.0);
    auto soft = contradiction_graph(0.0, 0.0, RuleWeight::soft(2.5));
    EXPECT_NEAR(world_weight(soft, world({A})), std::exp(2.5), 1e-12);
}

TEST(PartitionFunction, Examples) {
    FactorGraph one;
    one.add_atom(A, 0.0);
    EXPECT_EQ(partition_function(one), 2.0);

    double ta = 0.3, tb = -1.2, tf = 2.0;
    auto fg = contradiction_graph(ta, tb, RuleWeight::soft(tf));
    double z = std::exp(tf) * (1.0 + std::exp(ta) + std::exp(tb)) + std::exp(ta + tb);
    EXPECT_NEAR(partition_function(fg), z, 1e-12 * z);
}

TEST(PartitionFunction, HardFilterKeepsOnlyConsistentWorlds) {
    // p is certain but bot :- p. is hard: only the world with p false counts.
    auto kb = parse_kb("p @ w=1.0\nbot :- p. w=hard");
    auto fg = build_factor_graph(ground_fixpoint_prov(kb), kb);
    EXPECT_EQ(partition_function(fg), 1.0);
    EXPECT_EQ(world_probability(fg, world({ga("p")})), 0.0);
}

TEST(PartitionFunction, Unsatisfiable) {
    // The all-false world satisfies every implication, so an unsatisfiable
    // graph needs a hard constraint on an empty body.
    FactorGraph fg;
    fg.add_atom(A, 0.0);
    fg.add_rule({}, std::nullopt, RuleWeight::hard());
    EXPECT_THROW(partition_function(fg), Unsatisfiable);
    EXPECT_THROW(oracle::enumerate_worlds(fg), Unsatisfiable);
}

TEST(PartitionFunction, CapIsEnforced) {
    auto fg = pkb::testing::Generator(1).factor_graph(12, 0);
    EXPECT_THROW(partition_function(fg, 11), CapExceeded);
    EXPECT_NO_THROW(partition_function(fg, 12));
}

TEST(WorldProbability, ContradictionExample) {
    auto soft = contradiction_graph(0.0, 0.0, RuleWeight::soft(std::log(3.0)));
    EXPECT_NEAR(world_probability(soft, world({A, B})), 0.1, 1e-15);
    auto hard = contradiction_graph(0.0, 0.0, RuleWeight::hard());
    EXPECT_EQ(world_probability(hard, world({A, B})), 0.0);
}

TEST(WorldProbability, UniformGraph) {
    FactorGraph fg;
    for (int i = 0; i < 5; ++i) fg.add_atom(ga("u" + std::to_string(i)), 0.0);
    EXPECT_EQ(world_probability(fg, world({})), 1.0 / 32.0);
    EXPECT_EQ(world_probability(fg, world({ga("u1"), ga("u3")})), 1.0 / 32.0);
}

TEST(WorldProbability, IsolatedFactMarginalEqualsConfidence) {
    auto kb = parse_kb("p(a) @ w=0.7");
    auto fg = build_factor_graph(ground_fixpoint_prov(kb), kb);
    EXPECT_NEAR(world_probability(fg, world({ga("p", {"a"})})), 0.7, 1e-15);
}

TEST(Components, SplitAndScope) {
    FactorGraph fg;
    for (const char* n : {"x", "y", "z", "w"}) fg.add_atom(ga(n), 0.5);
    fg.add_rule({ga("x")}, ga("y"), RuleWeight::soft(1.0));
    fg.add_rule({ga("z")}, std::nullopt, RuleWeight::hard());
    auto comp = component_ids(fg);
    EXPECT_EQ(comp[0], comp[1]);
    EXPECT_NE(comp[0], comp[2]);
    EXPECT_NE(comp[2], comp[3]);
    EXPECT_EQ(relevant_scope(fg, {ga("y")}), (std::set<GroundAtom>{ga("x"), ga("y")}));
    auto sub = restrict_to(fg, {ga("x"), ga("y")});
    EXPECT_EQ(sub.size(), 2u);
    EXPECT_EQ(sub.rule_factor_count(), 1u);
}

TEST(MaxRelevantWorld, Tweety) {
    auto kb = parse_kb(pkb::testing::tweety_text());
    auto gkb = ground_fixpoint_prov(kb);
    SummaryGraph s;
    s.merged = HypGraph{{ga("bird", {"tweety"})}, {}};
    s.members = {s.merged};
    EXPECT_EQ(max_relevant_world(s, gkb), world({ga("bird", {"tweety"}), ga("flies", {"tweety"})}));
}

TEST(MaxRelevantWorld, BaseFactsOnly) {
    auto kb = parse_kb("p(a)\np(b)\nq(a)");
    auto gkb = ground_fixpoint_prov(kb);
    SummaryGraph s;
    s.merged = HypGraph{{ga("p", {"a"}), ga("q", {"a"})}, {}};
    s.members = {s.merged};
    EXPECT_EQ(max_relevant_world(s, gkb), world(s.merged.atoms));
}

TEST(MaxRelevantWorld, MembersAreUnited) {
    auto kb = parse_kb("p(a)\np(b)\nq(X) :- p(X). w=1");
    auto gkb = ground_fixpoint_prov(kb);
    SummaryGraph s;
    s.members = {HypGraph{{ga("p", {"a"})}, {}}, HypGraph{{ga("p", {"b"})}, {}}};
    s.merged = HypGraph{{ga("p", {"a"}), ga("p", {"b"})}, {}};
    EXPECT_EQ(max_relevant_world(s, gkb),
              world({ga("p", {"a"}), ga("p", {"b"}), ga("q", {"a"}), ga("q", {"b"})}));
}

TEST(Likelihood, Arithmetic) {
    Hypothesis h;
    h.error = 0.2;
    h.score = 0.9;
    EXPECT_NEAR(h.likelihood(), 0.72, 1e-15);
    Hypothesis g;
    g.error = 0.1;
    g.score = 0.9;
    std::vector<Hypothesis> both{h, g};
    EXPECT_NEAR(match_likelihood(both), 0.81, 1e-15);
    EXPECT_EQ(match_likelihood(std::vector<Hypothesis>{Hypothesis{}}), 1.0);
}

TEST(RankCandidates, SingleFact) {
    auto r = rank_text("p(a) @ w=0.8", "answer(X) :- p(X).");
    ASSERT_EQ(r.ranked.size(), 1u);
    const auto& ra = r.ranked[0];
    ASSERT_EQ(ra.universe.size(), 1u);
    EXPECT_EQ(ra.universe[0].world, world({ga("p", {"a"})}));
    EXPECT_EQ(ra.universe[0].likelihood, 1.0);
    EXPECT_NEAR(ra.probability, 0.8, 1e-15);
}

TEST(RankCandidates, Tweety) {
    // 16-world enumeration, computed independently of this code base.
    auto r = rank_text(pkb::testing::tweety_text(), "answer(X) :- bird(X).");
    ASSERT_EQ(r.ranked.size(), 1u);
    const auto& ra = r.ranked[0];
    EXPECT_EQ(ra.candidate, ga("answer", {"tweety"}));
    ASSERT_EQ(ra.universe.size(), 1u);
    EXPECT_EQ(ra.universe[0].world, world({ga("bird", {"tweety"}), ga("flies", {"tweety"})}));
    EXPECT_NEAR(ra.probability, 0.2022561363952719, 1e-12);
}

TEST(RankCandidates, InconsistentHypothesesNeverAppear) {
    auto r = rank_text(pkb::testing::tweety_text(), "answer(X) :- flies(X), notflies(X).");
    EXPECT_TRUE(r.ranked.empty());
}

TEST(RankCandidates, SortedByProbabilityThenCandidate) {
    auto r = rank_text("p(a) @ w=0.4\np(b) @ w=0.9\np(c) @ w=0.4", "answer(X) :- p(X).");
    ASSERT_EQ(r.ranked.size(), 3u);
    EXPECT_EQ(r.ranked[0].candidate, ga("answer", {"b"}));
    EXPECT_EQ(r.ranked[1].candidate, ga("answer", {"a"}));
    EXPECT_EQ(r.ranked[2].candidate, ga("answer", {"c"}));
}

// ---------------------------------------------------------------------------
// Properties

TEST(WorldProperties, Normalization) {
    pkb::testing::Generator gen(61);
    for (std::size_t n : {0u, 1u, 3u, 8u, 12u, 17u, 22u}) {
        auto fg = gen.factor_graph(n, n / 2 + gen.below(n + 1));
        double total = 0.0;
        for (double p : world_probabilities(fg)) total += p;
        EXPECT_NEAR(total, 1.0, 1e-9) << n << " atoms";
    }
}

TEST(WorldProperties, MatchesOracleEnumeration) {
    pkb::testing::Generator gen(62);
    for (int i = 0; i < 60; ++i) {
        auto fg = gen.factor_graph(gen.below(11), gen.below(8));
        for (const auto& [w, p] : oracle::enumerate_worlds(fg)) EXPECT_NEAR(world_probability(fg, w), p, 1e-12);
    }
}

TEST(WorldProperties, ContradictionLimit) {
    double previous = 1.0;
    for (double tf : {10.0, 20.0, 30.0}) {
        double p = world_probability(contradiction_graph(0.0, 0.0, RuleWeight::soft(tf)), world({A, B}));
        EXPECT_LT(p, previous);
        EXPECT_LT(p, std::exp(-tf + 2.0));
        EXPECT_NEAR(p, closed_form(0.0, 0.0, tf), 1e-12);
        previous = p;
    }
    EXPECT_EQ(world_probability(contradiction_graph(0.0, 0.0, RuleWeight::hard()), world({A, B})), 0.0);
}

TEST(WorldProperties, ClosedFormAgreement) {
    pkb::testing::Generator gen(63);
    for (int i = 0; i < 100; ++i) {
        double ta = gen.real(-5, 5), tb = gen.real(-5, 5), tf = gen.real(0, 10);
        double p = world_probability(contradiction_graph(ta, tb, RuleWeight::soft(tf)), world({A, B}));
        EXPECT_NEAR(p, closed_form(ta, tb, tf), 1e-12) << ta << " " << tb << " " << tf;
    }
}

TEST(WorldProperties, HardEqualsSoftLimit) {
    pkb::testing::Generator gen(64);
    int with_hard = 0;
    for (int i = 0; i < 60; ++i) {
        auto fg = gen.factor_graph(1 + gen.below(10), 1 + gen.below(6));
        FactorGraph soft;
        for (const auto& f : fg.factors())
            if (f.kind == Factor::Kind::atom) soft.add_atom(f.scope.front(), f.theta);
        for (const auto& f : fg.factors()) {
            if (f.kind != Factor::Kind::rule) continue;
            with_hard += f.hard;
            std::vector<GroundAtom> body;
            for (auto b : f.body) body.push_back(fg.atoms()[b]);
            std::optional<GroundAtom> head;
            if (f.head) head = fg.atoms()[*f.head];
            soft.add_rule(body, head, f.hard ? RuleWeight::soft(50.0) : RuleWeight::soft(f.theta));
        }
        auto ph = world_probabilities(fg), ps = world_probabilities(soft);
        double tv = 0.0;
        for (std::size_t m = 0; m < ph.size(); ++m) tv += std::abs(ph[m] - ps[m]);
        EXPECT_LT(tv / 2.0, 1e-15);
    }
    EXPECT_GT(with_hard, 0);
}

TEST(WorldProperties, ScopedPriorEqualsOracleMarginal) {
    pkb::testing::Generator gen(65);
    for (int i = 0; i < 60; ++i) {
        auto fg = gen.factor_graph(1 + gen.below(10), gen.below(5));
        std::set<GroundAtom> seeds{fg.atoms()[gen.below(fg.size())]};
        auto scope = relevant_scope(fg, seeds);
        World w;
        for (const auto& a : scope)
            if (gen.chance(0.5)) w.true_atoms.insert(a);
        EXPECT_NEAR(scoped_probability(fg, w, scope), oracle::marginal(fg, w, scope), 1e-12);
    }
}

TEST(WorldProperties, RankIsBoundedAndSumsItsUniverse) {
    pkb::testing::Generator gen(66);
    int ranked = 0;
    for (int i = 0; i < 120; ++i) {
        auto kb = gen.kb();
        auto q = gen.query(kb);
        for (bool approx : {false, true}) {
            Ranking r;
            try {
                r = rank(kb, q, EngineConfig{}, approx);
            } catch (const CapExceeded&) {
                continue;
            }
            for (const auto& ra : r.ranked) {
                ++ranked;
                double total = 0.0;
                for (const auto& uw : ra.universe) total += uw.likelihood * uw.prior;
                EXPECT_GE(ra.probability, 0.0);
                EXPECT_LE(ra.probability, 1.0);
                EXPECT_NEAR(ra.probability, std::min(total, 1.0), 1e-12);
            }
        }
    }
    EXPECT_GT(ranked, 50);
}

TEST(WorldProperties, OraclePriorsAgree) {
    pkb::testing::Generator gen(67);
    for (int i = 0; i < 80; ++i) {
        auto kb = gen.kb(pkb::testing::KbShape{6, 4, 3, 0.3});
        auto q = gen.query(kb);
        Ranking fast, slow;
        try {
            fast = rank(kb, q, EngineConfig{}, false);
            slow = rank(kb, q, EngineConfig{}, false, true);
        } catch (const std::exception&) {
            continue; // over the oracle's 16-atom limit
        }
        ASSERT_EQ(fast.ranked.size(), slow.ranked.size());
        for (std::size_t k = 0; k < fast.ranked.size(); ++k) {
            EXPECT_EQ(fast.ranked[k].candidate, slow.ranked[k].candidate);
            EXPECT_NEAR(fast.ranked[k].probability, slow.ranked[k].probability, 1e-12);
        }
    }
}

TEST(WorldProperties, IrrelevancePadding) {
    const std::string q = "answer(X) :- bird(X).";
    auto base = rank_text(pkb::testing::tweety_text(), q);
    auto padded = rank_text(pkb::testing::tweety_text() +
                                "city(rome) @ w=0.6 src=atlas\nriver(po) @ w=0.3\nlocated(po, italy) @ w=0.95\n",
                            q);
    ASSERT_EQ(base.ranked.size(), padded.ranked.size());
    for (const auto& ra : base.ranked) EXPECT_NEAR(find(padded, ra.candidate).probability, ra.probability, 1e-12);
}

TEST(WorldProperties, CertainWitnessReachesOne) {
    // Exact match, confidence 1, no rules: the only uncertainty left is the
    // ±30 clamp of the atom weight.
    auto r = rank_text("p(a) @ w=1.0\np(b) @ w=1.0", "answer(X) :- p(X).");
    ASSERT_EQ(r.ranked.size(), 2u);
    for (const auto& ra : r.ranked) EXPECT_NEAR(ra.probability, 1.0, 1e-12);
}
