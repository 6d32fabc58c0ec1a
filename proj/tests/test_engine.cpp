#include <cmath>
#include <map>

#include <gtest/gtest.h>

#include "swarmnas/completion.hpp"
#include "swarmnas/engine.hpp"
#include "swarmnas/landscape.hpp"
#include "test_support.hpp"

using namespace swarmnas;
using namespace swarmnas::testing;
using K = LayerKind;

namespace {

class ConstantEvaluator : public Evaluator {
public:
    explicit ConstantEvaluator(double accuracy) : accuracy_(accuracy) {}
    Metrics evaluate(const ArchitectureDescriptor&, const ReuseHint& hint) override {
        ++calls;
        hints.push_back(hint);
        Metrics m{accuracy_};
        m.reused_prefix_len = hint.prefix_len + 3;  // over-reports on purpose
        return m;
    }
    std::size_t calls = 0;
    std::vector<ReuseHint> hints;

private:
    double accuracy_;
};

class FailingEvaluator : public Evaluator {
public:
    Metrics evaluate(const ArchitectureDescriptor&, const ReuseHint&) override {
        ++calls;
        throw EvaluationError("OOM", "out of memory");
    }
    std::size_t calls = 0;
};

RunConfig small_config(std::uint64_t seed = 1) {
    RunConfig c;
    c.seed = seed;
    c.landscape.seed = seed;
    c.landscape.target = c.resolved_landscape().target;
    return c;
}

}  // namespace

TEST(CompletePath, AppendsFlattenAndOutput) {
    const auto d = complete_path(arch({input(), conv(32, 3)}), default_space());
    EXPECT_EQ(d, arch({input(), conv(32, 3), flatten(), output()}));
}

TEST(CompletePath, OnlyOutputMissing) {
    EXPECT_EQ(complete_path(arch({input(), flatten(), dense(64)}), default_space()),
              arch({input(), flatten(), dense(64), output()}));
    EXPECT_EQ(complete_path(arch({input(), flatten(), dropout(0.5)}), default_space()),
              arch({input(), flatten(), dropout(0.5), output()}));
}

TEST(CompletePath, CompleteIsUnchanged) {
    const auto d = arch({input(), pool(), flatten(), dense(128), output()});
    EXPECT_EQ(complete_path(d, default_space()), d);
    EXPECT_EQ(complete_path(complete_path(arch({input(), batch_norm()}), default_space()), default_space()),
              complete_path(arch({input(), batch_norm()}), default_space()));
}

TEST(CompletePath, ResultsAlwaysValid) {
    for (const auto& d : enumerate_descriptors(default_space(), 3)) ASSERT_TRUE(validate(d, default_space()));
    EXPECT_THROW(complete_path(arch({conv(16, 1)}), default_space()), std::invalid_argument);
}

TEST(GeneratePath, DepthOneTourIsValid) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        PheromoneGraph g(default_space(), 0.1);
        RandomSource rng(seed);
        const Tour t = generate_path(g, {}, rng);
        EXPECT_EQ(t.walk_length(), 1u);
        EXPECT_EQ(t.nodes.size(), 2u);
        EXPECT_TRUE(validate(t.descriptor, default_space()).valid());
        EXPECT_EQ(t.descriptor.layers.front().kind, K::Input);
        EXPECT_EQ(t.descriptor.layers.back().kind, K::Output);
    }
}

TEST(GeneratePath, GreedyOnUniformGraphTakesFirstListed) {
    PheromoneGraph g(default_space(), 0.1);
    g.increase_depth();
    g.increase_depth();
    RandomSource rng(123);
    const Tour t = generate_path(g, {1.0, 1.0}, rng);
    EXPECT_EQ(t.descriptor, arch({input(), conv(16, 1), conv(16, 1), conv(16, 1), flatten(), output()}));
    // one branch draw per node and per attribute, no wheel draws
    EXPECT_EQ(rng.draws(), 3u * 3u);
}

TEST(GeneratePath, GreedyFollowsStrongestPheromone) {
    PheromoneGraph g(default_space(), 0.1);
    const auto n = g.expand_neighbours(g.input_node(), false);
    g.set_edge_pheromone(n[3].edge, 0.5);          // Dropout
    g.set_option_pheromone(n[3].node, 0, 2, 0.9);  // rate 0.5
    RandomSource rng(0);
    const Tour t = generate_path(g, {1.0, 1.0}, rng);
    EXPECT_EQ(t.descriptor, arch({input(), dropout(0.5), flatten(), output()}));
    EXPECT_EQ(t.choices[1], (std::vector<std::size_t>{2}));
}

TEST(GeneratePath, SameSeedSameTour) {
    PheromoneGraph a(default_space(), 0.1), b(default_space(), 0.1);
    for (int i = 0; i < 3; ++i) {
        a.increase_depth();
        b.increase_depth();
    }
    RandomSource ra(77), rb(77);
    for (int i = 0; i < 20; ++i) {
        const Tour x = generate_path(a, {0.3, 1.0}, ra);
        const Tour y = generate_path(b, {0.3, 1.0}, rb);
        ASSERT_EQ(x.descriptor, y.descriptor);
        ASSERT_EQ(x.edges, y.edges);
        ASSERT_EQ(x.choices, y.choices);
        ASSERT_EQ(x.rng_trace, y.rng_trace);
    }
}

TEST(GenerateAnts, SingleAntLocalUpdatesItsEdgeOnce) {
    PheromoneGraph g(default_space(), 1.0);  // graph starts above the config's tau0
    RunConfig c = small_config();
    c.ant_count = 1;
    c.pheromone.rho = 0.5;
    c.pheromone.tau0 = 0.1;
    ConstantEvaluator eval(0.5);
    RandomSource rng(4);
    WeightCache cache;
    const auto ants = generate_ants(g, c, rng, eval, cache);
    ASSERT_EQ(ants.size(), 1u);
    EXPECT_EQ(eval.calls, 1u);
    EXPECT_EQ(g.edge(ants[0].edges[0]).pheromone, 0.55);
    for (std::size_t e = 0; e < g.edge_count(); ++e) {
        if (e != ants[0].edges[0]) EXPECT_EQ(g.edge(e).pheromone, 1.0);
    }
}

TEST(GenerateAnts, SharedPrefixesDecayOncePerAnt) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        PheromoneGraph g(default_space(), 1.0);
        g.increase_depth();
        g.increase_depth();
        RunConfig c = small_config();
        c.ant_count = 4;
        c.pheromone.rho = 0.5;
        c.pheromone.tau0 = 0.1;
        c.selection.greediness = 0.2;
        ConstantEvaluator eval(0.5);
        RandomSource rng(seed);
        WeightCache cache;
        const auto ants = generate_ants(g, c, rng, eval, cache);
        ASSERT_EQ(ants.size(), 4u);
        std::map<EdgeId, int> uses;
        std::map<std::tuple<NodeId, std::size_t, std::size_t>, int> picks;
        for (const auto& t : ants) {
            for (EdgeId e : t.edges) ++uses[e];
            for (std::size_t k = 0; k < t.nodes.size(); ++k) {
                for (std::size_t a = 0; a < t.choices[k].size(); ++a) ++picks[{t.nodes[k], a, t.choices[k][a]}];
            }
        }
        for (std::size_t e = 0; e < g.edge_count(); ++e) {
            const int k = uses.contains(e) ? uses[e] : 0;
            EXPECT_NEAR(g.edge(e).pheromone, 0.1 + 0.9 * std::pow(0.5, k), 1e-15);
        }
        for (const auto& [key, k] : picks) {
            const auto& [n, a, o] = key;
            EXPECT_NEAR(g.node(n).attributes[a].pheromone[o], 0.1 + 0.9 * std::pow(0.5, k), 1e-15);
        }
    }
}

TEST(GenerateAnts, FailuresScoreZeroAndContinue) {
    PheromoneGraph g(default_space(), 0.1);
    RunConfig c = small_config();
    c.ant_count = 4;
    FailingEvaluator eval;
    RandomSource rng(2);
    WeightCache cache;
    const auto ants = generate_ants(g, c, rng, eval, cache);
    ASSERT_EQ(ants.size(), 4u);
    EXPECT_EQ(eval.calls, 4u);
    for (const auto& t : ants) {
        EXPECT_EQ(t.score(), 0.0);
        ASSERT_TRUE(t.failure.has_value());
        EXPECT_EQ(*t.failure, "OOM: out of memory");
    }
    EXPECT_TRUE(cache.empty());
}

TEST(GenerateAnts, OutOfRangeAccuracyIsAFailure) {
    PheromoneGraph g(default_space(), 0.1);
    RunConfig c = small_config();
    c.ant_count = 2;
    ConstantEvaluator eval(1.7);
    RandomSource rng(2);
    WeightCache cache;
    for (const auto& t : generate_ants(g, c, rng, eval, cache)) {
        EXPECT_EQ(t.score(), 0.0);
        EXPECT_TRUE(t.failure.has_value());
    }
    EXPECT_TRUE(cache.empty());
}

TEST(GenerateAnts, ReportedReuseClampedToHint) {
    PheromoneGraph g(default_space(), 0.1);
    RunConfig c = small_config();
    c.ant_count = 8;
    ConstantEvaluator eval(0.5);
    RandomSource rng(2);
    WeightCache cache;
    const auto ants = generate_ants(g, c, rng, eval, cache);
    for (std::size_t i = 0; i < ants.size(); ++i) {
        EXPECT_EQ(ants[i].metrics->reused_prefix_len, eval.hints[i].prefix_len);
        EXPECT_LE(ants[i].metrics->reused_prefix_len, ants[i].descriptor.layers.size());
    }
    // the first ant finds an empty cache; later ones share at least Input
    EXPECT_EQ(eval.hints[0].prefix_len, 0u);
    for (std::size_t i = 1; i < ants.size(); ++i) EXPECT_GE(eval.hints[i].prefix_len, 1u);
}

TEST(FindBest, Examples) {
    auto tours = [](std::vector<double> scores) {
        std::vector<Tour> out;
        for (double s : scores) {
            Tour t;
            t.metrics = Metrics{s};
            out.push_back(t);
        }
        return out;
    };
    EXPECT_EQ(find_best(tours({0.3, 0.9, 0.5})), 1u);
    EXPECT_EQ(find_best(tours({0.7, 0.7})), 0u);
    EXPECT_EQ(find_best(tours({0.2})), 0u);
    EXPECT_THROW(find_best(std::vector<Tour>{}), std::invalid_argument);
}

TEST(Search, OneRoundTwoAnts) {
    RunConfig c = small_config(5);
    c.ant_count = 2;
    c.max_depth = 1;
    SyntheticEvaluator eval(c.resolved_landscape());
    const auto result = search(c, eval);
    EXPECT_EQ(eval.calls(), 2u);
    EXPECT_EQ(result.evaluations, 2u);
    EXPECT_EQ(result.rounds, 1u);
    EXPECT_EQ(result.graph.current_max_depth(), 2u);

    // replay the loop by hand: two ants, one global update with the better one
    PheromoneGraph g(default_space(), c.pheromone.tau0);
    RandomSource rng(c.seed);
    SyntheticEvaluator eval2(c.resolved_landscape());
    WeightCache cache;
    auto ants = generate_ants(g, c, rng, eval2, cache, 1);
    const Tour best = ants[find_best(ants)];
    g.global_update(best, c.pheromone.alpha);
    g.increase_depth();
    EXPECT_EQ(g.to_json().dump(), result.graph.to_json().dump());
    EXPECT_EQ(best.descriptor, result.best.descriptor);
}

TEST(Search, EvaluationCountIsAntsTimesRounds) {
    for (std::size_t ants : {1u, 3u, 8u}) {
        for (std::size_t depth : {1u, 2u, 4u}) {
            RunConfig c = small_config();
            c.ant_count = ants;
            c.max_depth = depth;
            ConstantEvaluator eval(0.4);
            const auto r = search(c, eval);
            EXPECT_EQ(eval.calls, ants * depth);
            EXPECT_EQ(r.evaluations, ants * depth);
            EXPECT_EQ(r.best_by_round.size(), depth);
        }
    }
}

TEST(Search, BestSoFarNeverDecreases) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        RunConfig c = small_config(seed);
        c.max_depth = 5;
        c.ant_count = 3;
        c.landscape.noise_sigma = 0.05;
        SyntheticEvaluator eval(c.resolved_landscape());
        const auto r = search(c, eval);
        for (std::size_t i = 1; i < r.best_by_round.size(); ++i) {
            EXPECT_GE(r.best_by_round[i], r.best_by_round[i - 1]);
        }
        EXPECT_EQ(r.best.score(), r.best_by_round.back());
    }
}

TEST(Search, IncumbentKeptOnTies) {
    RunConfig c = small_config();
    c.ant_count = 3;
    c.max_depth = 3;
    ConstantEvaluator eval(0.5);
    const auto r = search(c, eval);
    EXPECT_EQ(r.best.round, 1u);
    EXPECT_EQ(r.best.ant_index, 0u);
}

TEST(Search, NeverBeatsTheBruteForceOptimum) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        RunConfig c = small_config(seed);
        const auto landscape = c.resolved_landscape();
        SyntheticEvaluator eval(landscape);
        const auto r = search(c, eval);
        const auto oracle = brute_force_best(default_space(), c.max_depth, landscape);
        EXPECT_LE(r.best.score(), oracle.score);
    }
}

TEST(Search, SameSeedByteEqualCheckpoint) {
    RunConfig c = small_config(9);
    SyntheticEvaluator e1(c.resolved_landscape()), e2(c.resolved_landscape());
    SearchEngine a(c, e1), b(c, e2);
    a.run();
    b.run();
    EXPECT_EQ(a.checkpoint().dump(), b.checkpoint().dump());
    EXPECT_EQ(a.incumbent()->descriptor, b.incumbent()->descriptor);
}

TEST(Search, ResumeMatchesUninterruptedRun) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        RunConfig c = small_config(seed);
        c.max_depth = 4;
        SyntheticEvaluator e1(c.resolved_landscape());
        SearchEngine full(c, e1);
        full.run();

        for (std::size_t cut = 1; cut < c.max_depth; ++cut) {
            SyntheticEvaluator e2(c.resolved_landscape());
            SearchEngine first(c, e2);
            for (std::size_t i = 0; i < cut; ++i) first.run_round();
            const auto saved = nlohmann::json::parse(first.checkpoint().dump());
            SyntheticEvaluator e3(c.resolved_landscape());
            SearchEngine resumed = SearchEngine::resume(saved, e3);
            EXPECT_EQ(resumed.completed_rounds(), cut);
            resumed.run();
            EXPECT_EQ(resumed.checkpoint().dump(), full.checkpoint().dump()) << "seed " << seed << " cut " << cut;
            EXPECT_EQ(resumed.incumbent()->descriptor, full.incumbent()->descriptor);
        }
    }
}

TEST(Search, ResumeOfFinishedRunIsNoOp) {
    RunConfig c = small_config(3);
    SyntheticEvaluator e1(c.resolved_landscape());
    SearchEngine a(c, e1);
    a.run();
    SyntheticEvaluator e2(c.resolved_landscape());
    SearchEngine b = SearchEngine::resume(a.checkpoint(), e2);
    EXPECT_TRUE(b.finished());
    b.run();
    EXPECT_EQ(e2.calls(), 0u);
    EXPECT_EQ(b.checkpoint().dump(), a.checkpoint().dump());
}

TEST(Search, ResumeRejectsSchemaMismatchAndCorruption) {
    RunConfig c = small_config(3);
    SyntheticEvaluator e(c.resolved_landscape());
    SearchEngine a(c, e);
    a.run_round();
    auto cp = a.checkpoint();
    cp["schema_version"] = 2;
    try {
        SearchEngine::resume(cp, e);
        FAIL() << "schema 2 accepted";
    } catch (const std::invalid_argument& err) {
        EXPECT_NE(std::string(err.what()).find("schema_version"), std::string::npos);
    }
    cp = a.checkpoint();
    cp.erase("rng");
    EXPECT_THROW(SearchEngine::resume(cp, e), std::invalid_argument);
    cp = a.checkpoint();
    cp["round"] = 2;
    EXPECT_THROW(SearchEngine::resume(cp, e), std::invalid_argument);
    cp = a.checkpoint();
    cp["incumbent"]["edges"] = {12345};
    EXPECT_THROW(SearchEngine::resume(cp, e), std::invalid_argument);
}

TEST(Search, CheckpointCarriesNoTiming) {
    RunConfig c = small_config(3);
    SyntheticEvaluator e(c.resolved_landscape());
    SearchEngine a(c, e);
    a.run_round();
    EXPECT_EQ(a.checkpoint().dump().find("wall_ms"), std::string::npos);
    EXPECT_EQ(a.checkpoint().at("schema_version"), kCheckpointSchemaVersion);
}

TEST(Search, ObserverSeesEveryAntAndRound) {
    RunConfig c = small_config(3);
    c.ant_count = 3;
    SyntheticEvaluator e(c.resolved_landscape());
    SearchEngine engine(c, e);
    std::size_t ants = 0, rounds = 0;
    engine.set_observer({[&](const Tour& t) {
                             EXPECT_EQ(t.round, rounds + 1);
                             ++ants;
                         },
                         [&](const SearchEngine& s) { EXPECT_EQ(s.completed_rounds(), ++rounds); }});
    engine.run();
    EXPECT_EQ(ants, 9u);
    EXPECT_EQ(rounds, 3u);
}

TEST(Search, AllFailingEvaluatorStillCompletes) {
    RunConfig c = small_config();
    FailingEvaluator eval;
    const auto r = search(c, eval);
    EXPECT_EQ(eval.calls, c.ant_count * c.max_depth);
    EXPECT_EQ(r.best.score(), 0.0);
}

TEST(Search, RejectsInvalidConfig) {
    RunConfig c = small_config();
    c.selection.greediness = 1.5;
    ConstantEvaluator eval(0.5);
    EXPECT_THROW(SearchEngine(c, eval), ConfigError);
}

TEST(TourJson, RoundTrip) {
    RunConfig c = small_config(3);
    SyntheticEvaluator e(c.resolved_landscape());
    SearchEngine a(c, e);
    a.run();
    Tour t = *a.incumbent();
    t.failure = "x";
    t.metrics->loss = 0.25;
    t.metrics->stored_handle = "w/1";
    const Tour back = tour_from_json(tour_to_json(t));
    EXPECT_EQ(tour_to_json(back), tour_to_json(t));
    EXPECT_EQ(back.descriptor, t.descriptor);
    EXPECT_EQ(back.choices, t.choices);
}
