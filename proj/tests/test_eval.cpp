#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fewkg/eval.hpp"
#include "fewkg/rng.hpp"
#include "fewkg/util.hpp"
#include "support/oracles.hpp"
#include "support/testutil.hpp"

using namespace fewkg;

namespace {

// Entities sit on a number line (entity i at (i, 0)) and the shared relation
// vector is zero, so with eta = 0 every query scores candidate c at -|head - c|
// and ranks can be read off by hand.
ModelState line_model(int n_entities, const HyperParams& hp) {
    ModelState s = ModelState::init(Variant::SharedEmbed, n_entities, 1, hp, 1);
    for (int i = 0; i < n_entities; ++i) {
        s.entity_embeddings.at(i, 0) = static_cast<double>(i);
        s.entity_embeddings.at(i, 1) = 0.0;
    }
    std::fill(s.shared_relation.begin(), s.shared_relation.end(), 0.0);
    return s;
}

HyperParams line_hp() {
    HyperParams hp;
    hp.d = 2;
    hp.eta = 0.0;
    hp.gamma = 1.0;
    hp.neg_ratio = 1;
    hp.norm = Norm::L2;
    return hp;
}

FewShotTask make_task(int relation, std::vector<Pair> support, std::vector<Pair> queries,
                      std::vector<int> candidates, uint64_t seed = 0) {
    FewShotTask t;
    t.relation = relation;
    t.support = std::move(support);
    t.queries = std::move(queries);
    t.candidates = std::move(candidates);
    t.seed = seed;
    return t;
}

}  // namespace

TEST_CASE("rank counts strictly better scores and earlier ties") {
    // Ties resolve by list position: equal scores before the true index push
    // the rank down, equal scores after it do not.
    const std::vector<double> tied = {3.0, 5.0, 5.0, 2.0, 5.0};
    CHECK(rank_query(tied, 2) == 2);
    CHECK(rank_query(tied, 4) == 3);
    CHECK(rank_query(tied, 0) == 4);
    CHECK(rank_query(tied, 3) == 5);

    const std::vector<double> unique = {0.5, -1.0, 2.0};
    CHECK(rank_query(unique, 2) == 1);
    CHECK(rank_query(unique, 0) == 2);
    CHECK(rank_query(unique, 1) == 3);

    CHECK(rank_query({7.0}, 0) == 1);

    CHECK_THROWS_WITH_AS(rank_query(unique, 3),
                         "rank_query: true index 3 is outside the score list (3)",
                         std::invalid_argument);
    const double nan = std::nan("");
    CHECK_THROWS_WITH_AS(rank_query({1.0, nan, 2.0}, 1),
                         "rank_query: non-finite score for the true candidate",
                         std::runtime_error);
    CHECK_THROWS_WITH_AS(rank_query({1.0, nan, 2.0}, 2),
                         "rank_query: non-finite score at index 1", std::runtime_error);
    const double inf = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(rank_query({1.0, inf}, 0), std::runtime_error);
}

TEST_CASE("rank agrees with the sort-based oracle") {
    Rng rng(derive_seed(97, "rank_fuzz"));
    for (int trial = 0; trial < 300; ++trial) {
        const size_t n = 1 + rng.next_below(12);
        std::vector<double> scores(n);
        // A coarse lattice keeps ties frequent.
        for (double& s : scores) s = 0.5 * (static_cast<double>(rng.next_below(7)) - 3.0);
        const size_t true_index = rng.next_below(n);
        CAPTURE(trial);
        CHECK(rank_query(scores, true_index) == oracle::rank_by_sorting(scores, true_index));
    }
}

TEST_CASE("metrics from ranks by hand") {
    const Metrics m = metrics_from_ranks({3, 3, 2});
    CHECK(m.mrr == doctest::Approx((1.0 / 3 + 1.0 / 3 + 1.0 / 2) / 3).epsilon(1e-15));
    CHECK(m.hits1 == 0.0);
    CHECK(m.hits5 == 1.0);
    CHECK(m.hits10 == 1.0);

    // Cutoff boundaries are inclusive.
    CHECK(metrics_from_ranks({1}).hits1 == 1.0);
    CHECK(metrics_from_ranks({2}).hits1 == 0.0);
    CHECK(metrics_from_ranks({5}).hits5 == 1.0);
    CHECK(metrics_from_ranks({6}).hits5 == 0.0);
    CHECK(metrics_from_ranks({10}).hits10 == 1.0);
    CHECK(metrics_from_ranks({11}).hits10 == 0.0);
    CHECK(metrics_from_ranks({11}).mrr == doctest::Approx(1.0 / 11).epsilon(1e-15));

    CHECK_THROWS_WITH_AS(metrics_from_ranks({}), "metrics_from_ranks: no ranks",
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(metrics_from_ranks({1, 0}), "metrics_from_ranks: rank below 1",
                         std::invalid_argument);
}

TEST_CASE("format_row rounds to three decimals") {
    Metrics m;
    m.mrr = 0.2941;
    m.hits1 = 0.2009;
    m.hits5 = 0.3979;
    m.hits10 = 0.4641;
    CHECK(format_row(m) == "MRR 0.294, Hits@10 0.464, Hits@5 0.398, Hits@1 0.201");
    CHECK(format_row(Metrics{}) == "MRR 0.000, Hits@10 0.000, Hits@5 0.000, Hits@1 0.000");
}

TEST_CASE("evaluate ranks queries for a hand-built line model") {
    const HyperParams hp = line_hp();
    const ModelState s = line_model(6, hp);

    // Head h scores candidate c at -|h - c|, so the true tail h+1 loses to c=h
    // and ties with c=h-1 (which sits earlier in the candidate list).
    const std::vector<FewShotTask> tasks = {
        make_task(0, {{0, 1}}, {{2, 3}, {4, 5}, {0, 1}}, {0, 1, 2, 3, 4, 5})};
    const EvalReport rep = evaluate(s, tasks, hp, 5);

    REQUIRE(rep.per_relation.size() == 1);
    const RelationResult& row = rep.per_relation[0];
    CHECK(row.relation == "0");
    CHECK(row.k == 1);
    CHECK(row.n_queries == 3);
    // Ranks 3, 3, 2.
    CHECK(row.metrics.mrr == doctest::Approx(7.0 / 18).epsilon(1e-15));
    CHECK(row.metrics.hits1 == 0.0);
    CHECK(row.metrics.hits5 == 1.0);
    CHECK(row.metrics.hits10 == 1.0);
    CHECK(rep.aggregate.mrr == doctest::Approx(row.metrics.mrr).epsilon(1e-15));
    CHECK(rep.n_relations == 1);
    CHECK(rep.variant == "shared-embed");
    CHECK(rep.seed == 5);
}

TEST_CASE("evaluate pools tasks of one relation and averages rows across relations") {
    const HyperParams hp = line_hp();
    const ModelState s = line_model(6, hp);

    const std::vector<FewShotTask> tasks = {
        make_task(7, {{0, 1}, {1, 2}}, {{0, 1}}, {0, 1, 2, 3, 4, 5}),
        make_task(3, {{0, 1}}, {{2, 3}}, {0, 1, 2, 3, 4, 5}),
        make_task(7, {{0, 1}}, {{4, 5}}, {0, 1, 2, 3, 4, 5}),
    };

    SUBCASE("rows keyed by first appearance, support size from the first task") {
        const EvalReport rep = evaluate(s, tasks, hp, 5);
        REQUIRE(rep.per_relation.size() == 2);
        CHECK(rep.per_relation[0].relation == "7");
        CHECK(rep.per_relation[0].k == 2);
        CHECK(rep.per_relation[0].n_queries == 2);  // ranks 2 and 3 pooled
        CHECK(rep.per_relation[1].relation == "3");
        CHECK(rep.per_relation[1].n_queries == 1);  // rank 3
        CHECK(rep.per_relation[0].metrics.mrr ==
              doctest::Approx((1.0 / 2 + 1.0 / 3) / 2).epsilon(1e-15));
        CHECK(rep.per_relation[1].metrics.mrr == doctest::Approx(1.0 / 3).epsilon(1e-15));
        const double want =
            (rep.per_relation[0].metrics.mrr + rep.per_relation[1].metrics.mrr) / 2;
        CHECK(rep.aggregate.mrr == doctest::Approx(want).epsilon(1e-15));
        CHECK(rep.n_relations == 2);
    }

    SUBCASE("explicit names label rows; later tasks only pool") {
        const std::vector<std::string> names = {"alpha", "beta", "gamma"};
        const EvalReport rep = evaluate(s, tasks, hp, 5, nullptr, &names);
        REQUIRE(rep.per_relation.size() == 2);
        CHECK(rep.per_relation[0].relation == "alpha");
        CHECK(rep.per_relation[1].relation == "beta");
    }

    SUBCASE("the graph vocabulary names rows when no labels are given") {
        const KnowledgeGraph g = testutil::make_graph(6, {{0, 0, 1}}, 8);
        const EvalReport rep = evaluate(s, tasks, hp, 5, &g);
        REQUIRE(rep.per_relation.size() == 2);
        CHECK(rep.per_relation[0].relation == "r7");
        CHECK(rep.per_relation[1].relation == "r3");
    }
}

TEST_CASE("evaluate is deterministic for a fixed seed") {
    HyperParams hp;
    hp.d = 4;
    hp.d_h = 3;
    hp.eta = 0.5;
    hp.gamma = 1.0;
    hp.neg_ratio = 2;
    const ModelState s = ModelState::init(Variant::MetaR, 6, 1, hp, 3);

    const std::vector<FewShotTask> tasks = {
        make_task(0, {{0, 1}, {2, 3}}, {{1, 4}, {3, 5}}, {0, 1, 2, 3, 4, 5})};
    const EvalReport a = evaluate(s, tasks, hp, 11);
    const EvalReport b = evaluate(s, tasks, hp, 11);
    CHECK(eval_report_json(a) == eval_report_json(b));
    CHECK(a.seed == 11);
}

TEST_CASE("evaluate input validation") {
    const HyperParams hp = line_hp();
    const ModelState s = line_model(4, hp);

    CHECK_THROWS_WITH_AS(evaluate(s, {}, hp, 0), "evaluate: no tasks",
                         std::invalid_argument);

    const std::vector<FewShotTask> one = {make_task(0, {{0, 1}}, {{1, 2}}, {0, 1, 2, 3})};
    const std::vector<std::string> two_names = {"a", "b"};
    CHECK_THROWS_WITH_AS(evaluate(s, one, hp, 0, nullptr, &two_names),
                         "evaluate: 2 names for 1 tasks", std::invalid_argument);

    // The true tail must sit in the (ascending) candidate list, whether it
    // falls past the end or into a gap.
    const std::vector<FewShotTask> past_end = {make_task(0, {{0, 1}}, {{1, 9}}, {0, 1, 2})};
    CHECK_THROWS_WITH_AS(evaluate(s, past_end, hp, 0),
                         "evaluate: true tail 9 missing from the candidate set of relation 0",
                         std::runtime_error);
    const std::vector<FewShotTask> gap = {make_task(0, {{0, 1}}, {{1, 2}}, {0, 1, 3})};
    CHECK_THROWS_WITH_AS(evaluate(s, gap, hp, 0),
                         "evaluate: true tail 2 missing from the candidate set of relation 0",
                         std::runtime_error);
}

TEST_CASE("report serialization carries every field") {
    const HyperParams hp = line_hp();
    const ModelState s = line_model(6, hp);
    const std::vector<FewShotTask> tasks = {
        make_task(0, {{0, 1}}, {{2, 3}, {4, 5}, {0, 1}}, {0, 1, 2, 3, 4, 5})};
    EvalReport rep = evaluate(s, tasks, hp, 5);
    rep.config_hash = 0xdeadbeefULL;
    rep.dataset = "unit";
    rep.checkpoint_id = "ck-1";

    SUBCASE("json") {
        const nlohmann::json j = nlohmann::json::parse(eval_report_json(rep));
        CHECK(j.at("config").get<std::string>() == hex64(0xdeadbeefULL));
        CHECK(j.at("seed").get<uint64_t>() == 5);
        CHECK(j.at("variant").get<std::string>() == "shared-embed");
        CHECK(j.at("dataset").get<std::string>() == "unit");
        CHECK(j.at("checkpoint").get<std::string>() == "ck-1");
        CHECK(j.at("n_relations").get<int>() == 1);
        CHECK(j.at("aggregate").at("mrr").get<double>() ==
              doctest::Approx(rep.aggregate.mrr).epsilon(1e-15));
        CHECK(j.at("aggregate").at("hits@10").get<double>() == 1.0);
        REQUIRE(j.at("per_relation").size() == 1);
        const auto& row = j.at("per_relation").at(0);
        CHECK(row.at("relation").get<std::string>() == "0");
        CHECK(row.at("k").get<int>() == 1);
        CHECK(row.at("n_queries").get<int>() == 3);
        CHECK(row.at("hits@5").get<double>() == 1.0);
    }

    SUBCASE("csv") {
        const RelationResult& row = rep.per_relation[0];
        const std::string want = "# config=" + hex64(0xdeadbeefULL) + " seed=5\n" +
                                 "relation,k,n_queries,mrr,hits@1,hits@5,hits@10\n" +
                                 "0,1,3," + fmt_double(row.metrics.mrr) + "," +
                                 fmt_double(row.metrics.hits1) + "," +
                                 fmt_double(row.metrics.hits5) + "," +
                                 fmt_double(row.metrics.hits10) + "\n";
        CHECK(eval_report_csv(rep) == want);
    }
}

TEST_CASE("probe builds one task per synthetic relation and groups hits by pattern") {
    const HyperParams hp = line_hp();
    const ModelState s = line_model(8, hp);
    const std::vector<int> lcc = {0, 1, 2, 3, 4, 5, 6, 7};

    std::vector<SyntheticRelation> synth(3);
    synth[0] = {"null_sym_0", Pattern::Symmetric, {{0, 1}, {1, 0}, {2, 3}, {3, 2}}, 0, 2, 0};
    synth[1] = {"null_sym_1", Pattern::Symmetric, {{4, 5}, {5, 4}, {6, 7}, {7, 6}}, 0, 2, 0};
    synth[2] = {"null_trans_0",
                Pattern::Transitive,
                {{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}},
                0,
                2,
                0};

    const ProbeReport rep = probe_null_tasks(s, synth, lcc, 1, 42, hp);

    REQUIRE(rep.eval.per_relation.size() == 3);
    CHECK(rep.eval.dataset == "synthetic-null");
    for (size_t i = 0; i < synth.size(); ++i) {
        CHECK(rep.eval.per_relation[i].relation == synth[i].name);
        CHECK(rep.eval.per_relation[i].k == 1);
        // One support draw, everything left becomes a query.
        CHECK(rep.eval.per_relation[i].n_queries ==
              static_cast<int>(synth[i].pairs.size()) - 1);
    }

    REQUIRE(rep.hits10_by_pattern.size() == 2);
    const double sym_mean = (rep.eval.per_relation[0].metrics.hits10 +
                             rep.eval.per_relation[1].metrics.hits10) /
                            2;
    CHECK(rep.hits10_by_pattern.at("symmetric") == doctest::Approx(sym_mean).epsilon(1e-15));
    CHECK(rep.hits10_by_pattern.at("transitive") ==
          doctest::Approx(rep.eval.per_relation[2].metrics.hits10).epsilon(1e-15));

    SUBCASE("repeat runs serialize identically") {
        const ProbeReport again = probe_null_tasks(s, synth, lcc, 1, 42, hp);
        CHECK(probe_report_json(again) == probe_report_json(rep));
    }

    SUBCASE("csv leads with the pattern means") {
        const std::string csv = probe_report_csv(rep);
        CHECK(csv.rfind("# config=", 0) == 0);
        const size_t patterns = csv.find("pattern,hits@10\n");
        const size_t rows = csv.find("relation,k,n_queries,mrr,hits@1,hits@5,hits@10\n");
        REQUIRE(patterns != std::string::npos);
        REQUIRE(rows != std::string::npos);
        CHECK(patterns < rows);
        CHECK(csv.find("null_trans_0,") != std::string::npos);
    }

    SUBCASE("capping keeps every query answerable") {
        const ProbeReport capped = probe_null_tasks(s, synth, lcc, 1, 42, hp, nullptr, 3);
        REQUIRE(capped.eval.per_relation.size() == 3);
        for (size_t i = 0; i < synth.size(); ++i)
            CHECK(capped.eval.per_relation[i].n_queries ==
                  rep.eval.per_relation[i].n_queries);
    }

    CHECK_THROWS_WITH_AS(probe_null_tasks(s, {}, lcc, 1, 42, hp),
                         "probe_null_tasks: no synthetic relations", std::invalid_argument);
}

TEST_CASE("pearson hand values and failure modes") {
    CHECK(pearson({1, 2, 3, 4}, {2, 4, 6, 8}) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(pearson({1, 2, 3, 4}, {8, 6, 4, 2}) == doctest::Approx(-1.0).epsilon(1e-12));
    // Centered: dx = {-1,0,1}, dy = {-1,1,0}; r = 1 / sqrt(2*2).
    CHECK(pearson({1, 2, 3}, {1, 3, 2}) == doctest::Approx(0.5).epsilon(1e-12));

    CHECK_THROWS_WITH_AS(pearson({1, 2}, {1, 2, 3}), "pearson: length mismatch (2 vs 3)",
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(pearson({1}, {2}), "pearson: needs at least two points",
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(pearson({1, 1, 1}, {1, 2, 3}),
                         "pearson: correlation undefined for a constant sequence",
                         std::runtime_error);
    CHECK_THROWS_WITH_AS(pearson({1, 2, 3}, {4, 4, 4}),
                         "pearson: correlation undefined for a constant sequence",
                         std::runtime_error);
}

TEST_CASE("log frequency feature is the mean of log1p") {
    CHECK(log_frequency_feature({0, 0, 0}) == 0.0);
    CHECK(log_frequency_feature({std::exp(1.0) - 1.0}) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(log_frequency_feature({1, 3}) ==
          doctest::Approx((std::log1p(1.0) + std::log1p(3.0)) / 2).epsilon(1e-15));

    CHECK_THROWS_WITH_AS(log_frequency_feature({}), "log_frequency_feature: no degrees",
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(log_frequency_feature({1, -0.5}),
                         "log_frequency_feature: negative degree", std::invalid_argument);
}

TEST_CASE("support frequency feature reads background degrees") {
    // Degrees: 0 -> 3, 1 -> 2, 2 -> 2, 3 -> 1, 4 -> 0.
    const KnowledgeGraph g =
        testutil::make_edge_graph(5, {{0, 1}, {0, 2}, {0, 3}, {1, 2}});

    FewShotTask task = make_task(0, {{0, 4}, {3, 1}}, {}, {});
    CHECK(support_frequency_feature(g, task) ==
          doctest::Approx(log_frequency_feature({3, 0, 1, 2})).epsilon(1e-15));

    // A self-looping support pair counts its entity once as head, once as tail.
    FewShotTask loop = make_task(0, {{2, 2}}, {}, {});
    CHECK(support_frequency_feature(g, loop) ==
          doctest::Approx(std::log1p(2.0)).epsilon(1e-15));

    FewShotTask empty = make_task(0, {}, {}, {});
    CHECK_THROWS_WITH_AS(support_frequency_feature(g, empty),
                         "support_frequency_feature: empty support", std::invalid_argument);
}

TEST_CASE("correlate wires points into pearson and the serializers") {
    std::vector<CorrelationPoint> pts(3);
    pts[0] = {"a", 1.0, 2.0};
    pts[1] = {"b", 2.0, 4.0};
    pts[2] = {"c", 3.0, 6.0};

    CorrelationReport rep = correlate(pts);
    CHECK(rep.r == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rep.n == 3);
    REQUIRE(rep.points.size() == 3);
    CHECK(rep.points[1].relation == "b");

    rep.config_hash = 0x1234ULL;
    rep.seed = 9;
    const std::string want = "# config=" + hex64(0x1234ULL) + " seed=9\n" +
                             "relation,support_log_freq,mrr\n" + "a," + fmt_double(1.0) +
                             "," + fmt_double(2.0) + "\n" + "b," + fmt_double(2.0) + "," +
                             fmt_double(4.0) + "\n" + "c," + fmt_double(3.0) + "," +
                             fmt_double(6.0) + "\n";
    CHECK(correlation_csv(rep) == want);

    const nlohmann::json j = nlohmann::json::parse(correlation_json(rep));
    CHECK(j.at("config").get<std::string>() == hex64(0x1234ULL));
    CHECK(j.at("seed").get<uint64_t>() == 9);
    CHECK(j.at("r").get<double>() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(j.at("n").get<int>() == 3);
    REQUIRE(j.at("points").size() == 3);
    CHECK(j.at("points").at(1).at("relation").get<std::string>() == "b");
    CHECK(j.at("points").at(1).at("support_log_freq").get<double>() == 2.0);
    CHECK(j.at("points").at(1).at("mrr").get<double>() == 4.0);

    CHECK_THROWS_AS(correlate({pts[0]}), std::invalid_argument);
}

TEST_CASE("witness checks find the first qualifying triples") {
    SUBCASE("symmetry needs a genuine reversed pair") {
        const WitnessVerdict hit = witness_check({{1, 2}, {2, 1}}, Pattern::Symmetric);
        CHECK(hit.witnessed);
        CHECK(hit.witnessing_triples == std::vector<Pair>{{1, 2}, {2, 1}});

        CHECK_FALSE(witness_check({{1, 2}, {3, 1}}, Pattern::Symmetric).witnessed);
        CHECK_FALSE(witness_check({}, Pattern::Symmetric).witnessed);

        // A self-loop is its own reversal and must not count.
        CHECK_FALSE(witness_check({{5, 5}}, Pattern::Symmetric).witnessed);
        const WitnessVerdict skip =
            witness_check({{5, 5}, {1, 2}, {2, 1}}, Pattern::Symmetric);
        CHECK(skip.witnessed);
        CHECK(skip.witnessing_triples == std::vector<Pair>{{1, 2}, {2, 1}});

        // The first pair in support order whose reversal exists wins.
        const WitnessVerdict first =
            witness_check({{3, 4}, {1, 2}, {2, 1}, {4, 3}}, Pattern::Symmetric);
        CHECK(first.witnessing_triples == std::vector<Pair>{{3, 4}, {4, 3}});
    }

    SUBCASE("transitivity needs a literal composed edge over distinct entities") {
        const WitnessVerdict hit =
            witness_check({{9, 9}, {0, 1}, {1, 2}, {0, 2}}, Pattern::Transitive);
        CHECK(hit.witnessed);
        CHECK(hit.witnessing_triples == std::vector<Pair>{{0, 1}, {1, 2}, {0, 2}});

        CHECK_FALSE(witness_check({{1, 2}, {2, 3}}, Pattern::Transitive).witnessed);
        CHECK_FALSE(witness_check({}, Pattern::Transitive).witnessed);
        // A 2-cycle composes back onto its own start and is not a witness,
        // even with the self-loop edge present.
        CHECK_FALSE(witness_check({{1, 2}, {2, 1}}, Pattern::Transitive).witnessed);
        CHECK_FALSE(witness_check({{1, 2}, {2, 1}, {1, 1}}, Pattern::Transitive).witnessed);
    }

    SUBCASE("positional structure is not witnessable") {
        CHECK_THROWS_WITH_AS(
            witness_check({{0, 1}}, Pattern::Positional),
            "witness_check: positional structure is not witnessable from a support set",
            std::invalid_argument);
    }
}

TEST_CASE("minimum witnessable support sizes") {
    CHECK(min_witness_k(Pattern::Symmetric) == 2);
    CHECK(min_witness_k(Pattern::Transitive) == 3);
    CHECK_THROWS_WITH_AS(
        min_witness_k(Pattern::Positional),
        "min_witness_k: positional structure is not witnessable from a support set",
        std::invalid_argument);

    // Supports of exactly the minimum size can witness.
    CHECK(witness_check({{0, 1}, {1, 0}}, Pattern::Symmetric).witnessed);
    CHECK(witness_check({{0, 1}, {1, 2}, {0, 2}}, Pattern::Transitive).witnessed);
}
