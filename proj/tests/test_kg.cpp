#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "fewkg/kg.hpp"
#include "fewkg/rng.hpp"
#include "support/oracles.hpp"
#include "support/testutil.hpp"

using namespace fewkg;

TEST_CASE("vocab interning is stable and findable") {
    Vocab v;
    CHECK(v.intern("a") == 0);
    CHECK(v.intern("b") == 1);
    CHECK(v.intern("a") == 0);
    CHECK(v.size() == 2);
    CHECK(v.find("b").value() == 1);
    CHECK_FALSE(v.find("missing").has_value());
    CHECK(v.name(1) == "b");
}

TEST_CASE("entity types come from the second colon field") {
    CHECK(entity_type_of("concept:athlete:jordan") == "athlete");
    CHECK(entity_type_of("a:b") == "b");
    CHECK(entity_type_of("a:b:c:d") == "b");
    CHECK(entity_type_of("nocolon") == "unknown");
    CHECK(entity_type_of("trailing:") == "unknown");
    CHECK(entity_type_of("a::c") == "unknown");
    CHECK(entity_type_of(":x:y") == "x");
}

TEST_CASE("background TSV ingestion counts, dedups, and rejects bad rows") {
    const auto dir = testutil::scratch_dir("kg_tsv");

    SUBCASE("happy path with duplicates, blank lines, CRLF") {
        testutil::write_file(dir / "g.tsv",
                             "a\tr\tb\n"
                             "\n"
                             "b\tr\tc\r\n"
                             "a\tr\tb\n");
        KnowledgeGraph g;
        g.add_background_tsv(dir / "g.tsv");
        CHECK(g.triples.size() == 2);
        CHECK(g.ingest.lines == 3);
        CHECK(g.ingest.triples == 2);
        CHECK(g.ingest.duplicates == 1);
        CHECK(g.entities.size() == 3);
        CHECK(g.relations.size() == 1);
        CHECK(g.has_background_triple(0, 0, 1));
        CHECK_FALSE(g.has_background_triple(1, 0, 0));
    }

    SUBCASE("wrong column counts name the line") {
        testutil::write_file(dir / "bad.tsv", "a\tr\tb\na\tb\n");
        KnowledgeGraph g;
        CHECK_THROWS_WITH_AS(g.add_background_tsv(dir / "bad.tsv"),
                             doctest::Contains(":2: expected 3 tab-separated fields"),
                             std::runtime_error);

        testutil::write_file(dir / "bad4.tsv", "a\tr\tb\tc\n");
        KnowledgeGraph g4;
        CHECK_THROWS_AS(g4.add_background_tsv(dir / "bad4.tsv"), std::runtime_error);
    }

    SUBCASE("missing file") {
        KnowledgeGraph g;
        CHECK_THROWS_WITH_AS(g.add_background_tsv(dir / "nope.tsv"),
                             doctest::Contains("cannot open"), std::runtime_error);
    }
}

TEST_CASE("task JSON ingestion validates structure") {
    const auto dir = testutil::scratch_dir("kg_task");

    SUBCASE("pairs land under their relation, duplicates dropped") {
        testutil::write_file(dir / "t.json",
                             R"({"likes": [["a","likes","b"],["a","likes","b"],["c","likes","a"]],
                                 "knows": [["a","knows","c"]]})");
        KnowledgeGraph g;
        g.add_task_json(dir / "t.json");
        CHECK(g.task_pairs.size() == 2);
        const int likes = g.relations.find("likes").value();
        CHECK(g.task_pairs.at(likes).size() == 2);
        CHECK(g.ingest.duplicates == 1);
        CHECK(g.pairs_of_relation(likes).size() == 2);
        CHECK(g.triples.empty());  // task pairs never join the background
    }

    SUBCASE("relation key and triple relation must agree") {
        testutil::write_file(dir / "bad.json", R"({"likes": [["a","knows","b"]]})");
        KnowledgeGraph g;
        CHECK_THROWS_WITH_AS(g.add_task_json(dir / "bad.json"),
                             doctest::Contains("disagrees with its key"), std::runtime_error);
    }

    SUBCASE("triples must be three strings") {
        testutil::write_file(dir / "bad2.json", R"({"likes": [["a","likes"]]})");
        KnowledgeGraph g;
        CHECK_THROWS_AS(g.add_task_json(dir / "bad2.json"), std::runtime_error);
    }

    SUBCASE("top level must be an object") {
        testutil::write_file(dir / "bad3.json", R"([1,2,3])");
        KnowledgeGraph g;
        CHECK_THROWS_WITH_AS(g.add_task_json(dir / "bad3.json"),
                             doctest::Contains("must be a JSON object"), std::runtime_error);
    }
}

TEST_CASE("degree and adjacency indices") {
    // 0 -> 1, 1 -> 2, and a self-loop on 2
    const auto g = testutil::make_graph(3, {{0, 0, 1}, {1, 0, 2}, {2, 0, 2}});
    CHECK(g.degree(0) == 1);
    CHECK(g.degree(1) == 2);
    CHECK(g.degree(2) == 3);  // one endpoint of 1->2, both ends of the loop

    const auto& adj = g.adjacency();
    REQUIRE(adj[0].size() == 1);
    CHECK(adj[0][0].neighbor == 1);
    CHECK(adj[0][0].outgoing);
    REQUIRE(adj[1].size() == 2);
    CHECK_FALSE(adj[1][0].outgoing);  // 0 -> 1 seen from 1
    CHECK(adj[2].size() == 3);
}

TEST_CASE("canonical TSV round-trips through the parser") {
    const auto dir = testutil::scratch_dir("kg_roundtrip");
    const auto g = testutil::make_graph(4, {{0, 0, 1}, {2, 0, 3}, {1, 0, 2}});
    testutil::write_file(dir / "canon.tsv", g.to_tsv());
    const KnowledgeGraph h = parse_triples(dir / "canon.tsv", TripleFormat::BackgroundTsv);
    CHECK(h.triples == g.triples);
    CHECK(h.entities.names == g.entities.names);
    CHECK(h.to_tsv() == g.to_tsv());
}

TEST_CASE("largest connected component: hand cases") {
    SUBCASE("clear winner") {
        // component {0,1,2} beats {3,4}; 5 isolated
        const auto g = testutil::make_edge_graph(6, {{0, 1}, {1, 2}, {3, 4}});
        CHECK(largest_connected_component(g) == std::vector<int>{0, 1, 2});
    }
    SUBCASE("tie goes to the smaller minimum id") {
        const auto g = testutil::make_edge_graph(4, {{2, 3}, {0, 1}});
        CHECK(largest_connected_component(g) == std::vector<int>{0, 1});
    }
    SUBCASE("empty graph of isolated entities") {
        const auto g = testutil::make_edge_graph(3, {});
        CHECK(largest_connected_component(g) == std::vector<int>{0});
    }
}

TEST_CASE("largest connected component matches BFS oracle on random graphs") {
    for (uint64_t seed = 0; seed < 50; ++seed) {
        Rng rng(derive_seed(seed, "lcc_fuzz"));
        const int n = 2 + static_cast<int>(rng.next_below(29));
        const int m = static_cast<int>(rng.next_below(static_cast<size_t>(2 * n)));
        std::vector<std::pair<int, int>> edges;
        for (int e = 0; e < m; ++e)
            edges.emplace_back(static_cast<int>(rng.next_below(static_cast<size_t>(n))),
                               static_cast<int>(rng.next_below(static_cast<size_t>(n))));
        const auto g = testutil::make_edge_graph(n, edges);
        CAPTURE(seed);
        CHECK(largest_connected_component(g) == oracle::bfs_lcc(g));
    }
}

TEST_CASE("degree statistics") {
    // star: 0 at the center of 1..4, plus chain 5-6 and a duplicate-direction
    // edge to give 1 a degree of 2
    const auto g =
        testutil::make_edge_graph(7, {{0, 1}, {0, 2}, {0, 3}, {0, 4}, {1, 0}, {5, 6}});
    const DegreeStats s = degree_stats(g, 3);
    CHECK(s.max_degree == 5);
    CHECK(s.max_degree_entity == 0);
    // distinct neighbors of 0 are 1..4 out of 7 entities
    CHECK(s.max_degree_fraction == doctest::Approx(4.0 / 7.0));
    // degrees: 0:5, 1:2, 2:1, 3:1, 4:1, 5:1, 6:1 -> sorted 1,1,1,1,1,2,5
    CHECK(s.median_degree == 1);
    REQUIRE(s.top_k.size() == 3);
    CHECK(s.top_k[0] == std::pair<int, int>{0, 5});
    CHECK(s.top_k[1] == std::pair<int, int>{1, 2});
    CHECK(s.top_k[2] == std::pair<int, int>{2, 1});  // degree tie broken by id

    CHECK(degree_stats(g, 100).top_k.size() == 7);
    CHECK_THROWS_AS(degree_stats(g, 0), std::invalid_argument);
}

TEST_CASE("type table mirrors entity names") {
    KnowledgeGraph g;
    g.entities.intern("concept:city:rome");
    g.entities.intern("plain");
    const auto types = EntityTypeTable::from_graph(g);
    CHECK(types.type(0) == "city");
    CHECK(types.type(1) == "unknown");
}

TEST_CASE("ingest log names every count") {
    const auto g = testutil::make_edge_graph(3, {{0, 1}, {1, 2}});
    std::ostringstream os;
    g.log_ingest(os);
    CHECK(os.str().find("entities=3") != std::string::npos);
    CHECK(os.str().find("background_triples=2") != std::string::npos);
}
