#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <sstream>

#include "ohmsim/electrical.hpp"
#include "ohmsim/graph.hpp"
#include "ohmsim/spectral.hpp"

using namespace ohmsim;

namespace {

WeightedGraph triangle() {
    WeightedGraph g(3);
    g.add_edge(0, 1, 1.0);
    g.add_edge(1, 2, 1.0);
    g.add_edge(2, 0, 1.0);
    return g;
}

}  // namespace

TEST_CASE("construction rejects bad input") {
    WeightedGraph g(3);
    CHECK_THROWS_AS(g.add_edge(0, 0, 1.0), GraphError);
    CHECK_THROWS_AS(g.add_edge(0, 1, 0.0), GraphError);
    CHECK_THROWS_AS(g.add_edge(0, 1, -2.0), GraphError);
    CHECK_THROWS_AS(g.add_edge(0, 5, 1.0), GraphError);
}

TEST_CASE("incidence lists are consistent with edge records") {
    WeightedGraph g = random_connected_graph(9, 0.4, 71, 0.5, 3.0);
    for (int v = 0; v < g.vertex_count(); ++v) {
        for (int e : g.incident(v)) {
            const auto& ed = g.edge(e);
            CHECK((ed.head == v || ed.tail == v));
        }
    }
    // every edge appears in exactly the lists of its two endpoints
    std::vector<int> appearances(static_cast<std::size_t>(g.edge_count()), 0);
    for (int v = 0; v < g.vertex_count(); ++v) {
        for (int e : g.incident(v)) appearances[static_cast<std::size_t>(e)]++;
    }
    for (int e = 0; e < g.edge_count(); ++e) CHECK(appearances[static_cast<std::size_t>(e)] == 2);
}

TEST_CASE("parallel edges keep distinct ids") {
    WeightedGraph g(2);
    int e1 = g.add_edge(1, 0, 1.0);
    int e2 = g.add_edge(1, 0, 2.0);
    CHECK(e1 != e2);
    CHECK(g.edge_count() == 2);
    CHECK(g.degree(0) == 2);
}

TEST_CASE("oracle O1 returns the j-th incident edge or the -j sentinel") {
    WeightedGraph g = triangle();
    OracleCounter ctr;
    CHECK(oracle_o1(g, ctr, 0, 1) == g.incident(0)[0]);
    CHECK(oracle_o1(g, ctr, 0, 5) == -5);
    WeightedGraph path = path_graph(2);
    CHECK(oracle_o1(path, ctr, 1, 2) == path.incident(1)[1]);
    CHECK(ctr.o1_calls == 3);
    CHECK_THROWS_AS(oracle_o1(g, ctr, 9, 1), GraphError);
    CHECK_THROWS_AS(oracle_o1(g, ctr, 0, 0), GraphError);
}

TEST_CASE("oracle O2 reports stored orientation") {
    WeightedGraph g(6);
    int e = g.add_edge(2, 5, 1.5);
    OracleCounter ctr;
    CHECK(oracle_o2(g, ctr, e) == std::pair{2, 5});
    CHECK(oracle_o2(g, ctr, e) == std::pair{2, 5});
    CHECK(ctr.o2_calls == 2);
    CHECK_THROWS_AS(oracle_o2(g, ctr, 3), GraphError);

    // augmenting edge 0 has head s, tail t
    WeightedGraph base(8);
    base.add_edge(3, 7, 1.0);
    AugmentedGraph ag(base, 3, 7);
    CHECK(ag.oracle_o2(ctr, 0) == std::pair{3, 7});
}

TEST_CASE("oracle O3 returns weights") {
    WeightedGraph g(2);
    int e = g.add_edge(1, 0, 1.0);
    OracleCounter ctr;
    CHECK(oracle_o3(g, ctr, e) == 1.0);
    CHECK_THROWS_AS(oracle_o3(g, ctr, 2), GraphError);

    RescaledGraph r = rescale_weights(random_connected_graph(8, 0.5, 3, 0.25, 4.0));
    int d = r.graph.max_degree();
    double c = r.graph.weight_ratio();
    for (int k = 0; k < r.graph.edge_count(); ++k) {
        double w = oracle_o3(r.graph, ctr, k);
        CHECK(w >= 1.0 / (d * c) - 1e-12);
        CHECK(w <= 1.0 / d + 1e-12);
    }
}

TEST_CASE("augmented graph invariants") {
    WeightedGraph base = triangle();
    AugmentedGraph ag(base, 0, 1);
    CHECK(ag.weight(0) == 1.0);
    CHECK(ag.endpoints(0) == std::pair{0, 1});
    CHECK(ag.edge_count() == 4);
    CHECK(ag.degree(0) == 3);
    CHECK(ag.degree(2) == 2);
    CHECK(ag.weighted_degree(0) == Catch::Approx(3.0));
    CHECK_THROWS_AS(AugmentedGraph(base, 1, 1), GraphError);
}

TEST_CASE("edge list round-trip is bit-exact") {
    WeightedGraph g = random_connected_graph(11, 0.35, 1234, 0.1, 7.0);
    std::string text = to_edge_list(g);
    WeightedGraph h = parse_edge_list(text);
    CHECK(to_edge_list(h) == text);
    CHECK(h.vertex_count() == g.vertex_count());
    CHECK(h.edge_count() == g.edge_count());
    for (int e = 0; e < g.edge_count(); ++e) {
        CHECK(h.edge(e).head == g.edge(e).head);
        CHECK(h.edge(e).tail == g.edge(e).tail);
        CHECK(h.edge(e).weight == g.edge(e).weight);  // exact: 17 significant digits
    }
}

TEST_CASE("edge list parser accepts comments and rejects corruption") {
    WeightedGraph g = parse_edge_list("# a triangle\n3 3\n0 1 1.0\n# middle comment\n1 2 1.0\n2 0 1.0\n");
    CHECK(g.edge_count() == 3);
    CHECK_THROWS_AS(parse_edge_list("2 1\n0 1 -3.0\n"), GraphError);
    CHECK_THROWS_AS(parse_edge_list("2 2\n0 1 1.0\n"), GraphError);
    CHECK_THROWS_AS(parse_edge_list("garbled\n"), GraphError);
}

TEST_CASE("parity gadget structure") {
    for (const std::string& bits : {"11010", "0", "1", "0110"}) {
        GadgetGraph gg = parity_gadget(bits);
        int n = static_cast<int>(bits.size());
        CHECK(gg.graph.vertex_count() == 10 * n + 2);
        CHECK(gg.graph.edge_count() == 10 * n + 2);
        CHECK(gg.graph.max_degree() == 3);
        CHECK(gg.graph.connected());
        for (int e = 0; e < gg.graph.edge_count(); ++e) CHECK(gg.graph.edge(e).weight == 1.0);
        CHECK(gg.s != gg.t);
    }
    CHECK(parity_gadget("11010").graph.vertex_count() == 52);
    CHECK_THROWS_AS(parity_gadget(""), GraphError);
    CHECK_THROWS_AS(parity_gadget("012"), GraphError);
}

TEST_CASE("parity gadget resistance separation") {
    // parity 0: R <= n, parity 1: R >= 4n (exact oracle)
    for (const std::string& bits : {"0", "1", "00", "11", "10", "110", "101", "1001"}) {
        GadgetGraph gg = parity_gadget(bits);
        double r = effective_resistance(gg.graph, gg.s, gg.t);
        double n = static_cast<double>(bits.size());
        if (parity_of(bits) == 0) {
            CHECK(r <= n + 1e-9);
        } else {
            CHECK(r >= 4.0 * n - 1e-9);
        }
    }
}

TEST_CASE("generators produce the advertised shapes") {
    CHECK(path_graph(3).vertex_count() == 4);
    CHECK(cycle_graph(5).edge_count() == 5);
    CHECK(complete_graph(4).edge_count() == 6);
    CHECK(grid_graph(2, 3).vertex_count() == 6);
    CHECK(grid_graph(2, 3).edge_count() == 7);
    CHECK(parallel_graph(3).edge_count() == 3);
    WeightedGraph r = random_connected_graph(12, 0.3, 99);
    CHECK(r.connected());
    CHECK(r.vertex_count() == 12);
}
