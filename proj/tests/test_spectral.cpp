#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include "ohmsim/graph.hpp"
#include "ohmsim/spectral.hpp"

using namespace ohmsim;

TEST_CASE("laplacian of a single unit edge") {
    WeightedGraph g(2);
    g.add_edge(0, 1, 1.0);
    Eigen::MatrixXd L = laplacian(g);
    Eigen::MatrixXd expect(2, 2);
    expect << 1, -1, -1, 1;
    CHECK((L - expect).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("triangle laplacian is 2I minus adjacency with zero row sums") {
    WeightedGraph g(3);
    g.add_edge(0, 1, 1.0);
    g.add_edge(1, 2, 1.0);
    g.add_edge(2, 0, 1.0);
    Eigen::MatrixXd L = laplacian(g);
    for (int v = 0; v < 3; ++v) {
        CHECK(L(v, v) == Catch::Approx(2.0));
        CHECK(L.row(v).sum() == Catch::Approx(0.0).margin(1e-14));
    }
}

TEST_CASE("laplacian equals the edge-by-edge accumulation oracle") {
    // independent route: sum_e w_e chi_e chi_e^T
    WeightedGraph g = random_connected_graph(10, 0.4, 2024, 0.2, 5.0);
    int n = g.vertex_count();
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(n, n);
    for (int e = 0; e < g.edge_count(); ++e) {
        const auto& ed = g.edge(e);
        Eigen::VectorXd chi = Eigen::VectorXd::Zero(n);
        chi(ed.head) = 1.0;
        chi(ed.tail) = -1.0;
        acc += ed.weight * chi * chi.transpose();
    }
    CHECK((laplacian(g) - acc).cwiseAbs().maxCoeff() < 1e-12);

    // and L = B W B^T through the explicit matrices
    Eigen::MatrixXd B = incidence_matrix(g);
    Eigen::MatrixXd W = weight_matrix(g);
    CHECK((laplacian(g) - B * W * B.transpose()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("laplacian is PSD with rank n-1 iff connected") {
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        WeightedGraph g = random_connected_graph(8, 0.35, seed, 0.5, 2.0);
        Eigen::VectorXd ev = sym_eigenvalues(laplacian(g));
        CHECK(ev(0) > -1e-10);
        CHECK(std::abs(ev(0)) < 1e-10);
        CHECK(ev(1) > 1e-10);  // connected: single zero eigenvalue
    }
    WeightedGraph disconnected(4);
    disconnected.add_edge(0, 1, 1.0);
    disconnected.add_edge(2, 3, 1.0);
    Eigen::VectorXd ev = sym_eigenvalues(laplacian(disconnected));
    CHECK(std::abs(ev(1)) < 1e-12);
}

TEST_CASE("normalized laplacian of K3 has eigenvalues 0, 3/2, 3/2") {
    WeightedGraph g = complete_graph(3);
    Eigen::VectorXd ev = sym_eigenvalues(normalized_laplacian(g));
    CHECK(ev(0) == Catch::Approx(0.0).margin(1e-12));
    CHECK(ev(1) == Catch::Approx(1.5));
    CHECK(ev(2) == Catch::Approx(1.5));
}

TEST_CASE("normalized laplacian spectrum lies in [0, 2] with kernel D^{1/2} 1") {
    WeightedGraph g = random_connected_graph(9, 0.4, 55, 0.3, 4.0);
    Eigen::MatrixXd NL = normalized_laplacian(g);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(NL);
    CHECK(es.eigenvalues()(0) == Catch::Approx(0.0).margin(1e-10));
    CHECK(es.eigenvalues()(es.eigenvalues().size() - 1) <= 2.0 + 1e-10);
    Eigen::VectorXd k(g.vertex_count());
    for (int v = 0; v < g.vertex_count(); ++v) k(v) = std::sqrt(g.weighted_degree(v));
    k.normalize();
    CHECK((NL * k).norm() < 1e-9);
}

TEST_CASE("normalized laplacian rejects isolated vertices") {
    WeightedGraph g(3);
    g.add_edge(0, 1, 1.0);
    CHECK_THROWS_AS(normalized_laplacian(g), GraphError);
}

TEST_CASE("expansion of K2 is 1") {
    WeightedGraph g(2);
    g.add_edge(0, 1, 1.0);
    ExpansionResult r = expansion(g);
    CHECK(r.phi == Catch::Approx(1.0));
    CHECK(r.cut.size() == 1);
}

TEST_CASE("expansion of C4 is 1/2") {
    ExpansionResult r = expansion(cycle_graph(4));
    CHECK(r.phi == Catch::Approx(0.5));
    CHECK(cut_expansion(cycle_graph(4), r.cut) == Catch::Approx(r.phi));
}

TEST_CASE("expansion refuses oversized graphs and points at cheeger_bounds") {
    WeightedGraph g = random_connected_graph(22, 0.3, 7);
    CHECK_THROWS_WITH(expansion(g), Catch::Matchers::ContainsSubstring("cheeger_bounds"));
    CheegerBounds cb = cheeger_bounds(g);
    CHECK(cb.lower <= cb.upper);
}

TEST_CASE("cheeger sandwich holds on assorted graphs") {
    std::vector<WeightedGraph> graphs;
    graphs.push_back(path_graph(5));
    graphs.push_back(cycle_graph(6));
    graphs.push_back(complete_graph(5));
    graphs.push_back(grid_graph(3, 3));
    for (std::uint64_t seed : {11ULL, 12ULL, 13ULL}) {
        graphs.push_back(random_connected_graph(9, 0.35, seed, 0.2, 5.0));
    }
    for (const auto& g : graphs) {
        double phi = expansion(g).phi;
        double l2 = lambda2_normalized(g);
        CHECK(phi >= l2 / 2.0 - 1e-9);
        CHECK(phi <= 2.0 * std::sqrt(l2) + 1e-9);
    }
}

TEST_CASE("rescale maps unit weights with d=3 to 1/3") {
    WeightedGraph g(4);  // star: center degree 3
    g.add_edge(0, 1, 1.0);
    g.add_edge(0, 2, 1.0);
    g.add_edge(0, 3, 1.0);
    RescaledGraph r = rescale_weights(g);
    CHECK(r.scale == Catch::Approx(1.0 / 3.0));
    for (int e = 0; e < r.graph.edge_count(); ++e) {
        CHECK(r.graph.edge(e).weight == Catch::Approx(1.0 / 3.0));
    }
}

TEST_CASE("rescale maps weights {1,2} with d=2 to {1/4, 1/2}") {
    WeightedGraph g = path_graph(2);
    WeightedGraph h(3);
    h.add_edge(1, 0, 1.0);
    h.add_edge(2, 1, 2.0);
    RescaledGraph r = rescale_weights(h);
    CHECK(r.graph.edge(0).weight == Catch::Approx(0.25));
    CHECK(r.graph.edge(1).weight == Catch::Approx(0.5));
    CHECK(r.graph.weight_ratio() == Catch::Approx(h.weight_ratio()));
}

TEST_CASE("rescaled spectrum obeys the eigenvalue bounds") {
    // lambda_n(L) <= 2 b d = 2 and lambda_2(L) >= a phi^2 / 4 after rescale
    for (std::uint64_t seed : {5ULL, 6ULL, 7ULL, 8ULL}) {
        WeightedGraph g = random_connected_graph(8, 0.45, seed, 0.25, 3.0);
        RescaledGraph r = rescale_weights(g);
        CHECK(r.graph.max_weight() == Catch::Approx(1.0 / r.graph.max_degree()));
        Eigen::VectorXd ev = sym_eigenvalues(laplacian(r.graph));
        double phi = expansion(r.graph).phi;
        double a = r.graph.min_weight();
        CHECK(ev(ev.size() - 1) <= 2.0 + 1e-9);
        CHECK(ev(1) >= a * phi * phi / 4.0 - 1e-9);
    }
}

TEST_CASE("gadget expansion scales as 1/n") {
    // named-cut upper bound and edge-count lower bound; exact only at n=1
    for (int n = 1; n <= 4; ++n) {
        std::string bits(static_cast<std::size_t>(n), '1');
        GadgetGraph gg = parity_gadget(bits);
        double named = cut_expansion(gg.graph, parity_gadget_named_cut(n));
        double lower = 1.0 / (2.0 * gg.graph.edge_count());  // one crossing edge minimum
        CHECK(named <= 1.0 / n + 1e-12);
        CHECK(named >= lower);
        if (n == 1) {
            double exact = expansion(gg.graph).phi;
            CHECK(exact <= named + 1e-12);
            CHECK(exact >= lower - 1e-12);
        }
    }
}
