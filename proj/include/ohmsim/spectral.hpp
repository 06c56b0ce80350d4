#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "ohmsim/graph.hpp"

namespace ohmsim {

// Signed vertex-edge incidence matrix B: B(v,e) = +1 if v = e+, -1 if v = e-.
inline Eigen::MatrixXd incidence_matrix(const WeightedGraph& g) {
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(g.vertex_count(), g.edge_count());
    for (int e = 0; e < g.edge_count(); ++e) {
        const auto& ed = g.edge(e);
        B(ed.head, e) = 1.0;
        B(ed.tail, e) = -1.0;
    }
    return B;
}

inline Eigen::MatrixXd weight_matrix(const WeightedGraph& g) {
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(g.edge_count(), g.edge_count());
    for (int e = 0; e < g.edge_count(); ++e) W(e, e) = g.edge(e).weight;
    return W;
}

// L = B W B^T.
inline Eigen::MatrixXd laplacian(const WeightedGraph& g) {
    int n = g.vertex_count();
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
    for (int e = 0; e < g.edge_count(); ++e) {
        const auto& ed = g.edge(e);
        L(ed.head, ed.head) += ed.weight;
        L(ed.tail, ed.tail) += ed.weight;
        L(ed.head, ed.tail) -= ed.weight;
        L(ed.tail, ed.head) -= ed.weight;
    }
    return L;
}

// Normalized Laplacian D^{-1/2} L D^{-1/2}; eigenvalues lie in [0, 2].
inline Eigen::MatrixXd normalized_laplacian(const WeightedGraph& g) {
    int n = g.vertex_count();
    Eigen::VectorXd dinv(n);
    for (int v = 0; v < n; ++v) {
        double d = g.weighted_degree(v);
        if (!(d > 0.0)) throw GraphError("isolated vertex " + std::to_string(v));
        dinv(v) = 1.0 / std::sqrt(d);
    }
    return dinv.asDiagonal() * laplacian(g) * dinv.asDiagonal();
}

// Ascending eigenvalues of a symmetric matrix.
inline Eigen::VectorXd sym_eigenvalues(const Eigen::MatrixXd& M) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw std::runtime_error("eigensolve failed");
    return es.eigenvalues();
}

inline double lambda2_normalized(const WeightedGraph& g) {
    return sym_eigenvalues(normalized_laplacian(g))(1);
}

struct ExpansionResult {
    double phi;            // weighted expansion of the achieving cut
    std::vector<int> cut;  // achieving side S
};

// phi(S) = w(S, V\S) / min(w(S), w(V\S)) for a vertex subset S.
inline double cut_expansion(const WeightedGraph& g, const std::vector<int>& side) {
    int n = g.vertex_count();
    std::vector<char> in_s(static_cast<std::size_t>(n), 0);
    for (int v : side) {
        g.require_vertex(v);
        in_s[static_cast<std::size_t>(v)] = 1;
    }
    double vol_s = 0.0, vol_all = 0.0, crossing = 0.0;
    for (int v = 0; v < n; ++v) {
        double d = g.weighted_degree(v);
        vol_all += d;
        if (in_s[static_cast<std::size_t>(v)]) vol_s += d;
    }
    for (int e = 0; e < g.edge_count(); ++e) {
        const auto& ed = g.edge(e);
        if (in_s[static_cast<std::size_t>(ed.head)] != in_s[static_cast<std::size_t>(ed.tail)]) {
            crossing += ed.weight;
        }
    }
    double denom = std::min(vol_s, vol_all - vol_s);
    if (!(denom > 0.0)) throw GraphError("cut side has zero volume");
    return crossing / denom;
}

inline constexpr int kExpansionBruteForceLimit = 20;

// Exact weighted expansion phi(G) = min over nontrivial S of phi(S),
// by enumerating all 2^{n-1}-1 cuts with vertex 0 pinned to S. All
// subsets are evaluated, connected or not, matching the formula
// literally. Above the limit use cheeger_bounds instead.
inline ExpansionResult expansion(const WeightedGraph& g,
                                 int brute_force_limit = kExpansionBruteForceLimit) {
    g.require_connected();
    int n = g.vertex_count();
    if (n < 2) throw GraphError("expansion needs at least two vertices");
    if (n > brute_force_limit) {
        throw GraphError("vertex count " + std::to_string(n) +
                         " exceeds the brute-force limit " + std::to_string(brute_force_limit) +
                         "; use cheeger_bounds");
    }

    Eigen::VectorXd deg(n);
    double vol_all = 0.0;
    for (int v = 0; v < n; ++v) {
        deg(v) = g.weighted_degree(v);
        vol_all += deg(v);
    }

    double best = std::numeric_limits<double>::infinity();
    std::uint32_t best_mask = 1;
    // vertex 0 always in S: each unordered cut appears exactly once
    std::uint32_t count = static_cast<std::uint32_t>(1) << (n - 1);
    for (std::uint32_t rest = 0; rest < count; ++rest) {
        std::uint32_t mask = (rest << 1) | 1u;
        if (mask == (static_cast<std::uint32_t>(1) << n) - 1) continue;  // S = V
        double vol_s = 0.0;
        for (int v = 0; v < n; ++v) {
            if (mask & (1u << v)) vol_s += deg(v);
        }
        double crossing = 0.0;
        for (int e = 0; e < g.edge_count(); ++e) {
            const auto& ed = g.edge(e);
            bool hu = (mask >> ed.head) & 1u, tu = (mask >> ed.tail) & 1u;
            if (hu != tu) crossing += ed.weight;
        }
        double phi = crossing / std::min(vol_s, vol_all - vol_s);
        if (phi < best) {
            best = phi;
            best_mask = mask;
        }
    }

    ExpansionResult res;
    res.phi = best;
    for (int v = 0; v < n; ++v) {
        if (best_mask & (1u << v)) res.cut.push_back(v);
    }
    return res;
}

struct CheegerBounds {
    double lambda2;  // second-smallest eigenvalue of the normalized Laplacian
    double lower;    // lambda2 / 2 <= phi(G)
    double upper;    // phi(G) <= 2 sqrt(lambda2)
};

inline CheegerBounds cheeger_bounds(const WeightedGraph& g) {
    g.require_connected();
    double l2 = lambda2_normalized(g);
    return CheegerBounds{l2, l2 / 2.0, 2.0 * std::sqrt(std::max(0.0, l2))};
}

// phi(G) if n is within the brute-force limit, else the Cheeger lower
// bound (a valid stand-in wherever a lower bound on phi is needed).
inline double expansion_or_lower_bound(const WeightedGraph& g,
                                       int brute_force_limit = kExpansionBruteForceLimit) {
    if (g.vertex_count() <= brute_force_limit) return expansion(g, brute_force_limit).phi;
    return cheeger_bounds(g).lower;
}

struct RescaledGraph {
    WeightedGraph graph;  // weights in [1/(dc), 1/d]
    double scale;         // rescaled w_e = scale * original w_e
};

// Canonical weight normalization: multiply all weights by one scalar so
// that max w_e = 1/d, hence 1/(dc) <= w_e <= 1/d. Effective resistances
// scale by the inverse: R_original = scale * R_rescaled.
inline RescaledGraph rescale_weights(const WeightedGraph& g) {
    if (g.edge_count() == 0) throw GraphError("cannot rescale an edgeless graph");
    int d = g.max_degree();
    double scale = 1.0 / (static_cast<double>(d) * g.max_weight());
    return RescaledGraph{g.scaled(scale), scale};
}

struct GraphStats {
    int n = 0;
    int m = 0;
    int d = 0;            // max unweighted degree
    double a = 0.0;       // min weight
    double b = 0.0;       // max weight
    double c = 1.0;       // b / a
    double phi = 0.0;     // exact expansion or Cheeger lower bound
    bool phi_exact = false;
    double kappa_bound = 0.0;  // d c / phi^2
};

inline GraphStats graph_stats(const WeightedGraph& g,
                              int brute_force_limit = kExpansionBruteForceLimit) {
    GraphStats s;
    s.n = g.vertex_count();
    s.m = g.edge_count();
    s.d = g.max_degree();
    s.a = g.min_weight();
    s.b = g.max_weight();
    s.c = s.b / s.a;
    s.phi_exact = s.n <= brute_force_limit;
    s.phi = expansion_or_lower_bound(g, brute_force_limit);
    s.kappa_bound = static_cast<double>(s.d) * s.c / (s.phi * s.phi);
    return s;
}

}  // namespace ohmsim
