#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "ohmsim/graph.hpp"
#include "ohmsim/rng.hpp"
#include "ohmsim/spectral.hpp"

namespace ohmsim {

// Flow sign convention, used consistently everywhere: f(e) > 0 means flow
// running tail -> head, with the stored arrow. The value of an s-t flow is
// the net flow out of s,
//     |f| = sum_{e in E-(s)} f(e) - sum_{e in E+(s)} f(e) = -(B f)(s),
// so a unit s-t flow satisfies B f = |t> - |s>. Under this convention the
// embedding g(f) = |f| |0> + sum_e f(e)/sqrt(w_e) |e> lands exactly in
// ker M' of the augmented graph (edge 0 oriented t -> s).

struct FlowVector {
    std::vector<double> flow;  // per base edge, sign relative to stored orientation
    double value = 0.0;        // net flow out of s
};

struct PotentialVector {
    Eigen::VectorXd potential;  // orthogonal to the all-ones vector
};

// Solves L x = y with x orthogonal to ones, by eigendecomposition.
// Eigenvalues below 1e-12 * lambda_max are treated as zero; the kernel
// must be one-dimensional (connected graph), and y must be orthogonal to
// it up to tolerance.
inline Eigen::VectorXd pinv_apply(const Eigen::MatrixXd& L, const Eigen::VectorXd& y,
                                  double kernel_component_tol = 1e-8) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(L);
    if (es.info() != Eigen::Success) throw std::runtime_error("eigensolve failed");
    const Eigen::VectorXd& lam = es.eigenvalues();
    const Eigen::MatrixXd& V = es.eigenvectors();
    int n = static_cast<int>(lam.size());
    double lam_max = std::abs(lam(n - 1));
    double zero_cut = 1e-12 * std::max(lam_max, 1.0);

    int kernel_dim = 0;
    for (int j = 0; j < n; ++j) {
        if (std::abs(lam(j)) <= zero_cut) ++kernel_dim;
    }
    if (kernel_dim != 1) {
        throw GraphError("Laplacian kernel dimension " + std::to_string(kernel_dim) +
                         "; graph must be connected");
    }

    Eigen::VectorXd c = V.transpose() * y;
    double ynorm = y.norm();
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    for (int j = 0; j < n; ++j) {
        if (std::abs(lam(j)) <= zero_cut) {
            if (ynorm > 0.0 && std::abs(c(j)) > kernel_component_tol * ynorm) {
                throw GraphError("right-hand side has a kernel component");
            }
            continue;  // project away the within-tolerance part
        }
        x += (c(j) / lam(j)) * V.col(j);
    }
    return x;
}

inline Eigen::VectorXd chi_vector(int n, int s, int t) {
    Eigen::VectorXd chi = Eigen::VectorXd::Zero(n);
    chi(s) = 1.0;
    chi(t) = -1.0;
    return chi;
}

// Potentials induced by injecting a unit current at s and extracting it
// at t: v = L+ chi_{s,t}.
inline PotentialVector potentials(const WeightedGraph& g, int s, int t) {
    g.require_vertex(s);
    g.require_vertex(t);
    if (s == t) throw GraphError("s and t must be distinct");
    return PotentialVector{pinv_apply(laplacian(g), chi_vector(g.vertex_count(), s, t))};
}

// R_{s,t} = chi^T L+ chi.
inline double effective_resistance(const WeightedGraph& g, int s, int t) {
    Eigen::VectorXd chi = chi_vector(g.vertex_count(), s, t);
    return chi.dot(pinv_apply(laplacian(g), chi));
}

// Net flow out of s under the tail -> head sign convention.
inline double flow_value_at(const WeightedGraph& g, const std::vector<double>& flow, int s) {
    double out = 0.0;
    for (int e : g.incident(s)) {
        const auto& ed = g.edge(e);
        double f = flow[static_cast<std::size_t>(e)];
        if (ed.tail == s) out += f;
        if (ed.head == s) out -= f;
    }
    return out;
}

// Max conservation violation over vertices outside {s, t}.
inline double conservation_defect(const WeightedGraph& g, const std::vector<double>& flow,
                                  int s, int t) {
    double worst = 0.0;
    for (int v = 0; v < g.vertex_count(); ++v) {
        if (v == s || v == t) continue;
        worst = std::max(worst, std::abs(flow_value_at(g, flow, v)));
    }
    return worst;
}

// Energy E(f) = sum_e f(e)^2 / w_e.
inline double flow_energy(const WeightedGraph& g, const std::vector<double>& flow) {
    double energy = 0.0;
    for (int e = 0; e < g.edge_count(); ++e) {
        double f = flow[static_cast<std::size_t>(e)];
        energy += f * f / g.edge(e).weight;
    }
    return energy;
}

inline double flow_norm(const std::vector<double>& flow) {
    double s = 0.0;
    for (double f : flow) s += f * f;
    return std::sqrt(s);
}

// The unit electrical s-t flow i = W B^T L+ chi_{t,s}: value exactly 1,
// minimum energy E(i) = R_{s,t} among unit s-t flows.
inline FlowVector unit_electrical_flow(const WeightedGraph& g, int s, int t) {
    PotentialVector v = potentials(g, s, t);
    FlowVector out;
    out.flow.resize(static_cast<std::size_t>(g.edge_count()));
    for (int e = 0; e < g.edge_count(); ++e) {
        const auto& ed = g.edge(e);
        // current runs downhill; positive means tail -> head
        out.flow[static_cast<std::size_t>(e)] =
            ed.weight * (v.potential(ed.tail) - v.potential(ed.head));
    }
    out.value = flow_value_at(g, out.flow, s);
    return out;
}

// g(f) = |f| |0> + sum_e f(e)/sqrt(w_e) |e> over E' = {0} u E.
inline Eigen::VectorXd g_embed(const AugmentedGraph& ag, const FlowVector& f,
                               double conservation_tol = 1e-8) {
    const WeightedGraph& g = ag.base();
    if (static_cast<int>(f.flow.size()) != g.edge_count()) {
        throw GraphError("flow dimension mismatch");
    }
    double defect = conservation_defect(g, f.flow, ag.s(), ag.t());
    double scale = std::max(1.0, std::abs(f.value));
    if (defect > conservation_tol * scale) {
        throw GraphError("flow violates conservation by " + std::to_string(defect));
    }
    Eigen::VectorXd out(ag.edge_count());
    out(0) = f.value;
    for (int e = 0; e < g.edge_count(); ++e) {
        out(e + 1) = f.flow[static_cast<std::size_t>(e)] / std::sqrt(g.edge(e).weight);
    }
    return out;
}

// Weighted incidence matrix M' of G': column e is sqrt(w_e)(|e+> - |e->);
// column 0 is |s> - |t> exactly.
inline Eigen::MatrixXd weighted_incidence(const AugmentedGraph& ag) {
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(ag.vertex_count(), ag.edge_count());
    for (int e = 0; e < ag.edge_count(); ++e) {
        auto [head, tail] = ag.endpoints(e);
        double sw = std::sqrt(ag.weight(e));
        M(head, e) = sw;
        M(tail, e) = -sw;
    }
    return M;
}

// Orthonormal basis of ker M' via SVD; singular values below
// 1e-10 * sigma_max count as zero (relative so the rescaled weights of
// the walk algorithm do not starve the threshold).
inline Eigen::MatrixXd kernel_basis(const Eigen::MatrixXd& M, double rel_tol = 1e-10) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeFullV);
    const Eigen::VectorXd& sv = svd.singularValues();
    double cut = (sv.size() > 0 ? sv(0) : 0.0) * rel_tol;
    int rank = 0;
    for (int j = 0; j < sv.size(); ++j) {
        if (sv(j) > cut) ++rank;
    }
    return svd.matrixV().rightCols(svd.matrixV().cols() - rank);
}

// Orthogonal projector onto ker M'.
inline Eigen::MatrixXd kernel_projection(const AugmentedGraph& ag) {
    ag.base().require_connected();
    Eigen::MatrixXd K = kernel_basis(weighted_incidence(ag));
    return K * K.transpose();
}

// ---------------------------------------------------------------------
// Flow construction helpers (independent oracles for the tests, and the
// span of ker M')
// ---------------------------------------------------------------------

// BFS tree unit s-t flow: value 1 along the tree path, zero elsewhere.
inline FlowVector tree_path_flow(const WeightedGraph& g, int s, int t) {
    g.require_vertex(s);
    g.require_vertex(t);
    int n = g.vertex_count();
    std::vector<int> parent_edge(static_cast<std::size_t>(n), -1);
    std::vector<int> parent(static_cast<std::size_t>(n), -1);
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::vector<int> queue{s};
    seen[static_cast<std::size_t>(s)] = 1;
    for (std::size_t qi = 0; qi < queue.size(); ++qi) {
        int v = queue[qi];
        for (int e : g.incident(v)) {
            const auto& ed = g.edge(e);
            int u = (ed.head == v) ? ed.tail : ed.head;
            if (!seen[static_cast<std::size_t>(u)]) {
                seen[static_cast<std::size_t>(u)] = 1;
                parent[static_cast<std::size_t>(u)] = v;
                parent_edge[static_cast<std::size_t>(u)] = e;
                queue.push_back(u);
            }
        }
    }
    if (!seen[static_cast<std::size_t>(t)]) throw GraphError("s and t are disconnected");

    FlowVector f;
    f.flow.assign(static_cast<std::size_t>(g.edge_count()), 0.0);
    int v = t;
    while (v != s) {
        int e = parent_edge[static_cast<std::size_t>(v)];
        const auto& ed = g.edge(e);
        // push one unit from parent toward v; positive sign is tail -> head
        f.flow[static_cast<std::size_t>(e)] += (ed.head == v) ? 1.0 : -1.0;
        v = parent[static_cast<std::size_t>(v)];
    }
    f.value = flow_value_at(g, f.flow, s);
    return f;
}

// Circulations around the fundamental cycles of a BFS spanning tree:
// m - n + 1 value-zero flows, one per non-tree edge.
inline std::vector<FlowVector> fundamental_cycle_flows(const WeightedGraph& g) {
    g.require_connected();
    int n = g.vertex_count();
    std::vector<int> parent_edge(static_cast<std::size_t>(n), -1);
    std::vector<int> parent(static_cast<std::size_t>(n), -1);
    std::vector<int> depth(static_cast<std::size_t>(n), 0);
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::vector<char> in_tree(static_cast<std::size_t>(g.edge_count()), 0);
    std::vector<int> queue{0};
    seen[0] = 1;
    for (std::size_t qi = 0; qi < queue.size(); ++qi) {
        int v = queue[qi];
        for (int e : g.incident(v)) {
            const auto& ed = g.edge(e);
            int u = (ed.head == v) ? ed.tail : ed.head;
            if (!seen[static_cast<std::size_t>(u)]) {
                seen[static_cast<std::size_t>(u)] = 1;
                parent[static_cast<std::size_t>(u)] = v;
                parent_edge[static_cast<std::size_t>(u)] = e;
                depth[static_cast<std::size_t>(u)] = depth[static_cast<std::size_t>(v)] + 1;
                in_tree[static_cast<std::size_t>(e)] = 1;
                queue.push_back(u);
            }
        }
    }

    auto push_unit = [&](std::vector<double>& flow, int e, int toward) {
        const auto& ed = g.edge(e);
        flow[static_cast<std::size_t>(e)] += (ed.head == toward) ? 1.0 : -1.0;
    };

    std::vector<FlowVector> cycles;
    for (int e = 0; e < g.edge_count(); ++e) {
        if (in_tree[static_cast<std::size_t>(e)]) continue;
        const auto& ed = g.edge(e);
        FlowVector c;
        c.flow.assign(static_cast<std::size_t>(g.edge_count()), 0.0);
        // one unit around the cycle: tail -> head on e, back via the tree
        c.flow[static_cast<std::size_t>(e)] = 1.0;
        int u = ed.head, v = ed.tail;
        while (u != v) {
            if (depth[static_cast<std::size_t>(u)] >= depth[static_cast<std::size_t>(v)]) {
                push_unit(c.flow, parent_edge[static_cast<std::size_t>(u)],
                          parent[static_cast<std::size_t>(u)]);
                u = parent[static_cast<std::size_t>(u)];
            } else {
                push_unit(c.flow, parent_edge[static_cast<std::size_t>(v)], v);
                v = parent[static_cast<std::size_t>(v)];
            }
        }
        c.value = 0.0;
        cycles.push_back(std::move(c));
    }
    return cycles;
}

// Random unit s-t flow: the BFS tree path carries value 1, then up to
// m-n+1 fundamental-cycle circulations are added with uniform [-1, 1]
// coefficients. Reproducible from the stream.
inline FlowVector random_unit_flow(const WeightedGraph& g, int s, int t, RngStream& rng) {
    FlowVector f = tree_path_flow(g, s, t);
    for (const FlowVector& c : fundamental_cycle_flows(g)) {
        double coeff = rng.uniform(-1.0, 1.0);
        for (std::size_t e = 0; e < f.flow.size(); ++e) f.flow[e] += coeff * c.flow[e];
    }
    f.value = flow_value_at(g, f.flow, s);
    return f;
}

}  // namespace ohmsim
