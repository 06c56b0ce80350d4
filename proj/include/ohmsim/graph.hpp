#pragma once

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ohmsim/rng.hpp"

namespace ohmsim {

struct GraphError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Undirected weighted multigraph in incidence-list form.
//
// Every edge carries a fixed orientation: the first-listed endpoint at
// construction is the head e+, the second the tail e-. Signs everywhere
// downstream (incidence matrix, flows, walk vectors) use this stored
// convention. Positive flow on an edge runs tail -> head, "with the
// arrow"; an arrow written t -> s therefore has head s and tail t.
//
// Parallel edges are allowed and never deduplicated; self-loops are not.
// Graphs are immutable after construction and safe to share across
// concurrent trials.
class WeightedGraph {
public:
    struct Edge {
        int head;       // e+
        int tail;       // e-
        double weight;  // conductance w_e > 0 (resistance r_e = 1/w_e)
    };

    explicit WeightedGraph(int n) : incidence_(static_cast<std::size_t>(check_n(n))) {}

    // Adds edge with head u, tail v. Returns the new edge id.
    int add_edge(int u, int v, double w) {
        require_vertex(u);
        require_vertex(v);
        if (u == v) throw GraphError("self-loops are not allowed");
        if (!(w > 0.0)) throw GraphError("edge weight must be positive");
        int id = static_cast<int>(edges_.size());
        edges_.push_back(Edge{u, v, w});
        incidence_[static_cast<std::size_t>(u)].push_back(id);
        incidence_[static_cast<std::size_t>(v)].push_back(id);
        return id;
    }

    int vertex_count() const { return static_cast<int>(incidence_.size()); }
    int edge_count() const { return static_cast<int>(edges_.size()); }

    const Edge& edge(int e) const {
        require_edge(e);
        return edges_[static_cast<std::size_t>(e)];
    }

    // Incident edge ids of v, in insertion order.
    const std::vector<int>& incident(int v) const {
        require_vertex(v);
        return incidence_[static_cast<std::size_t>(v)];
    }

    // Unweighted degree deg(v).
    int degree(int v) const { return static_cast<int>(incident(v).size()); }

    // Weighted degree d(v) = sum of incident edge weights.
    double weighted_degree(int v) const {
        double d = 0.0;
        for (int e : incident(v)) d += edges_[static_cast<std::size_t>(e)].weight;
        return d;
    }

    // Max unweighted degree d = deg(G).
    int max_degree() const {
        int d = 0;
        for (int v = 0; v < vertex_count(); ++v) d = std::max(d, degree(v));
        return d;
    }

    double min_weight() const { return weight_extreme(true); }
    double max_weight() const { return weight_extreme(false); }

    // Weight ratio c = max w_e / min w_e, from stored values.
    double weight_ratio() const {
        if (edges_.empty()) throw GraphError("weight ratio of an edgeless graph");
        return max_weight() / min_weight();
    }

    bool connected() const {
        int n = vertex_count();
        if (n == 0) return true;
        std::vector<char> seen(static_cast<std::size_t>(n), 0);
        std::vector<int> stack{0};
        seen[0] = 1;
        int reached = 1;
        while (!stack.empty()) {
            int v = stack.back();
            stack.pop_back();
            for (int e : incident(v)) {
                const Edge& ed = edges_[static_cast<std::size_t>(e)];
                int u = (ed.head == v) ? ed.tail : ed.head;
                if (!seen[static_cast<std::size_t>(u)]) {
                    seen[static_cast<std::size_t>(u)] = 1;
                    ++reached;
                    stack.push_back(u);
                }
            }
        }
        return reached == n;
    }

    void require_connected() const {
        if (!connected()) throw GraphError("graph is not connected");
    }

    void require_vertex(int v) const {
        if (v < 0 || v >= vertex_count()) {
            throw GraphError("invalid vertex id " + std::to_string(v));
        }
    }

    void require_edge(int e) const {
        if (e < 0 || e >= edge_count()) {
            throw GraphError("invalid edge id " + std::to_string(e));
        }
    }

    // Copy with every weight multiplied by the same positive factor.
    WeightedGraph scaled(double factor) const {
        if (!(factor > 0.0)) throw GraphError("scale factor must be positive");
        WeightedGraph g(vertex_count());
        for (const Edge& e : edges_) g.add_edge(e.head, e.tail, e.weight * factor);
        return g;
    }

private:
    static int check_n(int n) {
        if (n < 0) throw GraphError("vertex count must be nonnegative");
        return n;
    }

    double weight_extreme(bool want_min) const {
        if (edges_.empty()) throw GraphError("weight bound of an edgeless graph");
        double x = edges_[0].weight;
        for (const Edge& e : edges_) x = want_min ? std::min(x, e.weight) : std::max(x, e.weight);
        return x;
    }

    std::vector<Edge> edges_;
    std::vector<std::vector<int>> incidence_;
};

// Per-experiment query accounting for the three incidence-list oracles.
// Inverse calls are counted with their forward oracle. Not meant to be
// shared across concurrent trials; aggregate at join time instead.
struct OracleCounter {
    std::uint64_t o1_calls = 0;
    std::uint64_t o2_calls = 0;
    std::uint64_t o3_calls = 0;

    OracleCounter& operator+=(const OracleCounter& o) {
        o1_calls += o.o1_calls;
        o2_calls += o.o2_calls;
        o3_calls += o.o3_calls;
        return *this;
    }
    std::uint64_t total() const { return o1_calls + o2_calls + o3_calls; }
};

// O1: the j-th incident edge of v (1-based j). Out-of-range j returns the
// sentinel -j so the map stays reversible.
inline int oracle_o1(const WeightedGraph& g, OracleCounter& ctr, int v, int j) {
    g.require_vertex(v);
    if (j < 1) throw GraphError("oracle index j must be >= 1");
    ++ctr.o1_calls;
    const auto& inc = g.incident(v);
    if (j > static_cast<int>(inc.size())) return -j;
    return inc[static_cast<std::size_t>(j - 1)];
}

// O2: endpoints (e+, e-) of e, per stored orientation.
inline std::pair<int, int> oracle_o2(const WeightedGraph& g, OracleCounter& ctr, int e) {
    g.require_edge(e);
    ++ctr.o2_calls;
    const auto& ed = g.edge(e);
    return {ed.head, ed.tail};
}

// O3: weight of e.
inline double oracle_o3(const WeightedGraph& g, OracleCounter& ctr, int e) {
    g.require_edge(e);
    ++ctr.o3_calls;
    return g.edge(e).weight;
}

// The input graph plus the distinguished unit-weight edge "0" between s
// and t, oriented t -> s (head s, tail t). Edge ids in the augmented
// edge space E' are: 0 for the new edge, 1..m for base edge k-1.
class AugmentedGraph {
public:
    AugmentedGraph(WeightedGraph base, int s, int t)
        : base_(std::move(base)), s_(s), t_(t) {
        base_.require_vertex(s);
        base_.require_vertex(t);
        if (s == t) throw GraphError("s and t must be distinct");
    }

    const WeightedGraph& base() const { return base_; }
    int s() const { return s_; }
    int t() const { return t_; }

    int vertex_count() const { return base_.vertex_count(); }
    int edge_count() const { return base_.edge_count() + 1; }  // |E'| = m + 1

    // Endpoints (e+, e-) in E' indexing.
    std::pair<int, int> endpoints(int e) const {
        require_edge(e);
        if (e == 0) return {s_, t_};
        const auto& ed = base_.edge(e - 1);
        return {ed.head, ed.tail};
    }

    double weight(int e) const {
        require_edge(e);
        return e == 0 ? 1.0 : base_.edge(e - 1).weight;
    }

    // Augmented incidence list E'(v): edge 0 first for s and t, then base
    // edges in base insertion order.
    std::vector<int> incident(int v) const {
        base_.require_vertex(v);
        std::vector<int> out;
        if (v == s_ || v == t_) out.push_back(0);
        for (int e : base_.incident(v)) out.push_back(e + 1);
        return out;
    }

    int degree(int v) const {
        return base_.degree(v) + ((v == s_ || v == t_) ? 1 : 0);
    }

    // Weighted degree d'(v) in G'.
    double weighted_degree(int v) const {
        return base_.weighted_degree(v) + ((v == s_ || v == t_) ? 1.0 : 0.0);
    }

    int max_degree() const {
        int d = 0;
        for (int v = 0; v < vertex_count(); ++v) d = std::max(d, degree(v));
        return d;
    }

    void require_edge(int e) const {
        if (e < 0 || e >= edge_count()) {
            throw GraphError("invalid augmented edge id " + std::to_string(e));
        }
    }

    // Augmented-graph oracles O1', O2', O3'; counted on the same counters.
    int oracle_o1(OracleCounter& ctr, int v, int j) const {
        base_.require_vertex(v);
        if (j < 1) throw GraphError("oracle index j must be >= 1");
        ++ctr.o1_calls;
        auto inc = incident(v);
        if (j > static_cast<int>(inc.size())) return -j;
        return inc[static_cast<std::size_t>(j - 1)];
    }

    std::pair<int, int> oracle_o2(OracleCounter& ctr, int e) const {
        require_edge(e);
        ++ctr.o2_calls;
        return endpoints(e);
    }

    double oracle_o3(OracleCounter& ctr, int e) const {
        require_edge(e);
        ++ctr.o3_calls;
        return weight(e);
    }

private:
    WeightedGraph base_;
    int s_;
    int t_;
};

// ---------------------------------------------------------------------
// Text edge-list format: first line "n m", then m lines "head tail weight"
// with 0-based vertex ids. Comment lines start with '#'. Weights are
// printed with 17 significant digits so a round-trip is bit-exact.
// ---------------------------------------------------------------------

inline std::string to_edge_list(const WeightedGraph& g) {
    std::ostringstream out;
    out << g.vertex_count() << ' ' << g.edge_count() << '\n';
    out << std::setprecision(17);
    for (int e = 0; e < g.edge_count(); ++e) {
        const auto& ed = g.edge(e);
        out << ed.head << ' ' << ed.tail << ' ' << ed.weight << '\n';
    }
    return out.str();
}

inline WeightedGraph parse_edge_list(std::istream& in) {
    std::string line;
    auto next_data_line = [&](std::string& dst) -> bool {
        while (std::getline(in, dst)) {
            std::size_t i = dst.find_first_not_of(" \t\r");
            if (i == std::string::npos) continue;
            if (dst[i] == '#') continue;
            return true;
        }
        return false;
    };

    if (!next_data_line(line)) throw GraphError("empty graph file");
    std::istringstream header(line);
    long long n = -1, m = -1;
    if (!(header >> n >> m) || n < 0 || m < 0) {
        throw GraphError("bad header line, expected \"n m\": " + line);
    }

    WeightedGraph g(static_cast<int>(n));
    for (long long k = 0; k < m; ++k) {
        if (!next_data_line(line)) throw GraphError("truncated edge list");
        std::istringstream row(line);
        int u, v;
        double w;
        if (!(row >> u >> v >> w)) throw GraphError("bad edge line: " + line);
        try {
            g.add_edge(u, v, w);
        } catch (const GraphError& err) {
            throw GraphError("edge " + std::to_string(k) + ": " + err.what());
        }
    }
    return g;
}

inline WeightedGraph parse_edge_list(const std::string& text) {
    std::istringstream in(text);
    return parse_edge_list(in);
}

inline WeightedGraph load_edge_list(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw GraphError("cannot open graph file: " + path);
    return parse_edge_list(in);
}

inline void save_edge_list(const WeightedGraph& g, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw GraphError("cannot write graph file: " + path);
    out << to_edge_list(g);
}

// ---------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------

// Path of k unit edges on k+1 vertices; edges listed head = far endpoint
// so the unit 0 -> k electrical flow is +1 on every edge.
inline WeightedGraph path_graph(int k, double w = 1.0) {
    if (k < 1) throw GraphError("path needs at least one edge");
    WeightedGraph g(k + 1);
    for (int v = 0; v < k; ++v) g.add_edge(v + 1, v, w);
    return g;
}

inline WeightedGraph cycle_graph(int k, double w = 1.0) {
    if (k < 3) throw GraphError("cycle needs at least three vertices");
    WeightedGraph g(k);
    for (int v = 0; v < k; ++v) g.add_edge((v + 1) % k, v, w);
    return g;
}

inline WeightedGraph complete_graph(int n, double w = 1.0) {
    if (n < 2) throw GraphError("complete graph needs at least two vertices");
    WeightedGraph g(n);
    for (int u = 0; u < n; ++u)
        for (int v = u + 1; v < n; ++v) g.add_edge(v, u, w);
    return g;
}

// a x b grid, vertex (r, c) -> r*b + c.
inline WeightedGraph grid_graph(int a, int b, double w = 1.0) {
    if (a < 1 || b < 1 || a * b < 2) throw GraphError("grid needs at least two vertices");
    WeightedGraph g(a * b);
    for (int r = 0; r < a; ++r) {
        for (int c = 0; c < b; ++c) {
            int v = r * b + c;
            if (c + 1 < b) g.add_edge(v + 1, v, w);
            if (r + 1 < a) g.add_edge(v + b, v, w);
        }
    }
    return g;
}

// m parallel edges between two vertices.
inline WeightedGraph parallel_graph(int m, double w = 1.0) {
    if (m < 1) throw GraphError("need at least one edge");
    WeightedGraph g(2);
    for (int k = 0; k < m; ++k) g.add_edge(1, 0, w);
    return g;
}

// Connected G(n, p): a uniform spanning path backbone plus p-density
// extras, optionally with random weights in [w_lo, w_hi].
inline WeightedGraph random_connected_graph(int n, double p, std::uint64_t seed,
                                            double w_lo = 1.0, double w_hi = 1.0) {
    if (n < 2) throw GraphError("need at least two vertices");
    RngStream rng(seed, 0xC0FFEE);
    WeightedGraph g(n);
    auto weight = [&]() { return (w_lo == w_hi) ? w_lo : rng.uniform(w_lo, w_hi); };
    // random permutation backbone keeps the graph connected
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    for (int i = n - 1; i > 0; --i) {
        int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i + 1)));
        std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }
    std::vector<std::vector<char>> used(static_cast<std::size_t>(n),
                                        std::vector<char>(static_cast<std::size_t>(n), 0));
    for (int i = 0; i + 1 < n; ++i) {
        int u = order[static_cast<std::size_t>(i)], v = order[static_cast<std::size_t>(i + 1)];
        g.add_edge(u, v, weight());
        used[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)] = 1;
        used[static_cast<std::size_t>(v)][static_cast<std::size_t>(u)] = 1;
    }
    for (int u = 0; u < n; ++u) {
        for (int v = u + 1; v < n; ++v) {
            if (used[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)]) continue;
            if (rng.bernoulli(p)) g.add_edge(v, u, weight());
        }
    }
    return g;
}

// ---------------------------------------------------------------------
// PARITY lower-bound gadget family
// ---------------------------------------------------------------------

struct GadgetGraph {
    WeightedGraph graph;
    int s;
    int t;
};

// The graph G(x) for a bit string x of length n: 10n+2 unit-weight
// vertices of max degree 3, built from n concatenated parallel/crossing
// gadgets plus two length-4n+1 paths attached at s = (1,0) and at
// (n+1,0), (n+1,1). PARITY(x) = 0 gives R_{s,t} <= n; PARITY(x) = 1
// gives R_{s,t} >= 4n, with s = (1,0), t = (n+1,0).
inline GadgetGraph parity_gadget(const std::string& bits) {
    if (bits.empty()) throw GraphError("parity gadget needs a nonempty bit string");
    int n = static_cast<int>(bits.size());
    std::vector<int> x(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        char c = bits[static_cast<std::size_t>(i)];
        if (c != '0' && c != '1') throw GraphError("bit string must be over {0,1}");
        x[static_cast<std::size_t>(i)] = c - '0';
    }

    // vertex ids: (i, a) -> 2*(i-1) + a for i in [n+1];
    //             [j, b] -> 2*(n+1) + 2*(j-1) + b for j in [4n]
    auto level = [&](int i, int a) { return 2 * (i - 1) + a; };
    auto rail = [&](int j, int b) { return 2 * (n + 1) + 2 * (j - 1) + b; };

    WeightedGraph g(10 * n + 2);
    for (int i = 1; i <= n; ++i) {
        for (int a = 0; a <= 1; ++a) {
            g.add_edge(level(i, a), level(i + 1, a ^ x[static_cast<std::size_t>(i - 1)]), 1.0);
        }
    }
    for (int j = 1; j <= 4 * n - 1; ++j) {
        for (int b = 0; b <= 1; ++b) g.add_edge(rail(j, b), rail(j + 1, b), 1.0);
    }
    g.add_edge(level(1, 0), rail(1, 0), 1.0);
    g.add_edge(level(1, 0), rail(1, 1), 1.0);
    g.add_edge(rail(4 * n, 0), level(n + 1, 0), 1.0);
    g.add_edge(rail(4 * n, 1), level(n + 1, 1), 1.0);

    return GadgetGraph{std::move(g), level(1, 0), level(n + 1, 0)};
}

// The cut the lower-bound argument names: levels (i,a) with i <= n/2
// together with rail vertices [j,b] with j <= 2n.
inline std::vector<int> parity_gadget_named_cut(int n) {
    std::vector<int> cut;
    for (int i = 1; 2 * i <= n; ++i) {
        cut.push_back(2 * (i - 1));
        cut.push_back(2 * (i - 1) + 1);
    }
    for (int j = 1; j <= 2 * n; ++j) {
        cut.push_back(2 * (n + 1) + 2 * (j - 1));
        cut.push_back(2 * (n + 1) + 2 * (j - 1) + 1);
    }
    return cut;
}

inline int parity_of(const std::string& bits) {
    int p = 0;
    for (char c : bits) p ^= (c - '0');
    return p;
}

}  // namespace ohmsim
