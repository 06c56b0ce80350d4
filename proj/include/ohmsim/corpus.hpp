#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ohmsim/graph.hpp"

namespace ohmsim {

// A named graph with its s-t query pair. The corpus is generated, not
// stored: fixtures are emitted on demand and pinned by a checksum.
struct CorpusEntry {
    std::string name;
    WeightedGraph graph;
    int s = 0;
    int t = 1;
};

// The standard verification corpus: small connected graphs (n <= 16)
// spanning series/parallel closed forms, dense and sparse topologies,
// uneven weights, multi-edges, and the two one-bit parity gadgets.
inline std::vector<CorpusEntry> corpus_graphs() {
    std::vector<CorpusEntry> out;
    auto add = [&](std::string name, WeightedGraph g, int s, int t) {
        out.push_back(CorpusEntry{std::move(name), std::move(g), s, t});
    };

    add("path-1", path_graph(1), 0, 1);
    add("path-2", path_graph(2), 0, 2);
    add("path-3", path_graph(3), 0, 3);
    add("path-5", path_graph(5), 0, 5);
    add("path-8", path_graph(8), 0, 8);

    add("cycle-3-adjacent", cycle_graph(3), 0, 1);
    add("cycle-4-opposite", cycle_graph(4), 0, 2);
    add("cycle-5-adjacent", cycle_graph(5), 0, 1);
    add("cycle-8-opposite", cycle_graph(8), 0, 4);

    add("complete-3", complete_graph(3), 0, 1);
    add("complete-4", complete_graph(4), 0, 1);
    add("complete-5", complete_graph(5), 0, 1);
    add("complete-6", complete_graph(6), 0, 1);

    add("parallel-2", parallel_graph(2), 0, 1);
    add("parallel-3", parallel_graph(3), 0, 1);

    add("grid-2x2", grid_graph(2, 2), 0, 3);
    add("grid-2x3", grid_graph(2, 3), 0, 5);
    add("grid-2x4", grid_graph(2, 4), 0, 7);
    add("grid-3x3", grid_graph(3, 3), 0, 8);

    {
        WeightedGraph g(4);
        g.add_edge(1, 0, 0.5);
        g.add_edge(2, 1, 2.0);
        g.add_edge(3, 2, 4.0);
        add("weighted-path-3", std::move(g), 0, 3);
    }
    {
        WeightedGraph g(3);
        g.add_edge(1, 0, 1.0);
        g.add_edge(2, 1, 2.0);
        g.add_edge(0, 2, 4.0);
        add("weighted-triangle", std::move(g), 0, 1);
    }
    {
        WeightedGraph g(2);
        g.add_edge(1, 0, 1.0);
        g.add_edge(1, 0, 3.0);
        add("weighted-parallel", std::move(g), 0, 1);
    }
    {
        WeightedGraph g(6);  // star with center 0
        for (int v = 1; v < 6; ++v) g.add_edge(v, 0, 1.0);
        add("star-5", std::move(g), 1, 2);
    }

    add("random-8-a", random_connected_graph(8, 0.35, 101, 0.5, 2.0), 0, 7);
    add("random-8-b", random_connected_graph(8, 0.5, 202, 0.25, 4.0), 0, 7);
    add("random-10", random_connected_graph(10, 0.3, 303, 1.0, 1.0), 0, 9);
    add("random-12", random_connected_graph(12, 0.25, 404, 0.5, 3.0), 0, 11);

    {
        GadgetGraph g0 = parity_gadget("0");
        add("gadget-0", std::move(g0.graph), g0.s, g0.t);
        GadgetGraph g1 = parity_gadget("1");
        add("gadget-1", std::move(g1.graph), g1.s, g1.t);
    }

    return out;
}

// Subset with (m+1) n at most the given bound (walk-space dimension).
inline std::vector<CorpusEntry> corpus_walk_sized(int max_dim = 600) {
    std::vector<CorpusEntry> out;
    for (auto& e : corpus_graphs()) {
        if ((e.graph.edge_count() + 1) * e.graph.vertex_count() <= max_dim) {
            out.push_back(std::move(e));
        }
    }
    return out;
}

// FNV-1a over the canonical fixture serialization; pins the generated
// corpus so silent drift in generators or formatting fails loudly.
inline std::uint64_t corpus_fingerprint() {
    std::uint64_t h = 1469598103934665603ULL;
    auto eat = [&](const std::string& s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ULL;
        }
    };
    for (const auto& e : corpus_graphs()) {
        eat(e.name);
        eat("\n");
        eat(std::to_string(e.s) + " " + std::to_string(e.t) + "\n");
        eat(to_edge_list(e.graph));
    }
    return h;
}

}  // namespace ohmsim
