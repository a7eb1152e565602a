#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "scatterad/tensor.hpp"

namespace scatterad {

enum class Topology { Lookback, Random, Knn };

// Directed graph over the time steps of one window. Vertices are 0-based
// time indices; an edge (s, d) feeds node s's representation into node d's
// attention neighborhood.
struct TemporalGraph {
    int num_nodes = 0;
    std::vector<std::pair<int, int>> edges;  // (source, destination)
    Topology topology = Topology::Lookback;

    // Edge-list text: one "s d" pair per line.
    std::string to_edge_list() const;
    static TemporalGraph from_edge_list(const std::string& text, int num_nodes,
                                        Topology topology);
};

struct TopologyConfig {
    Topology kind = Topology::Lookback;
    int tau = 2;             // look-back depth
    double edge_prob = 0.3;  // random topology inclusion probability
    int knn_k = 3;           // neighbors per node for the KNN topology
    std::uint64_t seed = 0;
};

// Look-back graph: every node t >= tau receives edges from its tau
// predecessors. Nodes before tau have no incoming edges by construction.
TemporalGraph build_lookback(int num_nodes, const TopologyConfig& cfg);

// Random forward DAG: each pair (i, j) with i < j is included independently
// with probability edge_prob; adjacent pairs (t, t+1) are always kept.
TemporalGraph build_random(int num_nodes, const TopologyConfig& cfg);

// Each node i receives edges from its knn_k nearest neighbors by Euclidean
// distance between window rows; ties break toward the smaller index.
TemporalGraph build_knn(int num_nodes, const Tensor& window, const TopologyConfig& cfg);

// Dispatch on cfg.kind. The window is consulted only by the KNN topology.
TemporalGraph build_topology(int num_nodes, const Tensor& window, const TopologyConfig& cfg);

}  // namespace scatterad
