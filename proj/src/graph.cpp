#include "scatterad/graph.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "scatterad/errors.hpp"
#include "scatterad/rng.hpp"

namespace scatterad {

std::string TemporalGraph::to_edge_list() const {
    std::ostringstream os;
    for (const auto& [s, d] : edges) os << s << ' ' << d << '\n';
    return os.str();
}

TemporalGraph TemporalGraph::from_edge_list(const std::string& text, int num_nodes,
                                            Topology topology) {
    TemporalGraph g;
    g.num_nodes = num_nodes;
    g.topology = topology;
    std::istringstream is(text);
    int s = 0, d = 0;
    while (is >> s >> d) {
        if (s < 0 || s >= num_nodes || d < 0 || d >= num_nodes)
            throw DataError("edge list: index out of range for " +
                            std::to_string(num_nodes) + " nodes");
        g.edges.emplace_back(s, d);
    }
    return g;
}

TemporalGraph build_lookback(int num_nodes, const TopologyConfig& cfg) {
    if (cfg.tau <= 0) throw ConfigError("lookback topology: tau must be positive");
    if (num_nodes <= cfg.tau)
        throw ConfigError("lookback topology: window length " + std::to_string(num_nodes) +
                          " must exceed tau " + std::to_string(cfg.tau));
    TemporalGraph g;
    g.num_nodes = num_nodes;
    g.topology = Topology::Lookback;
    for (int t = cfg.tau; t < num_nodes; ++t)
        for (int k = cfg.tau; k >= 1; --k) g.edges.emplace_back(t - k, t);
    return g;
}

TemporalGraph build_random(int num_nodes, const TopologyConfig& cfg) {
    if (num_nodes < 2) throw ConfigError("random topology: need at least 2 nodes");
    if (cfg.edge_prob <= 0.0 || cfg.edge_prob > 1.0)
        throw ConfigError("random topology: edge_prob must lie in (0, 1]");
    TemporalGraph g;
    g.num_nodes = num_nodes;
    g.topology = Topology::Random;
    Rng rng(cfg.seed);
    for (int i = 0; i < num_nodes; ++i) {
        for (int j = i + 1; j < num_nodes; ++j) {
            if (j == i + 1) {
                g.edges.emplace_back(i, j);  // adjacency backbone always kept
            } else if (rng.uniform() < cfg.edge_prob) {
                g.edges.emplace_back(i, j);
            }
        }
    }
    return g;
}

TemporalGraph build_knn(int num_nodes, const Tensor& window, const TopologyConfig& cfg) {
    if (cfg.knn_k <= 0) throw ConfigError("knn topology: k must be positive");
    if (num_nodes <= cfg.knn_k)
        throw ConfigError("knn topology: window length " + std::to_string(num_nodes) +
                          " must exceed k " + std::to_string(cfg.knn_k));
    if (window.rows() != num_nodes)
        throw ConfigError("knn topology: window rows do not match node count");
    const int n = window.cols();
    auto dist2 = [&](int a, int b) {
        double s = 0.0;
        for (int j = 0; j < n; ++j) {
            const double d = window.at(a, j) - window.at(b, j);
            s += d * d;
        }
        return s;
    };
    TemporalGraph g;
    g.num_nodes = num_nodes;
    g.topology = Topology::Knn;
    std::vector<std::pair<double, int>> cand;
    for (int i = 0; i < num_nodes; ++i) {
        cand.clear();
        for (int j = 0; j < num_nodes; ++j) {
            if (j == i) continue;
            cand.emplace_back(dist2(i, j), j);
        }
        // stable sort on (distance, index) breaks ties toward smaller index
        std::sort(cand.begin(), cand.end());
        for (int k = 0; k < cfg.knn_k; ++k) g.edges.emplace_back(cand[k].second, i);
    }
    return g;
}

TemporalGraph build_topology(int num_nodes, const Tensor& window, const TopologyConfig& cfg) {
    switch (cfg.kind) {
        case Topology::Lookback: return build_lookback(num_nodes, cfg);
        case Topology::Random: return build_random(num_nodes, cfg);
        case Topology::Knn: return build_knn(num_nodes, window, cfg);
    }
    throw ConfigError("unknown topology");
}

}  // namespace scatterad
