#pragma once

#include <deque>
#include <stdexcept>
#include <string>
#include <vector>

#include "sgnnx/graph.hpp"
#include "sgnnx/rng.hpp"

namespace sgnnx {

enum class PolicyKind { ED, ND, EN, ENplus, None };

inline std::string to_string(PolicyKind k) {
    switch (k) {
        case PolicyKind::ED: return "ed";
        case PolicyKind::ND: return "nd";
        case PolicyKind::EN: return "en";
        case PolicyKind::ENplus: return "en+";
        case PolicyKind::None: return "none";
    }
    throw std::logic_error("unknown policy kind");
}

inline PolicyKind policy_from_string(const std::string& s) {
    if (s == "ed") return PolicyKind::ED;
    if (s == "nd") return PolicyKind::ND;
    if (s == "en") return PolicyKind::EN;
    if (s == "en+" || s == "enplus") return PolicyKind::ENplus;
    if (s == "none") return PolicyKind::None;
    throw std::invalid_argument("unknown policy '" + s + "' (expected ed|nd|en|en+|none)");
}

struct PolicyConfig {
    PolicyKind kind = PolicyKind::ED;
    int ego_depth = 2;      // EN / EN+ only
    int max_bag_size = 0;   // 0 = full bag
    std::uint64_t seed = 0; // subsampling
};

namespace detail {

inline Subgraph whole_graph_subgraph(const Graph& g) {
    std::vector<int> nodes(g.num_nodes());
    for (int i = 0; i < g.num_nodes(); ++i) nodes[i] = i;
    return induced_subgraph(g, nodes);
}

} // namespace detail

// Bag for PolicyKind::None and the plain-GIN baseline: the graph itself.
inline SubgraphBag singleton_bag(const Graph& g) {
    SubgraphBag bag;
    bag.parent = &g;
    bag.policy_tag = "none";
    bag.subgraphs.push_back(detail::whole_graph_subgraph(g));
    return bag;
}

// One subgraph per edge, each missing exactly that edge; the node set is
// unchanged. An edgeless graph degrades to a bag holding the graph itself.
inline SubgraphBag edge_deletion_bag(const Graph& g) {
    SubgraphBag bag;
    bag.parent = &g;
    bag.policy_tag = "ed";
    if (g.num_edges() == 0) {
        bag.subgraphs.push_back(detail::whole_graph_subgraph(g));
        return bag;
    }
    for (int del = 0; del < g.num_edges(); ++del) {
        Subgraph s;
        s.nodes.resize(g.num_nodes());
        for (int i = 0; i < g.num_nodes(); ++i) s.nodes[i] = i;
        for (int pe = 0; pe < g.num_edges(); ++pe) {
            if (pe == del) continue;
            const Edge& e = g.edges()[pe];
            s.parent_edge_index.push_back(pe);
            s.local_edges.emplace_back(e.u, e.v);
        }
        s.node_features = g.features();
        bag.subgraphs.push_back(std::move(s));
    }
    return bag;
}

// One subgraph per node v: g without v and its incident edges.
inline SubgraphBag node_deletion_bag(const Graph& g) {
    if (g.num_nodes() < 2)
        throw std::invalid_argument("node_deletion_bag: graph needs at least 2 nodes");
    SubgraphBag bag;
    bag.parent = &g;
    bag.policy_tag = "nd";
    for (int del = 0; del < g.num_nodes(); ++del) {
        std::vector<int> nodes;
        nodes.reserve(g.num_nodes() - 1);
        for (int i = 0; i < g.num_nodes(); ++i)
            if (i != del) nodes.push_back(i);
        bag.subgraphs.push_back(induced_subgraph(g, std::move(nodes)));
    }
    return bag;
}

// One subgraph per node v: the induced subgraph on nodes within hop
// distance <= k of v. With mark_root, features gain one binary column
// that is 1 only on the root row. An isolated root degrades to the whole
// graph (root still marked).
inline SubgraphBag ego_network_bag(const Graph& g, int k, bool mark_root) {
    if (k < 1) throw std::invalid_argument("ego_network_bag: depth must be >= 1");
    SubgraphBag bag;
    bag.parent = &g;
    bag.policy_tag = mark_root ? "en+" : "en";
    for (int root = 0; root < g.num_nodes(); ++root) {
        // BFS to depth k
        std::vector<int> dist(g.num_nodes(), -1);
        std::deque<int> q{root};
        dist[root] = 0;
        std::vector<int> nodes{root};
        while (!q.empty()) {
            int v = q.front();
            q.pop_front();
            if (dist[v] == k) continue;
            for (int w : g.neighbors(v))
                if (dist[w] < 0) {
                    dist[w] = dist[v] + 1;
                    nodes.push_back(w);
                    q.push_back(w);
                }
        }
        Subgraph s;
        if (nodes.size() == 1 && g.num_nodes() > 1)
            s = detail::whole_graph_subgraph(g);
        else
            s = induced_subgraph(g, std::move(nodes));
        s.root = root;
        if (mark_root) {
            Matrix aug(s.node_features.rows, s.node_features.cols + 1, 0.0);
            for (int r = 0; r < aug.rows; ++r)
                for (int c = 0; c < s.node_features.cols; ++c)
                    aug.at(r, c) = s.node_features.at(r, c);
            aug.at(s.local_of(root), aug.cols - 1) = 1.0;
            s.node_features = std::move(aug);
        }
        bag.subgraphs.push_back(std::move(s));
    }
    return bag;
}

// Uniform sample without replacement when the bag exceeds max_bag_size;
// identity otherwise. Deterministic given the seed.
inline SubgraphBag subsample_bag(const SubgraphBag& bag, int max_bag_size, std::uint64_t seed) {
    if (max_bag_size < 1) throw std::invalid_argument("subsample_bag: max_bag_size must be >= 1");
    if (bag.size() <= max_bag_size) return bag;
    Rng rng(seed);
    std::vector<int> keep = rng.sample_without_replacement(bag.size(), max_bag_size);
    SubgraphBag out;
    out.parent = bag.parent;
    out.policy_tag = bag.policy_tag;
    for (int i : keep) out.subgraphs.push_back(bag.subgraphs[i]);
    return out;
}

inline SubgraphBag make_bag(const Graph& g, const PolicyConfig& cfg) {
    switch (cfg.kind) {
        case PolicyKind::ED: return edge_deletion_bag(g);
        case PolicyKind::ND: return node_deletion_bag(g);
        case PolicyKind::EN: return ego_network_bag(g, cfg.ego_depth, false);
        case PolicyKind::ENplus: return ego_network_bag(g, cfg.ego_depth, true);
        case PolicyKind::None: return singleton_bag(g);
    }
    throw std::logic_error("make_bag: unknown policy");
}

// Feature dimension the encoder sees under a policy (EN+ appends a column).
inline int policy_feature_dim(int base_dim, PolicyKind kind) {
    return kind == PolicyKind::ENplus ? base_dim + 1 : base_dim;
}

} // namespace sgnnx
