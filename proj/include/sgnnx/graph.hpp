#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "sgnnx/matrix.hpp"

namespace sgnnx {

// Undirected edge stored once per unordered pair, canonical u < v.
struct Edge {
    int u;
    int v;
    bool operator==(const Edge& o) const { return u == o.u && v == o.v; }
};

// Immutable undirected graph: node features, canonical edge list, class
// label, optional per-edge ground-truth explanation flags.
class Graph {
public:
    Graph(int num_nodes, std::vector<std::pair<int, int>> edge_pairs, Matrix node_features,
          int label, std::optional<std::vector<std::uint8_t>> ground_truth_edges = std::nullopt)
        : num_nodes_(num_nodes),
          features_(std::move(node_features)),
          label_(label),
          ground_truth_(std::move(ground_truth_edges)) {
        if (num_nodes_ <= 0) throw std::invalid_argument("Graph: num_nodes must be positive");
        if (features_.rows != num_nodes_)
            throw std::invalid_argument("Graph: feature rows " + std::to_string(features_.rows) +
                                        " != num_nodes " + std::to_string(num_nodes_));
        edges_.reserve(edge_pairs.size());
        for (auto [a, b] : edge_pairs) {
            if (a == b) throw std::invalid_argument("Graph: self-loop at node " + std::to_string(a));
            if (a < 0 || b < 0 || a >= num_nodes_ || b >= num_nodes_)
                throw std::invalid_argument("Graph: edge endpoint out of range");
            Edge e{std::min(a, b), std::max(a, b)};
            auto key = edge_key(e.u, e.v);
            if (edge_index_.count(key))
                throw std::invalid_argument("Graph: duplicate edge {" + std::to_string(e.u) + "," +
                                            std::to_string(e.v) + "}");
            edge_index_.emplace(key, static_cast<int>(edges_.size()));
            edges_.push_back(e);
        }
        if (ground_truth_ && ground_truth_->size() != edges_.size())
            throw std::invalid_argument("Graph: ground_truth_edges length != |edges|");
        neighbors_.resize(num_nodes_);
        for (const Edge& e : edges_) {
            neighbors_[e.u].push_back(e.v);
            neighbors_[e.v].push_back(e.u);
        }
    }

    int num_nodes() const { return num_nodes_; }
    int num_edges() const { return static_cast<int>(edges_.size()); }
    const std::vector<Edge>& edges() const { return edges_; }
    const Matrix& features() const { return features_; }
    int feature_dim() const { return features_.cols; }
    int label() const { return label_; }
    const std::optional<std::vector<std::uint8_t>>& ground_truth_edges() const { return ground_truth_; }
    const std::vector<int>& neighbors(int v) const { return neighbors_[v]; }
    int degree(int v) const { return static_cast<int>(neighbors_[v].size()); }

    // Index of unordered pair {i, j}, argument order irrelevant.
    std::optional<int> edge_index(int i, int j) const {
        if (i == j) throw std::invalid_argument("edge_index: self-loop query");
        if (i < 0 || j < 0 || i >= num_nodes_ || j >= num_nodes_)
            throw std::invalid_argument("edge_index: node id out of range");
        auto it = edge_index_.find(edge_key(std::min(i, j), std::max(i, j)));
        if (it == edge_index_.end()) return std::nullopt;
        return it->second;
    }

    Matrix adjacency_matrix() const {
        Matrix a(num_nodes_, num_nodes_, 0.0);
        for (const Edge& e : edges_) {
            a.at(e.u, e.v) = 1.0;
            a.at(e.v, e.u) = 1.0;
        }
        return a;
    }

    static Graph from_adjacency(const Matrix& a, Matrix node_features, int label) {
        if (a.rows != a.cols) throw std::invalid_argument("from_adjacency: matrix not square");
        std::vector<std::pair<int, int>> pairs;
        for (int i = 0; i < a.rows; ++i)
            for (int j = i + 1; j < a.cols; ++j)
                if (a.at(i, j) != 0.0) pairs.emplace_back(i, j);
        return Graph(a.rows, std::move(pairs), std::move(node_features), label);
    }

private:
    static std::int64_t edge_key(int u, int v) {
        return static_cast<std::int64_t>(u) * (1LL << 32) + v;
    }

    int num_nodes_;
    std::vector<Edge> edges_;
    Matrix features_;
    int label_;
    std::optional<std::vector<std::uint8_t>> ground_truth_;
    std::unordered_map<std::int64_t, int> edge_index_;
    std::vector<std::vector<int>> neighbors_;
};

// One subgraph of a parent Graph. Nodes keep their parent ids; a
// local<->parent relabeling table maps into the compact row space of
// node_features. Edges are carried as indices into the parent edge list
// so masks can be merged edge-exactly later.
struct Subgraph {
    std::vector<int> nodes;             // parent ids, sorted ascending
    std::vector<int> parent_edge_index; // per retained edge
    std::vector<std::pair<int, int>> local_edges; // aligned with parent_edge_index
    Matrix node_features;               // [|nodes| x d], possibly augmented
    std::optional<int> root;            // parent id (ego policies)

    int num_nodes() const { return static_cast<int>(nodes.size()); }
    int num_edges() const { return static_cast<int>(parent_edge_index.size()); }

    int local_of(int parent_id) const {
        auto it = std::lower_bound(nodes.begin(), nodes.end(), parent_id);
        if (it == nodes.end() || *it != parent_id)
            throw std::invalid_argument("Subgraph: node " + std::to_string(parent_id) + " not retained");
        return static_cast<int>(it - nodes.begin());
    }

    bool contains(int parent_id) const {
        return std::binary_search(nodes.begin(), nodes.end(), parent_id);
    }

    void validate(const Graph& parent) const {
        if (nodes.empty()) throw std::invalid_argument("Subgraph: empty node set");
        if (node_features.rows != num_nodes())
            throw std::invalid_argument("Subgraph: feature rows != node count");
        if (local_edges.size() != parent_edge_index.size())
            throw std::invalid_argument("Subgraph: edge table size mismatch");
        std::vector<std::uint8_t> seen(parent.num_edges(), 0);
        for (std::size_t k = 0; k < parent_edge_index.size(); ++k) {
            int pe = parent_edge_index[k];
            if (pe < 0 || pe >= parent.num_edges())
                throw std::invalid_argument("Subgraph: parent edge index out of range");
            if (seen[pe]) throw std::invalid_argument("Subgraph: duplicate parent edge index");
            seen[pe] = 1;
            const Edge& e = parent.edges()[pe];
            if (!contains(e.u) || !contains(e.v))
                throw std::invalid_argument("Subgraph: retained edge endpoint not in node set");
            auto [lu, lv] = local_edges[k];
            if ((nodes[lu] != e.u || nodes[lv] != e.v) && (nodes[lu] != e.v || nodes[lv] != e.u))
                throw std::invalid_argument("Subgraph: local edge does not match parent edge");
        }
    }
};

// Ordered bag of subgraphs extracted from one parent graph.
struct SubgraphBag {
    const Graph* parent = nullptr;
    std::vector<Subgraph> subgraphs;
    std::string policy_tag;

    int size() const { return static_cast<int>(subgraphs.size()); }

    void validate() const {
        if (!parent) throw std::invalid_argument("SubgraphBag: null parent");
        if (subgraphs.empty()) throw std::invalid_argument("SubgraphBag: empty bag");
        for (const Subgraph& s : subgraphs) s.validate(*parent);
    }
};

namespace detail {

inline Matrix copy_feature_rows(const Graph& g, const std::vector<int>& nodes) {
    Matrix m(static_cast<int>(nodes.size()), g.feature_dim());
    for (std::size_t r = 0; r < nodes.size(); ++r)
        for (int c = 0; c < g.feature_dim(); ++c)
            m.at(static_cast<int>(r), c) = g.features().at(nodes[r], c);
    return m;
}

} // namespace detail

// Subgraph induced by a node set: retains exactly the parent edges with
// both endpoints inside.
inline Subgraph induced_subgraph(const Graph& g, std::vector<int> nodes) {
    if (nodes.empty()) throw std::invalid_argument("induced_subgraph: empty node set");
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
    for (int v : nodes)
        if (v < 0 || v >= g.num_nodes())
            throw std::invalid_argument("induced_subgraph: node id out of range");
    Subgraph s;
    s.nodes = nodes;
    for (int pe = 0; pe < g.num_edges(); ++pe) {
        const Edge& e = g.edges()[pe];
        if (std::binary_search(nodes.begin(), nodes.end(), e.u) &&
            std::binary_search(nodes.begin(), nodes.end(), e.v)) {
            s.parent_edge_index.push_back(pe);
            s.local_edges.emplace_back(s.local_of(e.u), s.local_of(e.v));
        }
    }
    s.node_features = detail::copy_feature_rows(g, nodes);
    return s;
}

} // namespace sgnnx
