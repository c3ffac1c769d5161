#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "sgnnx/datasets.hpp"
#include "sgnnx/policies.hpp"

using namespace sgnnx;

namespace {

Graph triangle() { return Graph(3, {{0, 1}, {1, 2}, {0, 2}}, Matrix(3, 2, 1.0), 0); }
Graph path5() {
    return Graph(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}}, Matrix(5, 2, 1.0), 0);
}

} // namespace

TEST_CASE("edge deletion bag") {
    Graph tri = triangle();
    SubgraphBag bag = edge_deletion_bag(tri);
    bag.validate();
    REQUIRE(bag.size() == 3);
    std::set<int> missing;
    for (const Subgraph& s : bag.subgraphs) {
        CHECK(s.num_edges() == 2);
        CHECK(s.num_nodes() == 3);
        for (int pe = 0; pe < 3; ++pe)
            if (std::find(s.parent_edge_index.begin(), s.parent_edge_index.end(), pe) ==
                s.parent_edge_index.end())
                missing.insert(pe);
    }
    // union of missing edges covers the parent edge set
    CHECK(missing == std::set<int>{0, 1, 2});

    Graph edgeless(3, {}, Matrix(3, 1), 0);
    SubgraphBag deg = edge_deletion_bag(edgeless);
    REQUIRE(deg.size() == 1);
    CHECK(deg.subgraphs[0].num_nodes() == 3);

    Graph single(2, {{0, 1}}, Matrix(2, 1), 0);
    SubgraphBag one = edge_deletion_bag(single);
    REQUIRE(one.size() == 1);
    CHECK(one.subgraphs[0].num_edges() == 0);
}

TEST_CASE("node deletion bag") {
    Graph tri = triangle();
    SubgraphBag bag = node_deletion_bag(tri);
    bag.validate();
    REQUIRE(bag.size() == 3);
    for (const Subgraph& s : bag.subgraphs) {
        CHECK(s.num_nodes() == 2);
        CHECK(s.num_edges() == 1);
    }

    // star: deleting the center leaves an edgeless subgraph
    Graph star(4, {{0, 1}, {0, 2}, {0, 3}}, Matrix(4, 1), 0);
    SubgraphBag sb = node_deletion_bag(star);
    CHECK(sb.subgraphs[0].num_edges() == 0);
    CHECK(sb.subgraphs[0].num_nodes() == 3);

    // path 0-1-2, delete middle node
    Graph p(3, {{0, 1}, {1, 2}}, Matrix(3, 1), 0);
    SubgraphBag pb = node_deletion_bag(p);
    CHECK(pb.subgraphs[1].num_edges() == 0);

    CHECK_THROWS_AS(node_deletion_bag(Graph(1, {}, Matrix(1, 1), 0)), std::invalid_argument);
}

TEST_CASE("node deletion edge counts follow |E| - deg(v)") {
    auto graphs = generate_ba2motifs(17, 8);
    for (const Graph& g : graphs) {
        SubgraphBag bag = node_deletion_bag(g);
        bag.validate();
        for (int v = 0; v < g.num_nodes(); ++v)
            CHECK(bag.subgraphs[v].num_edges() == g.num_edges() - g.degree(v));
    }
}

TEST_CASE("ego network bag") {
    Graph p = path5();
    SubgraphBag bag = ego_network_bag(p, 2, false);
    bag.validate();
    REQUIRE(bag.size() == 5);
    // ego of the middle node at depth 2 is the whole path
    CHECK(bag.subgraphs[2].num_nodes() == 5);
    CHECK(bag.subgraphs[2].num_edges() == 4);
    // ego of an end node at depth 1
    SubgraphBag b1 = ego_network_bag(p, 1, false);
    CHECK(b1.subgraphs[0].num_nodes() == 2);
    CHECK(b1.subgraphs[0].num_edges() == 1);

    CHECK_THROWS_AS(ego_network_bag(p, 0, false), std::invalid_argument);
}

TEST_CASE("ego network covers the graph beyond the diameter") {
    auto graphs = generate_ba2motifs(23, 4);
    for (const Graph& g : graphs) {
        SubgraphBag bag = ego_network_bag(g, g.num_nodes(), false);
        for (const Subgraph& s : bag.subgraphs) {
            // BA-2motifs graphs are connected, so every ego net is everything
            CHECK(s.num_nodes() == g.num_nodes());
            CHECK(s.num_edges() == g.num_edges());
        }
    }
}

TEST_CASE("en+ adds exactly one root indicator column") {
    auto graphs = generate_ba2motifs(29, 2);
    for (const Graph& g : graphs) {
        SubgraphBag bag = ego_network_bag(g, 2, true);
        bag.validate();
        for (const Subgraph& s : bag.subgraphs) {
            REQUIRE(s.node_features.cols == g.feature_dim() + 1);
            double col_sum = 0.0;
            for (int r = 0; r < s.node_features.rows; ++r)
                col_sum += s.node_features.at(r, s.node_features.cols - 1);
            CHECK(col_sum == 1.0);
            CHECK(s.node_features.at(s.local_of(*s.root), s.node_features.cols - 1) == 1.0);
        }
    }
}

TEST_CASE("subsample bag") {
    Graph g = generate_ba2motifs(31, 2)[0];
    SubgraphBag bag = edge_deletion_bag(g);
    REQUIRE(bag.size() > 10);

    SubgraphBag same = subsample_bag(bag, bag.size() + 5, 0);
    CHECK(same.size() == bag.size());

    SubgraphBag s1 = subsample_bag(bag, 4, 42);
    CHECK(s1.size() == 4);
    // distinct members
    std::set<const void*> ptrs;
    std::set<std::vector<int>> edge_sets;
    for (const Subgraph& s : s1.subgraphs) edge_sets.insert(s.parent_edge_index);
    CHECK(edge_sets.size() == 4);

    SubgraphBag s2 = subsample_bag(bag, 4, 42);
    for (int i = 0; i < 4; ++i)
        CHECK(s1.subgraphs[i].parent_edge_index == s2.subgraphs[i].parent_edge_index);

    SubgraphBag s3 = subsample_bag(bag, 4, 43);
    bool differs = false;
    for (int i = 0; i < 4; ++i)
        differs |= s1.subgraphs[i].parent_edge_index != s3.subgraphs[i].parent_edge_index;
    CHECK(differs);
}

TEST_CASE("policy bag cardinalities match closed forms on random graphs") {
    auto graphs = generate_ba2motifs(37, 50);
    for (const Graph& g : graphs) {
        CHECK(edge_deletion_bag(g).size() == g.num_edges());
        CHECK(node_deletion_bag(g).size() == g.num_nodes());
        CHECK(ego_network_bag(g, 2, false).size() == g.num_nodes());
        for (const Subgraph& s : edge_deletion_bag(g).subgraphs)
            CHECK(s.num_edges() == g.num_edges() - 1);
    }
}

TEST_CASE("policies validate under graph-core invariants") {
    auto graphs = generate_ba2motifs(41, 6);
    for (const Graph& g : graphs) {
        edge_deletion_bag(g).validate();
        node_deletion_bag(g).validate();
        ego_network_bag(g, 1, false).validate();
        ego_network_bag(g, 2, true).validate();
        singleton_bag(g).validate();
    }
}
