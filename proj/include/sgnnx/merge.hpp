#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "sgnnx/graph.hpp"

namespace sgnnx {

enum class MergeMode { SumRescale, Mean, Max };

inline std::string to_string(MergeMode m) {
    switch (m) {
        case MergeMode::SumRescale: return "sum_rescale";
        case MergeMode::Mean: return "mean";
        case MergeMode::Max: return "max";
    }
    throw std::logic_error("unknown merge mode");
}

inline MergeMode merge_mode_from_string(const std::string& s) {
    if (s == "sum_rescale") return MergeMode::SumRescale;
    if (s == "mean") return MergeMode::Mean;
    if (s == "max") return MergeMode::Max;
    throw std::invalid_argument("unknown merge mode '" + s + "' (expected sum_rescale|mean|max)");
}

// Whole-graph explanation: one merged score per parent edge, in [0,1].
struct Explanation {
    const Graph* parent = nullptr;
    std::vector<double> scores;
    MergeMode mode = MergeMode::SumRescale;
};

// Combine per-subgraph masks through edge provenance. An edge absent
// from a subgraph contributes weight 0 for that subgraph. sum_rescale
// divides the per-edge sums by the maximum sum (all-zero stays all-zero),
// mean divides by bag size, max takes the elementwise maximum.
inline Explanation merge_masks(const SubgraphBag& bag, const std::vector<std::vector<double>>& masks,
                               MergeMode mode) {
    if (static_cast<int>(masks.size()) != bag.size())
        throw std::invalid_argument("merge_masks: one mask per subgraph required");
    const int ne = bag.parent->num_edges();
    for (int i = 0; i < bag.size(); ++i)
        if (static_cast<int>(masks[i].size()) != bag.subgraphs[i].num_edges())
            throw std::invalid_argument("merge_masks: mask " + std::to_string(i) +
                                        " misaligned with subgraph edges");
    Explanation out;
    out.parent = bag.parent;
    out.mode = mode;
    out.scores.assign(ne, 0.0);
    if (mode == MergeMode::Max) {
        for (int i = 0; i < bag.size(); ++i)
            for (int k = 0; k < bag.subgraphs[i].num_edges(); ++k) {
                int pe = bag.subgraphs[i].parent_edge_index[k];
                out.scores[pe] = std::max(out.scores[pe], masks[i][k]);
            }
        return out;
    }
    for (int i = 0; i < bag.size(); ++i)
        for (int k = 0; k < bag.subgraphs[i].num_edges(); ++k)
            out.scores[bag.subgraphs[i].parent_edge_index[k]] += masks[i][k];
    if (mode == MergeMode::Mean) {
        for (double& s : out.scores) s /= bag.size();
    } else {
        double mx = 0.0;
        for (double s : out.scores) mx = std::max(mx, s);
        if (mx > 0.0)
            for (double& s : out.scores) s /= mx;
    }
    return out;
}

// The ceil(q * |E|) highest-score edges, ties broken by lower edge index.
inline std::vector<int> top_fraction(const Explanation& expl, double q) {
    if (!(q > 0.0 && q <= 1.0)) throw std::invalid_argument("top_fraction: q must be in (0,1]");
    int ne = static_cast<int>(expl.scores.size());
    int k = static_cast<int>(std::ceil(q * ne));
    std::vector<int> idx(ne);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
        if (expl.scores[a] != expl.scores[b]) return expl.scores[a] > expl.scores[b];
        return a < b;
    });
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

// edge endpoints, merged score, ground-truth flag
inline void write_explanation_csv(const Explanation& expl, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_explanation_csv: cannot write " + path);
    f.precision(17);
    const auto& gt = expl.parent->ground_truth_edges();
    f << "u,v,score,ground_truth\n";
    for (int e = 0; e < expl.parent->num_edges(); ++e) {
        const Edge& ed = expl.parent->edges()[e];
        int g = gt ? (*gt)[e] : 0;
        f << ed.u << "," << ed.v << "," << expl.scores[e] << "," << g << "\n";
    }
}

// Edge width and gray level follow the score; ground-truth edges dashed.
inline void write_explanation_dot(const Explanation& expl, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_explanation_dot: cannot write " + path);
    f << "graph explanation {\n  node [shape=circle, fontsize=10];\n";
    const auto& gt = expl.parent->ground_truth_edges();
    for (int e = 0; e < expl.parent->num_edges(); ++e) {
        const Edge& ed = expl.parent->edges()[e];
        double s = expl.scores[e];
        int gray = static_cast<int>(std::lround(90.0 - 90.0 * s)); // 0 = black
        double width = 0.5 + 3.5 * s;
        f << "  " << ed.u << " -- " << ed.v << " [color=\"gray" << gray << "\", penwidth=" << width;
        if (gt && (*gt)[e]) f << ", style=dashed";
        f << "];\n";
    }
    f << "}\n";
}

} // namespace sgnnx
