#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "sgnnx/explainer.hpp"
#include "sgnnx/merge.hpp"
#include "sgnnx/metrics.hpp"

namespace sgnnx {

struct GraphExplanation {
    int graph_index = -1;
    Explanation merged;
    std::vector<EdgeMask> masks; // per subgraph of the full bag
};

// Deterministic full-bag explanations for each graph: score omega with
// the trained explainer, merge soft masks (or hard, for ablation)
// through edge provenance.
inline std::vector<GraphExplanation> explain_graphs(Explainer& explainer, EsanModel& classifier,
                                                    const std::vector<Graph>& graphs,
                                                    const std::vector<int>& idx,
                                                    const PolicyConfig& policy, MergeMode mode,
                                                    bool merge_hard = false) {
    PolicyConfig full = policy;
    full.max_bag_size = 0; // evaluation always sees the full bag
    std::vector<GraphExplanation> out;
    out.reserve(idx.size());
    for (int gi : idx) {
        SubgraphBag bag = make_bag(graphs[gi], full);
        GraphExplanation ge;
        ge.graph_index = gi;
        ge.masks = explainer.evaluate_masks(classifier, bag);
        std::vector<std::vector<double>> values(bag.size());
        for (int i = 0; i < bag.size(); ++i)
            values[i] = merge_hard ? ge.masks[i].hard : ge.masks[i].soft;
        ge.merged = merge_masks(bag, values, mode);
        out.push_back(std::move(ge));
    }
    return out;
}

// Mean edge AUC and mask size over the evaluated graphs. Graphs whose
// ground truth is single-class (or absent) are excluded from the AUC
// mean; mask size averages over all evaluated graphs.
inline RunResult evaluate_explanations(const std::vector<Graph>& graphs,
                                       const std::vector<GraphExplanation>& expls,
                                       double mask_threshold = 0.5) {
    RunResult r;
    double auc_sum = 0.0;
    int auc_count = 0;
    double mask_sum = 0.0;
    int mask_count = 0;
    for (const GraphExplanation& ge : expls) {
        const Graph& g = graphs[ge.graph_index];
        if (g.num_edges() == 0) continue;
        mask_sum += mask_size_percent(ge.merged, mask_threshold);
        ++mask_count;
        const auto& gt = g.ground_truth_edges();
        if (!gt) continue;
        try {
            auc_sum += auc(ge.merged.scores, *gt);
            ++auc_count;
        } catch (const UndefinedMetricError&) {
            // single-class truth: excluded
        }
    }
    r.mean_auc = auc_count > 0 ? auc_sum / auc_count : 0.0;
    r.mean_mask_size = mask_count > 0 ? mask_sum / mask_count : 0.0;
    r.graphs_evaluated = auc_count;
    return r;
}

// graph id, subgraph id, parent edge index, omega, soft, hard
inline void write_mask_csv(const GraphExplanation& ge, const SubgraphBag& bag,
                           const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_mask_csv: cannot write " + path);
    f.precision(17);
    f << "graph,subgraph,parent_edge,omega,soft,hard\n";
    for (int i = 0; i < bag.size(); ++i)
        for (int k = 0; k < bag.subgraphs[i].num_edges(); ++k)
            f << ge.graph_index << "," << i << "," << bag.subgraphs[i].parent_edge_index[k] << ","
              << ge.masks[i].omega[k] << "," << ge.masks[i].soft[k] << "," << ge.masks[i].hard[k]
              << "\n";
}

// Reads a merged explanation CSV written by write_explanation_csv back
// into score/truth vectors (for the evaluate command).
inline std::pair<std::vector<double>, std::vector<std::uint8_t>> read_explanation_csv(
    const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("read_explanation_csv: cannot read " + path);
    std::vector<double> scores;
    std::vector<std::uint8_t> truth;
    std::string line;
    std::getline(f, line); // header
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::istringstream is(line);
        std::string tok;
        std::vector<std::string> cols;
        while (std::getline(is, tok, ',')) cols.push_back(tok);
        if (cols.size() != 4)
            throw std::runtime_error("read_explanation_csv: bad line in " + path + ": " + line);
        scores.push_back(std::stod(cols[2]));
        truth.push_back(static_cast<std::uint8_t>(std::stoi(cols[3]) != 0));
    }
    return {std::move(scores), std::move(truth)};
}

} // namespace sgnnx
