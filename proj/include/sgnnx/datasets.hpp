#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sgnnx/graph.hpp"
#include "sgnnx/rng.hpp"

namespace sgnnx {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------
// BA-2motifs
// ---------------------------------------------------------------------

namespace detail {

// Barabasi-Albert graph with attachment parameter 1: node t >= 1 attaches
// to one existing node drawn proportionally to degree (repeated-endpoint
// trick). Node 0 is the seed.
inline std::vector<std::pair<int, int>> barabasi_albert_edges(int n, Rng& rng) {
    std::vector<std::pair<int, int>> edges;
    std::vector<int> endpoints; // each node appears once per incident edge
    edges.emplace_back(0, 1);
    endpoints.push_back(0);
    endpoints.push_back(1);
    for (int t = 2; t < n; ++t) {
        int target = endpoints[rng.uniform_int(0, static_cast<int>(endpoints.size()) - 1)];
        edges.emplace_back(target, t);
        endpoints.push_back(target);
        endpoints.push_back(t);
    }
    return edges;
}

// House motif on nodes base..base+4: square 0-1-2-3 plus apex 4 on the
// 0-1 side. 6 edges.
inline std::vector<std::pair<int, int>> house_edges(int base) {
    return {{base + 0, base + 1}, {base + 1, base + 2}, {base + 2, base + 3},
            {base + 3, base + 0}, {base + 0, base + 4}, {base + 1, base + 4}};
}

// 5-cycle on nodes base..base+4. 5 edges.
inline std::vector<std::pair<int, int>> cycle5_edges(int base) {
    return {{base + 0, base + 1}, {base + 1, base + 2}, {base + 2, base + 3},
            {base + 3, base + 4}, {base + 4, base + 0}};
}

} // namespace detail

// 1000 graphs, 500 per class: a 20-node BA base (attachment 1) plus a
// 5-node motif (class 0 house, class 1 five-cycle) hooked to a uniformly
// chosen base node by a single edge. Constant 10-dim features of 0.1.
// ground_truth_edges marks exactly the motif-internal edges.
inline std::vector<Graph> generate_ba2motifs(std::uint64_t seed, int num_graphs = 1000) {
    constexpr int kBaseNodes = 20;
    constexpr int kMotifNodes = 5;
    constexpr int kFeatureDim = 10;
    if (num_graphs % 2 != 0) throw std::invalid_argument("generate_ba2motifs: need even graph count");
    Rng rng(seed);
    std::vector<Graph> out;
    out.reserve(num_graphs);
    for (int label = 0; label < 2; ++label) {
        for (int i = 0; i < num_graphs / 2; ++i) {
            auto edges = detail::barabasi_albert_edges(kBaseNodes, rng);
            auto motif = label == 0 ? detail::house_edges(kBaseNodes) : detail::cycle5_edges(kBaseNodes);
            std::size_t motif_begin = edges.size();
            edges.insert(edges.end(), motif.begin(), motif.end());
            std::size_t motif_end = edges.size();
            int attach = rng.uniform_int(0, kBaseNodes - 1);
            edges.emplace_back(attach, kBaseNodes);
            std::vector<std::uint8_t> gt(edges.size(), 0);
            for (std::size_t e = motif_begin; e < motif_end; ++e) gt[e] = 1;
            Matrix feats(kBaseNodes + kMotifNodes, kFeatureDim, 0.1);
            out.emplace_back(kBaseNodes + kMotifNodes, std::move(edges), std::move(feats), label,
                             std::move(gt));
        }
    }
    return out;
}

// ---------------------------------------------------------------------
// TU plain-text format
// ---------------------------------------------------------------------

namespace tu {

// Default node-label -> atom symbol table for the TU Mutagenicity
// distribution, used to mark NH2/NO2 ground-truth edges when no edge
// label file ships with the data.
inline const std::vector<std::string>& mutagenicity_atoms() {
    static const std::vector<std::string> atoms = {"C", "O",  "Cl", "H",  "N",  "F",  "Br",
                                                   "S", "P",  "I",  "Na", "K",  "Li", "Ca"};
    return atoms;
}

namespace detail {

inline std::string find_prefix(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw IoError("TU loader: not a directory: " + dir.string());
    for (const auto& ent : fs::directory_iterator(dir)) {
        const std::string name = ent.path().filename().string();
        const std::string suffix = "_A.txt";
        if (name.size() > suffix.size() &&
            name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
            return name.substr(0, name.size() - suffix.size());
    }
    throw IoError("TU loader: no *_A.txt in " + dir.string());
}

inline std::vector<std::string> read_lines(const std::filesystem::path& p, bool mandatory) {
    std::ifstream f(p);
    if (!f) {
        if (mandatory) throw IoError("TU loader: missing file " + p.string());
        return {};
    }
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(f, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

inline std::pair<int, int> parse_pair(const std::string& line, const std::string& file, int lineno) {
    std::istringstream is(line);
    int a = 0, b = 0;
    char comma = 0;
    if (!(is >> a >> comma >> b) || comma != ',')
        throw FormatError(file + ":" + std::to_string(lineno) + ": bad edge line '" + line + "'");
    return {a, b};
}

} // namespace detail

// NH2 / NO2 rule: an N bonded to at least 2 H (or at least 2 O) marks its
// N-H (N-O) bonds as ground truth.
inline std::vector<std::uint8_t> mark_nh2_no2(const Graph& g, const std::vector<int>& node_labels,
                                              const std::vector<std::string>& atoms) {
    auto symbol = [&](int v) -> std::string {
        int l = node_labels[v];
        return (l >= 0 && l < static_cast<int>(atoms.size())) ? atoms[l] : "?";
    };
    std::vector<std::uint8_t> gt(g.num_edges(), 0);
    for (int v = 0; v < g.num_nodes(); ++v) {
        if (symbol(v) != "N") continue;
        for (const std::string& partner : {std::string("H"), std::string("O")}) {
            std::vector<int> hits;
            for (int w : g.neighbors(v))
                if (symbol(w) == partner) hits.push_back(w);
            if (hits.size() >= 2)
                for (int w : hits) gt[*g.edge_index(v, w)] = 1;
        }
    }
    return gt;
}

// One Graph per indicator value. Node labels one-hot encoded unless a
// node_attributes file supplies real-valued features. Directed duplicate
// edges collapse to one undirected edge; ground truth comes from the edge
// label file when present (either direction labeled 1), otherwise from
// the NH2/NO2 chemistry rule.
inline std::vector<Graph> load_tu_dataset(const std::string& dir_in,
                                          const std::vector<std::string>& atoms = mutagenicity_atoms()) {
    namespace fs = std::filesystem;
    fs::path dir(dir_in);
    std::string prefix = detail::find_prefix(dir);
    auto file = [&](const std::string& suffix) { return dir / (prefix + suffix); };

    auto a_lines = detail::read_lines(file("_A.txt"), true);
    auto ind_lines = detail::read_lines(file("_graph_indicator.txt"), true);
    auto glab_lines = detail::read_lines(file("_graph_labels.txt"), true);
    auto nlab_lines = detail::read_lines(file("_node_labels.txt"), true);
    auto elab_lines = detail::read_lines(file("_edge_labels.txt"), false);
    auto nattr_lines = detail::read_lines(file("_node_attributes.txt"), false);

    int total_nodes = static_cast<int>(ind_lines.size());
    if (static_cast<int>(nlab_lines.size()) != total_nodes)
        throw FormatError(prefix + "_node_labels.txt: expected " + std::to_string(total_nodes) + " lines");
    if (!elab_lines.empty() && elab_lines.size() != a_lines.size())
        throw FormatError(prefix + "_edge_labels.txt: line count != edge list");
    if (!nattr_lines.empty() && static_cast<int>(nattr_lines.size()) != total_nodes)
        throw FormatError(prefix + "_node_attributes.txt: expected " + std::to_string(total_nodes) + " lines");

    int num_graphs = static_cast<int>(glab_lines.size());
    std::vector<int> node_graph(total_nodes); // 0-based graph per global node
    std::vector<int> node_local(total_nodes);
    std::vector<int> graph_nodes(num_graphs, 0);
    for (int v = 0; v < total_nodes; ++v) {
        int gid = std::stoi(ind_lines[v]);
        if (gid < 1 || gid > num_graphs)
            throw FormatError(prefix + "_graph_indicator.txt:" + std::to_string(v + 1) +
                              ": graph id " + std::to_string(gid) + " out of range");
        node_graph[v] = gid - 1;
        node_local[v] = graph_nodes[gid - 1]++;
    }

    std::vector<int> node_labels(total_nodes);
    for (int v = 0; v < total_nodes; ++v) node_labels[v] = std::stoi(nlab_lines[v]);

    // map raw labels to a dense one-hot layout, label-value order
    std::vector<int> distinct(node_labels);
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    auto label_slot = [&](int l) {
        return static_cast<int>(std::lower_bound(distinct.begin(), distinct.end(), l) - distinct.begin());
    };

    // graph labels -> dense 0-based classes
    std::vector<int> raw_glab(num_graphs);
    for (int g = 0; g < num_graphs; ++g) raw_glab[g] = std::stoi(glab_lines[g]);
    std::vector<int> gdistinct(raw_glab);
    std::sort(gdistinct.begin(), gdistinct.end());
    gdistinct.erase(std::unique(gdistinct.begin(), gdistinct.end()), gdistinct.end());

    // per-graph edge collection (dedup directed pairs)
    struct PendingEdge {
        int u, v;
        std::uint8_t gt;
    };
    std::vector<std::vector<PendingEdge>> edges(num_graphs);
    std::vector<std::map<std::pair<int, int>, std::size_t>> seen(num_graphs);
    bool have_elab = !elab_lines.empty();
    for (std::size_t ln = 0; ln < a_lines.size(); ++ln) {
        auto [a, b] = detail::parse_pair(a_lines[ln], prefix + "_A.txt", static_cast<int>(ln) + 1);
        if (a < 1 || b < 1 || a > total_nodes || b > total_nodes)
            throw FormatError(prefix + "_A.txt:" + std::to_string(ln + 1) + ": node id out of range");
        int ga = node_graph[a - 1], gb = node_graph[b - 1];
        if (ga != gb)
            throw FormatError(prefix + "_A.txt:" + std::to_string(ln + 1) +
                              ": edge crosses graphs " + std::to_string(ga + 1) + " and " +
                              std::to_string(gb + 1));
        int lu = node_local[a - 1], lv = node_local[b - 1];
        if (lu == lv)
            throw FormatError(prefix + "_A.txt:" + std::to_string(ln + 1) + ": self-loop");
        std::uint8_t gt = have_elab && std::stoi(elab_lines[ln]) != 0 ? 1 : 0;
        auto key = std::minmax(lu, lv);
        auto it = seen[ga].find(key);
        if (it == seen[ga].end()) {
            seen[ga].emplace(key, edges[ga].size());
            edges[ga].push_back(PendingEdge{key.first, key.second, gt});
        } else if (gt) {
            edges[ga][it->second].gt = 1; // either direction labeled 1
        }
    }

    bool have_attrs = !nattr_lines.empty();
    int attr_dim = 0;
    std::vector<std::vector<double>> attrs;
    if (have_attrs) {
        attrs.resize(total_nodes);
        for (int v = 0; v < total_nodes; ++v) {
            std::istringstream is(nattr_lines[v]);
            double x;
            char comma;
            while (is >> x) {
                attrs[v].push_back(x);
                is >> comma;
            }
            if (v == 0)
                attr_dim = static_cast<int>(attrs[0].size());
            else if (static_cast<int>(attrs[v].size()) != attr_dim)
                throw FormatError(prefix + "_node_attributes.txt:" + std::to_string(v + 1) +
                                  ": ragged attribute row");
        }
    }

    std::vector<Graph> out;
    out.reserve(num_graphs);
    std::vector<std::vector<int>> per_graph_labels(num_graphs);
    for (int v = 0; v < total_nodes; ++v) per_graph_labels[node_graph[v]].push_back(node_labels[v]);

    for (int g = 0; g < num_graphs; ++g) {
        int n = graph_nodes[g];
        if (n == 0) throw FormatError(prefix + ": graph " + std::to_string(g + 1) + " has no nodes");
        Matrix feats;
        if (have_attrs) {
            feats = Matrix(n, attr_dim);
            for (int v = 0; v < total_nodes; ++v)
                if (node_graph[v] == g)
                    for (int c = 0; c < attr_dim; ++c) feats.at(node_local[v], c) = attrs[v][c];
        } else {
            feats = Matrix(n, static_cast<int>(distinct.size()));
            for (int v = 0; v < total_nodes; ++v)
                if (node_graph[v] == g) feats.at(node_local[v], label_slot(node_labels[v])) = 1.0;
        }
        std::vector<std::pair<int, int>> pairs;
        std::vector<std::uint8_t> gt;
        pairs.reserve(edges[g].size());
        gt.reserve(edges[g].size());
        for (const PendingEdge& e : edges[g]) {
            pairs.emplace_back(e.u, e.v);
            gt.push_back(e.gt);
        }
        int cls = static_cast<int>(std::lower_bound(gdistinct.begin(), gdistinct.end(), raw_glab[g]) -
                                   gdistinct.begin());
        Graph graph(n, std::move(pairs), std::move(feats), cls, std::move(gt));
        if (!have_elab) {
            auto chem_gt = mark_nh2_no2(graph, per_graph_labels[g], atoms);
            graph = Graph(graph.num_nodes(),
                          [&] {
                              std::vector<std::pair<int, int>> p;
                              for (const Edge& e : graph.edges()) p.emplace_back(e.u, e.v);
                              return p;
                          }(),
                          graph.features(), graph.label(), std::move(chem_gt));
        }
        out.push_back(std::move(graph));
    }
    return out;
}

// Writes a dataset in the same layout load_tu_dataset reads (edges
// emitted in both directions). node_labels: one int per node per graph;
// pass empty to write zeros. Real-valued features go to the attributes
// file so loading reproduces them exactly.
inline void write_tu_dataset(const std::vector<Graph>& graphs, const std::string& dir_in,
                             const std::string& prefix,
                             const std::vector<std::vector<int>>& node_labels = {},
                             bool write_attributes = true) {
    namespace fs = std::filesystem;
    fs::path dir(dir_in);
    fs::create_directories(dir);
    std::ofstream fa(dir / (prefix + "_A.txt"));
    std::ofstream fi(dir / (prefix + "_graph_indicator.txt"));
    std::ofstream fg(dir / (prefix + "_graph_labels.txt"));
    std::ofstream fn(dir / (prefix + "_node_labels.txt"));
    std::ofstream fe(dir / (prefix + "_edge_labels.txt"));
    std::ofstream fx;
    if (write_attributes) fx.open(dir / (prefix + "_node_attributes.txt"));
    if (!fa || !fi || !fg || !fn || !fe) throw IoError("write_tu_dataset: cannot write to " + dir_in);
    fa.precision(17);
    if (write_attributes) fx.precision(17);
    int offset = 0;
    for (std::size_t g = 0; g < graphs.size(); ++g) {
        const Graph& gr = graphs[g];
        fg << gr.label() << "\n";
        for (int v = 0; v < gr.num_nodes(); ++v) {
            fi << (g + 1) << "\n";
            fn << (node_labels.empty() ? 0 : node_labels[g][v]) << "\n";
            if (write_attributes) {
                for (int c = 0; c < gr.feature_dim(); ++c)
                    fx << (c ? ", " : "") << gr.features().at(v, c);
                fx << "\n";
            }
        }
        for (int e = 0; e < gr.num_edges(); ++e) {
            const Edge& ed = gr.edges()[e];
            int lab = gr.ground_truth_edges() ? (*gr.ground_truth_edges())[e] : 0;
            fa << (offset + ed.u + 1) << ", " << (offset + ed.v + 1) << "\n";
            fa << (offset + ed.v + 1) << ", " << (offset + ed.u + 1) << "\n";
            fe << lab << "\n" << lab << "\n";
        }
        offset += gr.num_nodes();
    }
}

} // namespace tu

// ---------------------------------------------------------------------
// Splits and manifests
// ---------------------------------------------------------------------

struct SplitIndices {
    std::vector<int> train, val, test;
};

// Deterministic stratified split. Fractions must be positive-or-zero and
// sum to 1 within 1e-9.
inline SplitIndices split_dataset(const std::vector<Graph>& graphs, double train_frac,
                                  double val_frac, double test_frac, std::uint64_t seed) {
    if (train_frac < 0 || val_frac < 0 || test_frac < 0 ||
        std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9)
        throw std::invalid_argument("split_dataset: fractions must be nonnegative and sum to 1");
    std::map<int, std::vector<int>> by_class;
    for (std::size_t i = 0; i < graphs.size(); ++i) by_class[graphs[i].label()].push_back(static_cast<int>(i));
    Rng rng(seed);
    SplitIndices out;
    for (auto& [cls, idx] : by_class) {
        rng.shuffle(idx);
        int n = static_cast<int>(idx.size());
        int n_train = static_cast<int>(std::lround(train_frac * n));
        int n_val = static_cast<int>(std::lround(val_frac * n));
        n_train = std::min(n_train, n);
        n_val = std::min(n_val, n - n_train);
        for (int i = 0; i < n_train; ++i) out.train.push_back(idx[i]);
        for (int i = n_train; i < n_train + n_val; ++i) out.val.push_back(idx[i]);
        for (int i = n_train + n_val; i < n; ++i) out.test.push_back(idx[i]);
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.val.begin(), out.val.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

inline void write_manifest(const std::string& path,
                           const std::vector<std::pair<std::string, std::string>>& entries) {
    std::ofstream f(path);
    if (!f) throw IoError("write_manifest: cannot write " + path);
    for (const auto& [k, v] : entries) f << k << " = " << v << "\n";
}

} // namespace sgnnx
