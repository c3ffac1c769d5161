#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sgnnx/autodiff.hpp"
#include "sgnnx/graph.hpp"
#include "sgnnx/policies.hpp"
#include "sgnnx/rng.hpp"

namespace sgnnx {

struct TrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EsanConfig {
    enum class Encoder { DS, DSS };
    enum class Readout { Mean, Sum };
    Encoder encoder = Encoder::DSS;
    int num_mp_layers = 3;
    int hidden = 32;
    Readout readout = Readout::Mean;
    int set_encoder_hidden = 32;
    int num_classes = 2;
    bool epsilon_learnable = true;

    void validate() const {
        if (num_mp_layers < 1 || hidden < 1 || set_encoder_hidden < 1 || num_classes < 2)
            throw std::invalid_argument("EsanConfig: all dimensions must be positive");
    }
};

inline std::string to_string(EsanConfig::Encoder e) {
    return e == EsanConfig::Encoder::DS ? "ds" : "dss";
}

inline EsanConfig::Encoder encoder_from_string(const std::string& s) {
    if (s == "ds") return EsanConfig::Encoder::DS;
    if (s == "dss") return EsanConfig::Encoder::DSS;
    throw std::invalid_argument("unknown encoder '" + s + "' (expected ds|dss)");
}

namespace detail {

// Directed expansion of a subgraph's retained edges: each undirected edge
// contributes both orientations, both mapped to the same weight slot.
struct DirectedEdges {
    std::vector<int> src, dst, weight_slot;

    static DirectedEdges from_local_edges(const std::vector<std::pair<int, int>>& edges) {
        DirectedEdges d;
        d.src.reserve(edges.size() * 2);
        d.dst.reserve(edges.size() * 2);
        d.weight_slot.reserve(edges.size() * 2);
        for (std::size_t e = 0; e < edges.size(); ++e) {
            auto [u, v] = edges[e];
            d.src.push_back(u);
            d.dst.push_back(v);
            d.weight_slot.push_back(static_cast<int>(e));
            d.src.push_back(v);
            d.dst.push_back(u);
            d.weight_slot.push_back(static_cast<int>(e));
        }
        return d;
    }
};

} // namespace detail

// DS / DSS equivariant encoder built from edge-weighted GIN layers, mean
// subgraph readout, set-encoder MLP and a linear classification head.
// The baseline plain GIN is this model run on a singleton bag.
class EsanModel {
public:
    using Var = ad::Tape::Var;

    struct ForwardOut {
        Var logits = -1;
        std::vector<Var> node_embeddings; // final encoder output per subgraph
    };

    EsanModel(EsanConfig cfg, int in_dim, std::uint64_t seed) : cfg_(cfg), in_dim_(in_dim) {
        cfg_.validate();
        if (in_dim < 1) throw std::invalid_argument("EsanModel: in_dim must be positive");
        Rng rng(seed);
        // biases start at uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)); with the
        // constant node features of synthetic datasets an all-zero bias
        // keeps every embedding a scalar multiple of one vector, which
        // training cannot escape
        auto bias = [&](const std::string& name, int fan_in, int cols) {
            params_.create_uniform(name, 1, cols, 1.0 / std::sqrt(fan_in), rng);
        };
        auto make_gin = [&](const std::string& prefix, int d_in) {
            params_.create(prefix + ".eps", 1, 1); // init 0
            params_.create_glorot(prefix + ".W1", d_in, cfg_.hidden, rng);
            bias(prefix + ".b1", d_in, cfg_.hidden);
            params_.create_glorot(prefix + ".W2", cfg_.hidden, cfg_.hidden, rng);
            bias(prefix + ".b2", cfg_.hidden, cfg_.hidden);
        };
        for (int l = 0; l < cfg_.num_mp_layers; ++l) {
            int d_in = l == 0 ? in_dim_ : cfg_.hidden;
            make_gin("layer" + std::to_string(l) + ".f1", d_in);
            if (cfg_.encoder == EsanConfig::Encoder::DSS)
                make_gin("layer" + std::to_string(l) + ".f2", d_in);
        }
        params_.create_glorot("se.W1", cfg_.hidden, cfg_.set_encoder_hidden, rng);
        bias("se.b1", cfg_.hidden, cfg_.set_encoder_hidden);
        params_.create_glorot("se.W2", cfg_.set_encoder_hidden, cfg_.hidden, rng);
        bias("se.b2", cfg_.set_encoder_hidden, cfg_.hidden);
        params_.create_glorot("head.W", cfg_.hidden, cfg_.num_classes, rng);
        bias("head.b", cfg_.hidden, cfg_.num_classes);
    }

    const EsanConfig& config() const { return cfg_; }
    int in_dim() const { return in_dim_; }
    ad::ParamStore& params() { return params_; }
    const ad::ParamStore& params() const { return params_; }

    // masks: one m_i x 1 tape var per subgraph (absent = unit weights).
    // trainable=false records parameters as frozen leaves so no gradient
    // reaches the classifier (the explainer relies on this).
    ForwardOut forward(ad::Tape& t, const SubgraphBag& bag, const std::vector<Var>* masks,
                       bool trainable) {
        if (bag.subgraphs.empty()) throw std::invalid_argument("EsanModel: empty bag");
        if (masks && static_cast<int>(masks->size()) != bag.size())
            throw std::invalid_argument("EsanModel: mask count != bag size");
        const int M = bag.size();
        for (const Subgraph& s : bag.subgraphs)
            if (s.node_features.cols != in_dim_)
                throw std::invalid_argument("EsanModel: feature dim " +
                                            std::to_string(s.node_features.cols) + " != model in_dim " +
                                            std::to_string(in_dim_));
        if (masks)
            for (int i = 0; i < M; ++i)
                if (t.shape((*masks)[i]).rows != bag.subgraphs[i].num_edges() ||
                    t.shape((*masks)[i]).cols != 1)
                    throw std::invalid_argument("EsanModel: mask shape mismatch on subgraph " +
                                                std::to_string(i));

        std::vector<detail::DirectedEdges> dir(M);
        for (int i = 0; i < M; ++i)
            dir[i] = detail::DirectedEdges::from_local_edges(bag.subgraphs[i].local_edges);

        std::vector<Var> x(M);
        for (int i = 0; i < M; ++i) x[i] = t.leaf(bag.subgraphs[i].node_features);

        const bool dss = cfg_.encoder == EsanConfig::Encoder::DSS;
        detail::DirectedEdges parent_dir;
        if (dss) {
            std::vector<std::pair<int, int>> pe;
            for (const Edge& e : bag.parent->edges()) pe.emplace_back(e.u, e.v);
            parent_dir = detail::DirectedEdges::from_local_edges(pe);
        }

        for (int l = 0; l < cfg_.num_mp_layers; ++l) {
            GinVars f1 = fetch_gin(t, "layer" + std::to_string(l) + ".f1", trainable);
            std::vector<Var> next(M);
            for (int i = 0; i < M; ++i) {
                Var w = masks ? (*masks)[i] : -1;
                next[i] = gin_layer(t, x[i], dir[i], bag.subgraphs[i].num_nodes(), w, f1);
            }
            if (dss) {
                GinVars f2 = fetch_gin(t, "layer" + std::to_string(l) + ".f2", trainable);
                int np = bag.parent->num_nodes();
                int pe_count = bag.parent->num_edges();
                // shared term inputs: node features and weighted adjacency
                // aggregated over the bag on the parent index space. The
                // aggregate is normalized by bag size so its scale stays
                // comparable to a single subgraph regardless of bag size
                // (a bag of one is unaffected).
                const double inv_m = 1.0 / M;
                Var x_sum = -1;
                for (int i = 0; i < M; ++i) {
                    Var lifted = t.scatter_add_rows(x[i], bag.subgraphs[i].nodes, np);
                    x_sum = x_sum < 0 ? lifted : t.add(x_sum, lifted);
                }
                x_sum = t.scalar_mul(x_sum, inv_m);
                Var w_sum = -1;
                if (pe_count > 0) {
                    if (masks) {
                        for (int i = 0; i < M; ++i) {
                            if (bag.subgraphs[i].num_edges() == 0) continue;
                            Var lifted = t.scatter_add_rows((*masks)[i],
                                                            bag.subgraphs[i].parent_edge_index, pe_count);
                            w_sum = w_sum < 0 ? lifted : t.add(w_sum, lifted);
                        }
                        w_sum = w_sum < 0 ? t.zeros(pe_count, 1) : t.scalar_mul(w_sum, inv_m);
                    } else {
                        std::vector<double> counts(pe_count, 0.0);
                        for (int i = 0; i < M; ++i)
                            for (int pe : bag.subgraphs[i].parent_edge_index) counts[pe] += inv_m;
                        w_sum = t.leaf(pe_count, 1, counts);
                    }
                }
                Var shared = gin_layer(t, x_sum, parent_dir, np, w_sum, f2);
                for (int i = 0; i < M; ++i)
                    next[i] = t.add(next[i], t.gather_rows(shared, bag.subgraphs[i].nodes));
            }
            x = std::move(next);
        }

        ForwardOut out;
        out.node_embeddings = x;

        Var z_acc = -1;
        for (int i = 0; i < M; ++i) {
            Var z = cfg_.readout == EsanConfig::Readout::Mean ? t.row_mean(x[i]) : t.row_sum(x[i]);
            z_acc = z_acc < 0 ? z : t.add(z_acc, z);
        }
        Var z_bar = t.scalar_mul(z_acc, 1.0 / M);

        Var h = t.relu(t.add_row(t.matmul(z_bar, fetch(t, "se.W1", trainable)),
                                 fetch(t, "se.b1", trainable)));
        Var g = t.add_row(t.matmul(h, fetch(t, "se.W2", trainable)), fetch(t, "se.b2", trainable));
        out.logits = t.add_row(t.matmul(g, fetch(t, "head.W", trainable)), fetch(t, "head.b", trainable));
        return out;
    }

    int predict(const SubgraphBag& bag) {
        ad::Tape t;
        ForwardOut out = forward(t, bag, nullptr, false);
        const auto& z = t.val(out.logits);
        int best = 0;
        for (std::size_t j = 1; j < z.size(); ++j)
            if (z[j] > z[best]) best = static_cast<int>(j);
        return best;
    }

    void save(const std::string& path,
              std::vector<std::pair<std::string, std::string>> header = {}) const {
        header.emplace_back("encoder", to_string(cfg_.encoder));
        header.emplace_back("num_mp_layers", std::to_string(cfg_.num_mp_layers));
        header.emplace_back("hidden", std::to_string(cfg_.hidden));
        header.emplace_back("set_encoder_hidden", std::to_string(cfg_.set_encoder_hidden));
        header.emplace_back("num_classes", std::to_string(cfg_.num_classes));
        header.emplace_back("readout", cfg_.readout == EsanConfig::Readout::Mean ? "mean" : "sum");
        header.emplace_back("epsilon_learnable", cfg_.epsilon_learnable ? "1" : "0");
        header.emplace_back("in_dim", std::to_string(in_dim_));
        params_.save(path, header);
    }

    // Rebuilds a model from a checkpoint written by save(). The returned
    // header map carries any extra run metadata (policy etc).
    static std::pair<EsanModel, std::unordered_map<std::string, std::string>> load(
        const std::string& path) {
        auto h = ad::ParamStore::read_header(path);
        auto need = [&](const std::string& k) {
            auto it = h.find(k);
            if (it == h.end()) throw std::runtime_error("checkpoint missing header key " + k);
            return it->second;
        };
        EsanConfig cfg;
        cfg.encoder = encoder_from_string(need("encoder"));
        cfg.num_mp_layers = std::stoi(need("num_mp_layers"));
        cfg.hidden = std::stoi(need("hidden"));
        cfg.set_encoder_hidden = std::stoi(need("set_encoder_hidden"));
        cfg.num_classes = std::stoi(need("num_classes"));
        cfg.readout = need("readout") == "sum" ? EsanConfig::Readout::Sum : EsanConfig::Readout::Mean;
        cfg.epsilon_learnable = need("epsilon_learnable") == "1";
        EsanModel model(cfg, std::stoi(need("in_dim")), 0);
        model.params_.load(path);
        return {std::move(model), std::move(h)};
    }

private:
    struct GinVars {
        Var eps, W1, b1, W2, b2;
        bool eps_trainable;
    };

    Var fetch(ad::Tape& t, const std::string& name, bool trainable) {
        ad::Param& p = params_.get(name);
        return trainable ? t.param(p) : t.frozen(p);
    }

    GinVars fetch_gin(ad::Tape& t, const std::string& prefix, bool trainable) {
        GinVars g;
        g.eps = fetch(t, prefix + ".eps", trainable && cfg_.epsilon_learnable);
        g.W1 = fetch(t, prefix + ".W1", trainable);
        g.b1 = fetch(t, prefix + ".b1", trainable);
        g.W2 = fetch(t, prefix + ".W2", trainable);
        g.b2 = fetch(t, prefix + ".b2", trainable);
        return g;
    }

    // X_i <- gamma((1+eps) X_i + sum_j w_ij X_j), gamma a 2-layer relu MLP.
    // w < 0 means unit weights.
    Var gin_layer(ad::Tape& t, Var x, const detail::DirectedEdges& dir, int num_nodes, Var w,
                  const GinVars& p) {
        Var agg;
        if (!dir.src.empty()) {
            Var msg = t.gather_rows(x, dir.src);
            if (w >= 0) {
                Var w_dir = t.gather_rows(w, dir.weight_slot);
                msg = t.scale_rows(msg, w_dir);
            }
            agg = t.scatter_add_rows(msg, dir.dst, num_nodes);
        } else {
            agg = t.zeros(num_nodes, t.shape(x).cols);
        }
        Var one_plus_eps = t.add(p.eps, t.scalar(1.0));
        Var pre = t.add(t.scale_by_scalar(x, one_plus_eps), agg);
        Var h = t.relu(t.add_row(t.matmul(pre, p.W1), p.b1));
        return t.add_row(t.matmul(h, p.W2), p.b2);
    }

    EsanConfig cfg_;
    int in_dim_;
    ad::ParamStore params_;
};

// ---------------------------------------------------------------------
// Classifier training
// ---------------------------------------------------------------------

struct TrainConfig {
    int epochs = 100;
    double lr = 1e-3;
    int batch_size = 0;     // 0 = full batch
    double grad_clip = 0.0; // max gradient L2 norm per step, 0 disables
    // Weight of the reference-calibration term: mean squared pairwise
    // difference of the logits under an all-zero edge mask. Keeping the
    // fully-masked reference near the decision boundary preserves a
    // fidelity gradient for every class when edge masks are learned on
    // top of the frozen classifier. 0 disables.
    double calib_coeff = 0.0;
    // Probability of dropping each retained edge (via a random binary
    // edge mask) during training. Makes global edge counts an unreliable
    // signal and matches the masked inputs seen at explanation time.
    // 0 disables.
    double edge_dropout = 0.0;
    std::uint64_t seed = 0;
    double early_stop_train_acc = 0.0; // 0 disables
};

struct EpochRow {
    int epoch;
    double train_loss;
    double train_acc;
    double val_acc;
};

struct TrainResult {
    std::vector<EpochRow> history;
    double best_val_acc = 0.0;
    double final_train_acc = 0.0;
};

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0) {
    std::uint64_t h = a * 0x9e3779b97f4a7c15ULL + 0x2545F4914F6CDD1DULL;
    h ^= b + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h ^= c + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
}

} // namespace detail

// Full (deterministic) bags for a set of graphs under one policy.
inline std::vector<SubgraphBag> extract_bags(const std::vector<Graph>& graphs,
                                             const PolicyConfig& policy) {
    std::vector<SubgraphBag> bags;
    bags.reserve(graphs.size());
    for (const Graph& g : graphs) bags.push_back(make_bag(g, policy));
    return bags;
}

inline double accuracy(EsanModel& model, const std::vector<SubgraphBag>& bags,
                       const std::vector<Graph>& graphs, const std::vector<int>& idx) {
    if (idx.empty()) return 0.0;
    int hits = 0;
    for (int i : idx)
        if (model.predict(bags[i]) == graphs[i].label()) ++hits;
    return static_cast<double>(hits) / static_cast<double>(idx.size());
}

// Adam on softmax cross-entropy with gradients accumulated over
// minibatches (batch_size 0 = the whole train set per step), bags
// optionally resampled each epoch. Keeps the best-val parameter
// snapshot (last epoch when the val set is empty).
inline TrainResult train_classifier(EsanModel& model, const std::vector<Graph>& graphs,
                                    const std::vector<int>& train_idx,
                                    const std::vector<int>& val_idx, const PolicyConfig& policy,
                                    const TrainConfig& tc) {
    if (train_idx.empty()) throw std::invalid_argument("train_classifier: empty train set");
    std::vector<SubgraphBag> full_bags = extract_bags(graphs, policy);

    TrainResult result;
    std::vector<double> best_params = model.params().flatten_values();
    double best_val = -1.0;
    double best_train_at_val = -1.0;
    bool stopped_early = false;
    Rng shuffle_rng(detail::mix_seed(tc.seed, 0xABCD));
    const std::size_t batch = tc.batch_size > 0 ? static_cast<std::size_t>(tc.batch_size)
                                                : train_idx.size();

    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        std::vector<int> order(train_idx);
        shuffle_rng.shuffle(order);
        double loss_sum = 0.0;
        int hits = 0;
        for (std::size_t start = 0; start < order.size(); start += batch) {
            std::size_t end = std::min(order.size(), start + batch);
            model.params().zero_grad();
            for (std::size_t step = start; step < end; ++step) {
                int gi = order[step];
                const SubgraphBag* bag = &full_bags[gi];
                SubgraphBag sampled;
                if (policy.max_bag_size > 0 && bag->size() > policy.max_bag_size) {
                    sampled = subsample_bag(*bag, policy.max_bag_size,
                                            detail::mix_seed(tc.seed, epoch, gi));
                    bag = &sampled;
                }
                ad::Tape t;
                std::vector<ad::Tape::Var> drop_masks;
                const std::vector<ad::Tape::Var>* masks_ptr = nullptr;
                if (tc.edge_dropout > 0.0) {
                    Rng drop_rng(detail::mix_seed(tc.seed ^ 0xD50Full, epoch, gi));
                    drop_masks.reserve(bag->size());
                    for (int i = 0; i < bag->size(); ++i) {
                        std::vector<double> m(bag->subgraphs[i].num_edges(), 1.0);
                        for (double& v : m)
                            if (drop_rng.uniform(0.0, 1.0) < tc.edge_dropout) v = 0.0;
                        drop_masks.push_back(
                            t.leaf(bag->subgraphs[i].num_edges(), 1, m));
                    }
                    masks_ptr = &drop_masks;
                }
                auto out = model.forward(t, *bag, masks_ptr, true);
                const auto& z = t.val(out.logits);
                int pred = 0;
                for (std::size_t j = 1; j < z.size(); ++j)
                    if (z[j] > z[pred]) pred = static_cast<int>(j);
                if (pred == graphs[gi].label()) ++hits;
                ad::Tape::Var loss = t.scalar_mul(
                    t.softmax_cross_entropy(out.logits, graphs[gi].label()),
                    1.0 / static_cast<double>(end - start));
                double lv = t.scalar_val(loss) * static_cast<double>(end - start);
                if (!std::isfinite(lv))
                    throw TrainingError("train_classifier: non-finite loss at epoch " +
                                        std::to_string(epoch));
                loss_sum += lv;
                t.backward(loss);
            }
            if (tc.calib_coeff > 0.0) {
                const SubgraphBag& ref = full_bags[order[start]];
                ad::Tape t;
                std::vector<ad::Tape::Var> zero_masks;
                zero_masks.reserve(ref.size());
                for (int i = 0; i < ref.size(); ++i)
                    zero_masks.push_back(t.zeros(ref.subgraphs[i].num_edges(), 1));
                auto out = model.forward(t, ref, &zero_masks, true);
                int c = model.config().num_classes;
                int npairs = c * (c - 1) / 2;
                ad::Tape::Var sq_sum = -1;
                for (int i = 0; i < c; ++i)
                    for (int j = i + 1; j < c; ++j) {
                        std::vector<double> sel(c, 0.0);
                        sel[i] = 1.0;
                        sel[j] = -1.0;
                        ad::Tape::Var d = t.matmul(out.logits, t.leaf(c, 1, sel));
                        ad::Tape::Var sq = t.scale_by_scalar(d, d);
                        sq_sum = sq_sum < 0 ? sq : t.add(sq_sum, sq);
                    }
                ad::Tape::Var calib = t.scalar_mul(sq_sum, tc.calib_coeff / npairs);
                t.backward(calib);
            }
            if (tc.grad_clip > 0.0) model.params().clip_grad_norm(tc.grad_clip);
            model.params().adam_step(tc.lr);
        }
        double train_acc = static_cast<double>(hits) / order.size();
        double val_acc = accuracy(model, full_bags, graphs, val_idx);
        result.history.push_back(EpochRow{epoch, loss_sum / order.size(), train_acc, val_acc});
        // val accuracy decides the snapshot; ties go to train accuracy so
        // long runs keep improving once the small val set saturates
        if (!val_idx.empty() &&
            (val_acc > best_val || (val_acc == best_val && train_acc > best_train_at_val))) {
            best_val = val_acc;
            best_train_at_val = train_acc;
            best_params = model.params().flatten_values();
        }
        // Accuracy over subsampled bags only gates the (more expensive)
        // full-bag check; the stop itself is decided on full bags, and
        // the current parameters are kept in that case.
        if (tc.early_stop_train_acc > 0.0 && train_acc >= tc.early_stop_train_acc &&
            accuracy(model, full_bags, graphs, train_idx) >= tc.early_stop_train_acc) {
            stopped_early = true;
            break;
        }
    }
    if (!val_idx.empty() && !stopped_early)
        model.params().load_values(best_params);
    result.best_val_acc = std::max(best_val, 0.0);
    result.final_train_acc = accuracy(model, full_bags, graphs, train_idx);
    return result;
}

inline void write_history_csv(const std::string& path, const std::vector<EpochRow>& rows) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_history_csv: cannot write " + path);
    f << "epoch,train_loss,train_acc,val_acc\n";
    for (const EpochRow& r : rows)
        f << r.epoch << "," << r.train_loss << "," << r.train_acc << "," << r.val_acc << "\n";
}

} // namespace sgnnx
