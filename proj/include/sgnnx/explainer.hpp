#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "sgnnx/autodiff.hpp"
#include "sgnnx/esan.hpp"
#include "sgnnx/graph.hpp"
#include "sgnnx/policies.hpp"
#include "sgnnx/rng.hpp"

namespace sgnnx {

// Noise injected into the concrete relaxation. Gumbel is the
// xi = -log(-log u) form used for training; Logistic is the original
// log(u) - log(1-u) binary-concrete form.
enum class NoiseKind { Gumbel, Logistic };

inline std::string to_string(NoiseKind n) {
    return n == NoiseKind::Gumbel ? "gumbel" : "logistic";
}

inline NoiseKind noise_from_string(const std::string& s) {
    if (s == "gumbel") return NoiseKind::Gumbel;
    if (s == "logistic") return NoiseKind::Logistic;
    throw std::invalid_argument("unknown noise '" + s + "' (expected gumbel|logistic)");
}

struct ExplainerConfig {
    int mlp_hidden = 32;
    double tau_init = 5.0;
    double tau_final = 0.1;
    double threshold = 0.5;
    double l1_coeff = 0.05;
    int epochs = 20;
    double lr = 3e-3;
    int batch_size = 0;     // 0 = full batch
    double grad_clip = 0.0; // max gradient L2 norm per step, 0 disables
    // Epochs over which the sparsity weight ramps linearly from 0 to
    // l1_coeff. Starting with fidelity only avoids collapsing every mask
    // to zero before useful edges are identified. 0 applies l1_coeff
    // from the first epoch.
    int l1_warmup_epochs = 0;
    std::uint64_t seed = 0;
    NoiseKind noise = NoiseKind::Gumbel;

    void validate() const {
        if (mlp_hidden < 1) throw std::invalid_argument("ExplainerConfig: mlp_hidden must be positive");
        if (tau_init <= 0.0 || tau_final <= 0.0)
            throw std::invalid_argument("ExplainerConfig: temperatures must be positive");
        if (!(threshold > 0.0 && threshold < 1.0))
            throw std::invalid_argument("ExplainerConfig: threshold must be in (0,1)");
        if (l1_coeff < 0.0) throw std::invalid_argument("ExplainerConfig: l1_coeff must be >= 0");
    }
};

// Per-subgraph mask values aligned with retained edges.
struct EdgeMask {
    std::vector<double> omega;
    std::vector<double> soft;
    std::vector<double> hard;
};

// The adapted PGExplainer: one shared MLP scoring every edge of every
// subgraph from the frozen encoder's endpoint embeddings.
class Explainer {
public:
    using Var = ad::Tape::Var;

    Explainer(ExplainerConfig cfg, int embedding_dim) : cfg_(cfg), emb_dim_(embedding_dim) {
        cfg_.validate();
        Rng rng(detail::mix_seed(cfg_.seed, 0x517EC0DE));
        params_.create_glorot("mlp.W1", 2 * emb_dim_, cfg_.mlp_hidden, rng);
        params_.create("mlp.b1", 1, cfg_.mlp_hidden);
        params_.create_glorot("mlp.W2", cfg_.mlp_hidden, 1, rng);
        params_.create("mlp.b2", 1, 1);
    }

    const ExplainerConfig& config() const { return cfg_; }
    ad::ParamStore& params() { return params_; }
    const ad::ParamStore& params() const { return params_; }

    // Latent scores, one per retained edge. The per-edge MLP input is
    // concat(E_i + E_j, |E_i - E_j|), so omega is invariant to edge
    // orientation by construction.
    Var edge_logits(ad::Tape& t, Var embeddings, const Subgraph& s, bool trainable = true) {
        if (t.shape(embeddings).rows != s.num_nodes())
            throw std::invalid_argument("edge_logits: embedding rows != subgraph nodes");
        if (s.num_edges() == 0)
            throw std::invalid_argument("edge_logits: subgraph has no edges");
        std::vector<int> us, vs;
        us.reserve(s.num_edges());
        vs.reserve(s.num_edges());
        for (auto [u, v] : s.local_edges) {
            us.push_back(u);
            vs.push_back(v);
        }
        Var ei = t.gather_rows(embeddings, us);
        Var ej = t.gather_rows(embeddings, vs);
        Var sum = t.add(ei, ej);
        Var diff = t.abs(t.sub(ei, ej));
        Var feat = t.concat_cols(sum, diff);
        auto p = [&](const std::string& n) {
            return trainable ? t.param(params_.get(n)) : t.frozen(params_.get(n));
        };
        Var h = t.relu(t.add_row(t.matmul(feat, p("mlp.W1")), p("mlp.b1")));
        return t.add_row(t.matmul(h, p("mlp.W2")), p("mlp.b2"));
    }

    // e = sigmoid((omega + noise) / tau); u must lie in (0,1) elementwise.
    static Var sample_soft_mask(ad::Tape& t, Var omega, double tau, const std::vector<double>& u,
                                NoiseKind noise) {
        if (tau <= 0.0) throw std::invalid_argument("sample_soft_mask: tau must be positive");
        const auto& shape = t.shape(omega);
        if (static_cast<int>(u.size()) != shape.size())
            throw std::invalid_argument("sample_soft_mask: draw count != omega size");
        std::vector<double> xi(u.size());
        for (std::size_t i = 0; i < u.size(); ++i) {
            if (!(u[i] > 0.0 && u[i] < 1.0))
                throw std::invalid_argument("sample_soft_mask: u must be in (0,1)");
            xi[i] = noise == NoiseKind::Gumbel ? -std::log(-std::log(u[i]))
                                               : std::log(u[i]) - std::log(1.0 - u[i]);
        }
        Var noise_leaf = t.leaf(shape.rows, shape.cols, xi);
        return t.sigmoid(t.scalar_mul(t.add(omega, noise_leaf), 1.0 / tau));
    }

    static Var harden(ad::Tape& t, Var soft, double threshold) {
        return t.straight_through_threshold(soft, threshold);
    }

    // L_exp = CE(masked logits, class predicted on the unmasked input)
    //       + l1_coeff * mean over subgraphs of the mean soft-mask value.
    // The l1 surrogate runs on soft masks; the hard masks drive the
    // forward pass, so this is the only path with usable gradients.
    static Var explainer_loss(ad::Tape& t, Var masked_logits, int original_class,
                              const std::vector<Var>& soft_masks, double l1_coeff) {
        Var loss = t.softmax_cross_entropy(masked_logits, original_class);
        if (l1_coeff > 0.0 && !soft_masks.empty()) {
            Var acc = -1;
            for (Var m : soft_masks) {
                Var mm = t.mean_all(t.abs(m));
                acc = acc < 0 ? mm : t.add(acc, mm);
            }
            loss = t.add(loss, t.scalar_mul(acc, l1_coeff / static_cast<double>(soft_masks.size())));
        }
        return loss;
    }

    double tau_at_epoch(int epoch) const {
        if (cfg_.epochs <= 1) return cfg_.tau_final;
        double r = static_cast<double>(epoch) / (cfg_.epochs - 1);
        return cfg_.tau_init * std::pow(cfg_.tau_final / cfg_.tau_init, r);
    }

    // Deterministic per-subgraph masks for a frozen classifier: soft =
    // sigmoid(omega), hard = [soft > threshold]. Used for merging and
    // the mask dumps.
    std::vector<EdgeMask> evaluate_masks(EsanModel& classifier, const SubgraphBag& bag) {
        ad::Tape t;
        auto enc = classifier.forward(t, bag, nullptr, false);
        std::vector<EdgeMask> out(bag.size());
        for (int i = 0; i < bag.size(); ++i) {
            const Subgraph& s = bag.subgraphs[i];
            if (s.num_edges() == 0) continue;
            Var omega = edge_logits(t, enc.node_embeddings[i], s, false);
            out[i].omega = t.val(omega);
            out[i].soft.resize(out[i].omega.size());
            out[i].hard.resize(out[i].omega.size());
            for (std::size_t e = 0; e < out[i].omega.size(); ++e) {
                out[i].soft[e] = 1.0 / (1.0 + std::exp(-out[i].omega[e]));
                out[i].hard[e] = out[i].soft[e] > cfg_.threshold ? 1.0 : 0.0;
            }
        }
        return out;
    }

private:
    ExplainerConfig cfg_;
    int emb_dim_;
    ad::ParamStore params_;
};

struct ExplainerTrainResult {
    std::vector<double> epoch_loss;
    std::vector<double> eval_loss;
    int best_epoch = -1;
};

namespace detail {

// Fidelity of the current ranking at a fixed sparsity level: keep the
// top quarter of each subgraph's edges by omega, forward the classifier
// under those hard masks and average the cross-entropy against the
// unmasked prediction. Depends only on the edge ranking, so degenerate
// all-off / all-on mask levels are not rewarded.
inline double ranking_fidelity_loss(Explainer& explainer, EsanModel& classifier,
                                    const std::vector<Graph>& graphs,
                                    const std::vector<int>& idx,
                                    const std::vector<SubgraphBag>& bags) {
    (void)graphs;
    double total = 0.0;
    int counted = 0;
    for (int gi : idx) {
        const SubgraphBag& bag = bags[gi];
        if (bag.parent->num_edges() == 0) continue;
        auto masks = explainer.evaluate_masks(classifier, bag);
        ad::Tape t;
        auto unmasked = classifier.forward(t, bag, nullptr, false);
        const auto& z = t.val(unmasked.logits);
        int original_class = 0;
        for (std::size_t j = 1; j < z.size(); ++j)
            if (z[j] > z[original_class]) original_class = static_cast<int>(j);
        std::vector<ad::Tape::Var> hard;
        hard.reserve(bag.size());
        for (int i = 0; i < bag.size(); ++i) {
            const auto& om = masks[i].omega;
            int n = static_cast<int>(om.size());
            std::vector<double> keep(n, 0.0);
            if (n > 0) {
                int k = std::max(1, (n + 3) / 4);
                std::vector<int> ord(n);
                for (int e = 0; e < n; ++e) ord[e] = e;
                std::sort(ord.begin(), ord.end(),
                          [&](int a, int b) { return om[a] > om[b]; });
                for (int e = 0; e < k; ++e) keep[ord[e]] = 1.0;
            }
            hard.push_back(t.leaf(n, 1, keep));
        }
        auto masked = classifier.forward(t, bag, &hard, false);
        total += t.scalar_val(t.softmax_cross_entropy(masked.logits, original_class));
        ++counted;
    }
    return counted > 0 ? total / counted : 0.0;
}

} // namespace detail

// Trains the explainer MLP against a frozen classifier: per graph, run
// the unmasked encoder for embeddings and the reference prediction,
// score omega per subgraph, sample and harden masks, forward the
// classifier under the hard masks and step the explainer only.
inline ExplainerTrainResult train_explainer(Explainer& explainer, EsanModel& classifier,
                                            const std::vector<Graph>& graphs,
                                            const std::vector<int>& train_idx,
                                            const PolicyConfig& policy) {
    const ExplainerConfig& cfg = explainer.config();
    std::vector<SubgraphBag> full_bags = extract_bags(graphs, policy);
    std::vector<double> frozen_before = classifier.params().flatten_values();

    ExplainerTrainResult result;
    Rng shuffle_rng(detail::mix_seed(cfg.seed, 0x0BA6));
    Rng noise_rng(detail::mix_seed(cfg.seed, 0x7015E));

    const std::size_t batch = cfg.batch_size > 0 ? static_cast<std::size_t>(cfg.batch_size)
                                                 : train_idx.size();

    // Deterministic objective on a fixed train subsample drives snapshot
    // selection; the sampled objective of late epochs is often dominated
    // by a degenerate all-off equilibrium.
    std::vector<int> eval_idx;
    {
        std::size_t stride = std::max<std::size_t>(1, train_idx.size() / 50);
        for (std::size_t i = 0; i < train_idx.size(); i += stride) eval_idx.push_back(train_idx[i]);
    }
    std::vector<double> best_params = explainer.params().flatten_values();
    double best_eval = std::numeric_limits<double>::infinity();
    int best_epoch_local = -1;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double tau = explainer.tau_at_epoch(epoch);
        double l1_now = cfg.l1_coeff;
        if (cfg.l1_warmup_epochs > 0 && epoch < cfg.l1_warmup_epochs)
            l1_now = cfg.l1_coeff * epoch / cfg.l1_warmup_epochs;
        std::vector<int> order(train_idx);
        shuffle_rng.shuffle(order);
        double loss_sum = 0.0;
        int steps = 0;
        for (std::size_t start = 0; start < order.size(); start += batch) {
            std::size_t end = std::min(order.size(), start + batch);
            explainer.params().zero_grad();
            int chunk_steps = 0;
            for (std::size_t step = start; step < end; ++step) {
                int gi = order[step];
                const SubgraphBag* bag = &full_bags[gi];
                SubgraphBag sampled;
                if (policy.max_bag_size > 0 && bag->size() > policy.max_bag_size) {
                    sampled = subsample_bag(*bag, policy.max_bag_size,
                                            detail::mix_seed(cfg.seed, epoch, gi));
                    bag = &sampled;
                }
                if (bag->parent->num_edges() == 0) continue;

                ad::Tape t;
                auto unmasked = classifier.forward(t, *bag, nullptr, false);
                const auto& z = t.val(unmasked.logits);
                int original_class = 0;
                for (std::size_t j = 1; j < z.size(); ++j)
                    if (z[j] > z[original_class]) original_class = static_cast<int>(j);

                std::vector<ad::Tape::Var> soft_masks, hard_masks;
                soft_masks.reserve(bag->size());
                hard_masks.reserve(bag->size());
                bool any_edges = false;
                for (int i = 0; i < bag->size(); ++i) {
                    const Subgraph& s = bag->subgraphs[i];
                    if (s.num_edges() == 0) {
                        hard_masks.push_back(t.zeros(0, 1));
                        continue;
                    }
                    any_edges = true;
                    ad::Tape::Var omega =
                        explainer.edge_logits(t, unmasked.node_embeddings[i], s, true);
                    std::vector<double> u(s.num_edges());
                    for (double& x : u) x = noise_rng.uniform_open();
                    ad::Tape::Var soft = Explainer::sample_soft_mask(t, omega, tau, u, cfg.noise);
                    soft_masks.push_back(soft);
                    hard_masks.push_back(Explainer::harden(t, soft, cfg.threshold));
                }
                if (!any_edges) continue;

                auto masked = classifier.forward(t, *bag, &hard_masks, false);
                ad::Tape::Var loss = Explainer::explainer_loss(t, masked.logits, original_class,
                                                               soft_masks, l1_now);
                loss = t.scalar_mul(loss, 1.0 / static_cast<double>(end - start));
                double lv = t.scalar_val(loss) * static_cast<double>(end - start);
                if (!std::isfinite(lv))
                    throw TrainingError("train_explainer: non-finite loss at epoch " +
                                        std::to_string(epoch));
                loss_sum += lv;
                ++steps;
                ++chunk_steps;
                t.backward(loss);
            }
            if (chunk_steps == 0) continue;
            if (cfg.grad_clip > 0.0) explainer.params().clip_grad_norm(cfg.grad_clip);
            explainer.params().adam_step(cfg.lr);
        }
        result.epoch_loss.push_back(steps > 0 ? loss_sum / steps : 0.0);
        double ev = detail::ranking_fidelity_loss(explainer, classifier, graphs,
                                                         eval_idx, full_bags);
        result.eval_loss.push_back(ev);
        if (ev < best_eval) {
            best_eval = ev;
            best_epoch_local = epoch;
            best_params = explainer.params().flatten_values();
        }
    }
    explainer.params().load_values(best_params);
    result.best_epoch = best_epoch_local;

    // the classifier must come out bit-identical
    std::vector<double> frozen_after = classifier.params().flatten_values();
    if (frozen_before != frozen_after)
        throw std::logic_error("train_explainer: classifier parameters changed during training");
    return result;
}

} // namespace sgnnx
