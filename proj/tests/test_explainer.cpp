#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "sgnnx/datasets.hpp"
#include "sgnnx/explainer.hpp"

using namespace sgnnx;

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Subgraph two_node_subgraph(std::pair<int, int> local_edge) {
    Subgraph s;
    s.nodes = {0, 1};
    s.parent_edge_index = {0};
    s.local_edges = {local_edge};
    s.node_features = Matrix(2, 2, 0.0);
    return s;
}

} // namespace

TEST_CASE("edge logits are invariant to edge orientation") {
    ExplainerConfig cfg;
    cfg.mlp_hidden = 4;
    Explainer ex(cfg, 3);
    Matrix emb(2, 3);
    emb.at(0, 0) = 0.3; emb.at(0, 1) = -0.7; emb.at(0, 2) = 1.1;
    emb.at(1, 0) = -0.2; emb.at(1, 1) = 0.4; emb.at(1, 2) = 0.9;

    ad::Tape t;
    ad::Tape::Var e = t.leaf(emb);
    double a = t.scalar_val(ex.edge_logits(t, e, two_node_subgraph({0, 1}), false));
    double b = t.scalar_val(ex.edge_logits(t, e, two_node_subgraph({1, 0}), false));
    CHECK(a == Catch::Approx(b).margin(1e-15));
}

TEST_CASE("edge logits reduce to the output bias when the mlp is zeroed") {
    ExplainerConfig cfg;
    cfg.mlp_hidden = 4;
    Explainer ex(cfg, 3);
    for (std::size_t i = 0; i < ex.params().count(); ++i)
        std::fill(ex.params().at(i).value.begin(), ex.params().at(i).value.end(), 0.0);
    ex.params().get("mlp.b2").value[0] = 1.25;

    ad::Tape t;
    ad::Tape::Var e = t.leaf(Matrix(2, 3, 0.7));
    double v = t.scalar_val(ex.edge_logits(t, e, two_node_subgraph({0, 1}), false));
    CHECK(v == Catch::Approx(1.25));

    Subgraph edgeless = two_node_subgraph({0, 1});
    edgeless.parent_edge_index.clear();
    edgeless.local_edges.clear();
    CHECK_THROWS_AS(ex.edge_logits(t, e, edgeless, false), std::invalid_argument);
}

TEST_CASE("soft mask sampling point values") {
    ad::Tape t;
    ad::Tape::Var omega0 = t.zeros(1, 1);

    // median draw: sigmoid(-log(log 2)) for zero logits at unit temperature
    ad::Tape::Var g = Explainer::sample_soft_mask(t, omega0, 1.0, {0.5}, NoiseKind::Gumbel);
    CHECK(t.scalar_val(g) == Catch::Approx(0.5906161091496412).margin(1e-12));

    // the logistic median draw adds no noise at all
    ad::Tape::Var omega = t.leaf(1, 1, {0.7});
    ad::Tape::Var l = Explainer::sample_soft_mask(t, omega, 2.0, {0.5}, NoiseKind::Logistic);
    CHECK(t.scalar_val(l) == Catch::Approx(sigmoid(0.35)).margin(1e-15));

    // extreme draws saturate toward the mask bounds
    ad::Tape::Var lo = Explainer::sample_soft_mask(t, omega0, 1.0, {1e-12}, NoiseKind::Logistic);
    ad::Tape::Var hi = Explainer::sample_soft_mask(t, omega0, 1.0, {1.0 - 1e-12}, NoiseKind::Logistic);
    CHECK(t.scalar_val(lo) < 1e-6);
    CHECK(t.scalar_val(hi) > 1.0 - 1e-6);

    // monotone in both omega and u
    ad::Tape::Var big = t.leaf(1, 1, {1.5});
    for (NoiseKind nk : {NoiseKind::Gumbel, NoiseKind::Logistic}) {
        CHECK(t.scalar_val(Explainer::sample_soft_mask(t, big, 1.0, {0.3}, nk)) >
              t.scalar_val(Explainer::sample_soft_mask(t, omega0, 1.0, {0.3}, nk)));
        CHECK(t.scalar_val(Explainer::sample_soft_mask(t, omega0, 1.0, {0.8}, nk)) >
              t.scalar_val(Explainer::sample_soft_mask(t, omega0, 1.0, {0.2}, nk)));
    }

    CHECK_THROWS_AS(Explainer::sample_soft_mask(t, omega0, 0.0, {0.5}, NoiseKind::Gumbel),
                    std::invalid_argument);
    CHECK_THROWS_AS(Explainer::sample_soft_mask(t, omega0, 1.0, {0.0}, NoiseKind::Gumbel),
                    std::invalid_argument);
    CHECK_THROWS_AS(Explainer::sample_soft_mask(t, omega0, 1.0, {1.0}, NoiseKind::Gumbel),
                    std::invalid_argument);
    CHECK_THROWS_AS(Explainer::sample_soft_mask(t, omega0, 1.0, {0.5, 0.5}, NoiseKind::Gumbel),
                    std::invalid_argument);
}

TEST_CASE("sampled masks concentrate at sigmoid(omega) as tau vanishes") {
    Rng rng(13);
    for (double omega_val : {-1.2, 0.0, 0.8}) {
        const int draws = 4000;
        double acc = 0.0;
        for (int d = 0; d < draws; ++d) {
            ad::Tape t;
            ad::Tape::Var omega = t.leaf(1, 1, {omega_val});
            ad::Tape::Var m = Explainer::sample_soft_mask(t, omega, 0.1, {rng.uniform_open()},
                                                          NoiseKind::Logistic);
            acc += t.scalar_val(m);
        }
        CHECK(acc / draws == Catch::Approx(sigmoid(omega_val)).margin(0.02));
    }
}

TEST_CASE("hardening thresholds the soft mask") {
    ad::Tape t;
    ad::Tape::Var soft = t.leaf(3, 1, {0.2, 0.6, 0.5});
    ad::Tape::Var hard = Explainer::harden(t, soft, 0.5);
    CHECK(t.val(hard) == std::vector<double>{0.0, 1.0, 0.0});
}

TEST_CASE("explainer loss composes cross-entropy and the mask size penalty") {
    ad::Tape t;
    ad::Tape::Var logits = t.leaf(1, 2, {2.0, -1.0});
    double ce = std::log(1.0 + std::exp(-3.0));

    ad::Tape::Var plain = Explainer::explainer_loss(t, logits, 0, {}, 0.0);
    CHECK(t.scalar_val(plain) == Catch::Approx(ce).margin(1e-12));

    std::vector<ad::Tape::Var> masks = {t.leaf(2, 1, {1.0, 1.0}), t.leaf(3, 1, {1.0, 1.0, 1.0})};
    ad::Tape::Var full = Explainer::explainer_loss(t, logits, 0, masks, 0.3);
    CHECK(t.scalar_val(full) == Catch::Approx(ce + 0.3).margin(1e-12));

    std::vector<ad::Tape::Var> mixed = {t.leaf(2, 1, {0.2, 0.4}), t.leaf(1, 1, {0.8})};
    ad::Tape::Var m = Explainer::explainer_loss(t, logits, 0, mixed, 1.0);
    CHECK(t.scalar_val(m) == Catch::Approx(ce + 0.5 * (0.3 + 0.8)).margin(1e-12));
}

TEST_CASE("temperature anneals exponentially from tau_init to tau_final") {
    ExplainerConfig cfg;
    cfg.tau_init = 5.0;
    cfg.tau_final = 0.1;
    cfg.epochs = 11;
    Explainer ex(cfg, 2);
    CHECK(ex.tau_at_epoch(0) == Catch::Approx(5.0));
    CHECK(ex.tau_at_epoch(10) == Catch::Approx(0.1));
    for (int e = 1; e <= 10; ++e) CHECK(ex.tau_at_epoch(e) < ex.tau_at_epoch(e - 1));
    // geometric: the ratio between consecutive epochs is constant
    double r = ex.tau_at_epoch(1) / ex.tau_at_epoch(0);
    CHECK(ex.tau_at_epoch(6) / ex.tau_at_epoch(5) == Catch::Approx(r));
}

TEST_CASE("training with a dominant sparsity term shrinks the masks") {
    std::vector<Graph> graphs = generate_ba2motifs(11, 8);
    std::vector<int> train_idx = {0, 1, 2, 3, 4, 5, 6, 7};
    PolicyConfig policy{PolicyKind::ED, 2, 4, 5};

    EsanConfig ecfg;
    ecfg.encoder = EsanConfig::Encoder::DS;
    ecfg.num_mp_layers = 2;
    ecfg.hidden = 8;
    ecfg.set_encoder_hidden = 8;
    EsanModel classifier(ecfg, 10, 3);

    ExplainerConfig cfg;
    cfg.mlp_hidden = 8;
    cfg.epochs = 4;
    cfg.lr = 5e-2;
    cfg.l1_coeff = 50.0;
    cfg.seed = 2;
    Explainer ex(cfg, ecfg.hidden);

    auto mean_soft = [&]() {
        double acc = 0.0;
        int n = 0;
        for (int gi : train_idx) {
            SubgraphBag bag = edge_deletion_bag(graphs[gi]);
            for (const EdgeMask& m : ex.evaluate_masks(classifier, bag))
                for (double s : m.soft) {
                    acc += s;
                    ++n;
                }
        }
        return acc / n;
    };

    double before = mean_soft();
    std::vector<double> classifier_before = classifier.params().flatten_values();
    ExplainerTrainResult r = train_explainer(ex, classifier, graphs, train_idx, policy);
    REQUIRE(r.epoch_loss.size() == 4);
    CHECK(mean_soft() < before);
    // the classifier must not move
    CHECK(classifier.params().flatten_values() == classifier_before);
}

TEST_CASE("explainer training is deterministic in the seed") {
    std::vector<Graph> graphs = generate_ba2motifs(19, 6);
    std::vector<int> train_idx = {0, 1, 2, 3, 4, 5};
    PolicyConfig policy{PolicyKind::ED, 2, 3, 1};

    EsanConfig ecfg;
    ecfg.encoder = EsanConfig::Encoder::DSS;
    ecfg.num_mp_layers = 2;
    ecfg.hidden = 6;
    ecfg.set_encoder_hidden = 6;
    EsanModel classifier(ecfg, 10, 9);

    ExplainerConfig cfg;
    cfg.mlp_hidden = 6;
    cfg.epochs = 2;
    cfg.seed = 7;
    Explainer a(cfg, ecfg.hidden);
    Explainer b(cfg, ecfg.hidden);
    train_explainer(a, classifier, graphs, train_idx, policy);
    train_explainer(b, classifier, graphs, train_idx, policy);
    CHECK(a.params().flatten_values() == b.params().flatten_values());
}

TEST_CASE("evaluated masks are the deterministic sigmoid of the logits") {
    std::vector<Graph> graphs = generate_ba2motifs(23, 2);
    EsanConfig ecfg;
    ecfg.encoder = EsanConfig::Encoder::DS;
    ecfg.num_mp_layers = 2;
    ecfg.hidden = 6;
    ecfg.set_encoder_hidden = 6;
    EsanModel classifier(ecfg, 10, 4);

    ExplainerConfig cfg;
    cfg.mlp_hidden = 6;
    cfg.threshold = 0.5;
    Explainer ex(cfg, ecfg.hidden);

    SubgraphBag bag = edge_deletion_bag(graphs[0]);
    std::vector<EdgeMask> masks = ex.evaluate_masks(classifier, bag);
    REQUIRE(static_cast<int>(masks.size()) == bag.size());
    for (int i = 0; i < bag.size(); ++i) {
        REQUIRE(static_cast<int>(masks[i].omega.size()) == bag.subgraphs[i].num_edges());
        for (std::size_t e = 0; e < masks[i].omega.size(); ++e) {
            CHECK(masks[i].soft[e] == Catch::Approx(sigmoid(masks[i].omega[e])).margin(1e-12));
            CHECK(masks[i].hard[e] == (masks[i].soft[e] > 0.5 ? 1.0 : 0.0));
        }
    }
}

TEST_CASE("explainer config validation") {
    ExplainerConfig cfg;
    cfg.threshold = 1.5;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.threshold = 0.5;
    cfg.tau_final = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.tau_final = 0.1;
    cfg.l1_coeff = -1.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
