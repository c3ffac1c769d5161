// Command-line front end: gen-data, train, explain, evaluate.
// Exit codes: 0 success, 2 usage/config error, 3 runtime/training error.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sgnnx/config.hpp"
#include "sgnnx/datasets.hpp"
#include "sgnnx/esan.hpp"
#include "sgnnx/explainer.hpp"
#include "sgnnx/merge.hpp"
#include "sgnnx/metrics.hpp"
#include "sgnnx/pipeline.hpp"
#include "sgnnx/policies.hpp"

namespace fs = std::filesystem;
using namespace sgnnx;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void reject_unknown_keys(const Config& cfg) {
    auto unknown = cfg.unknown_keys();
    if (!unknown.empty()) {
        std::string msg = "unknown config key(s):";
        for (const auto& k : unknown) msg += " " + k;
        throw UsageError(msg);
    }
}

// Stratified head of the dataset: up to `limit` graphs, class-balanced,
// in dataset order. 0 means everything.
std::vector<int> limit_indices(const std::vector<Graph>& graphs, int limit) {
    std::vector<int> idx;
    if (limit <= 0 || limit >= static_cast<int>(graphs.size())) {
        idx.resize(graphs.size());
        for (std::size_t i = 0; i < graphs.size(); ++i) idx[i] = static_cast<int>(i);
        return idx;
    }
    int num_classes = 0;
    for (const Graph& g : graphs) num_classes = std::max(num_classes, g.label() + 1);
    std::vector<int> per_class((std::size_t)num_classes, limit / num_classes);
    for (int c = 0; c < limit % num_classes; ++c) per_class[c]++;
    std::vector<int> taken((std::size_t)num_classes, 0);
    for (std::size_t i = 0; i < graphs.size() && static_cast<int>(idx.size()) < limit; ++i) {
        int c = graphs[i].label();
        if (taken[c] < per_class[c]) {
            idx.push_back(static_cast<int>(i));
            ++taken[c];
        }
    }
    return idx;
}

std::vector<Graph> select(const std::vector<Graph>& graphs, const std::vector<int>& idx) {
    std::vector<Graph> out;
    out.reserve(idx.size());
    for (int i : idx) out.push_back(graphs[i]);
    return out;
}

int count_classes(const std::vector<Graph>& graphs) {
    int c = 0;
    for (const Graph& g : graphs) c = std::max(c, g.label() + 1);
    return std::max(c, 2);
}

// ---- gen-data ----

int cmd_gen_data(const std::string& dataset, std::uint64_t seed, const std::string& out,
                 const std::string& tu_path) {
    fs::create_directories(out);
    if (dataset == "ba2motifs") {
        auto graphs = generate_ba2motifs(seed);
        tu::write_tu_dataset(graphs, out, "BA2motifs");
        int c0 = 0;
        for (const Graph& g : graphs)
            if (g.label() == 0) ++c0;
        write_manifest((fs::path(out) / "manifest.txt").string(),
                       {{"dataset", "ba2motifs"},
                        {"seed", std::to_string(seed)},
                        {"num_graphs", std::to_string(graphs.size())},
                        {"class0", std::to_string(c0)},
                        {"class1", std::to_string(graphs.size() - c0)}});
        std::cout << "wrote " << graphs.size() << " graphs to " << out << "\n";
        return 0;
    }
    if (dataset == "tu") {
        if (tu_path.empty()) throw UsageError("gen-data --dataset tu requires --path");
        auto graphs = tu::load_tu_dataset(tu_path);
        write_manifest((fs::path(out) / "manifest.txt").string(),
                       {{"dataset", "tu"},
                        {"path", tu_path},
                        {"num_graphs", std::to_string(graphs.size())}});
        std::cout << "validated " << graphs.size() << " graphs in " << tu_path << "\n";
        return 0;
    }
    throw UsageError("unknown dataset '" + dataset + "' (expected ba2motifs|tu)");
}

// ---- train ----

int cmd_train(const std::string& config_path, const std::string& out) {
    Config cfg = Config::from_file(config_path);
    std::string dataset_path = cfg.get_string("dataset_path");
    std::string encoder_s = cfg.get_string("encoder"); // ds | dss | gin-baseline
    std::string policy_s = cfg.get_string("policy", encoder_s == "gin-baseline" ? "none" : "ed");

    PolicyConfig policy;
    policy.kind = encoder_s == "gin-baseline" ? PolicyKind::None : policy_from_string(policy_s);
    policy.ego_depth = cfg.get_int("ego_depth", 2);
    policy.max_bag_size = cfg.get_int("max_bag_size", 0);

    EsanConfig ecfg;
    ecfg.encoder = encoder_s == "gin-baseline" ? EsanConfig::Encoder::DS : encoder_from_string(encoder_s);
    ecfg.num_mp_layers = cfg.get_int("layers", 3);
    ecfg.hidden = cfg.get_int("hidden", 32);
    ecfg.set_encoder_hidden = cfg.get_int("set_hidden", ecfg.hidden);
    ecfg.readout = cfg.get_string("readout", "mean") == "sum" ? EsanConfig::Readout::Sum
                                                              : EsanConfig::Readout::Mean;
    ecfg.epsilon_learnable = cfg.get_bool("epsilon_learnable", true);

    TrainConfig tc;
    tc.epochs = cfg.get_int("epochs", 100);
    tc.lr = cfg.get_double("lr", 1e-3);
    tc.seed = cfg.get_seed("seed", 0);
    tc.batch_size = cfg.get_int("batch_size", 0);
    tc.grad_clip = cfg.get_double("grad_clip", 0.0);
    tc.calib_coeff = cfg.get_double("calib_coeff", 0.0);
    tc.edge_dropout = cfg.get_double("edge_dropout", 0.0);
    tc.early_stop_train_acc = cfg.get_double("early_stop_train_acc", 0.0);
    policy.seed = tc.seed;

    double train_frac = cfg.get_double("train_frac", 0.8);
    double val_frac = cfg.get_double("val_frac", 0.1);
    double test_frac = cfg.get_double("test_frac", 0.1);
    int limit = cfg.get_int("limit_graphs", 0);
    reject_unknown_keys(cfg);

    auto all_graphs = tu::load_tu_dataset(dataset_path);
    auto graphs = select(all_graphs, limit_indices(all_graphs, limit));
    ecfg.num_classes = count_classes(graphs);
    SplitIndices split = split_dataset(graphs, train_frac, val_frac, test_frac, tc.seed);

    int in_dim = policy_feature_dim(graphs.front().feature_dim(), policy.kind);
    EsanModel model(ecfg, in_dim, tc.seed);
    TrainResult res = train_classifier(model, graphs, split.train, split.val, policy, tc);

    fs::create_directories(out);
    model.save((fs::path(out) / "checkpoint.txt").string(),
               {{"policy", to_string(policy.kind)},
                {"ego_depth", std::to_string(policy.ego_depth)},
                {"seed", std::to_string(tc.seed)}});
    write_history_csv((fs::path(out) / "history.csv").string(), res.history);
    cfg.write_metadata((fs::path(out) / "metadata.txt").string(),
                       {{"final_train_acc", std::to_string(res.final_train_acc)},
                        {"best_val_acc", std::to_string(res.best_val_acc)}});
    std::cout << "train acc " << res.final_train_acc << ", best val acc " << res.best_val_acc
              << ", checkpoint " << (fs::path(out) / "checkpoint.txt").string() << "\n";
    return 0;
}

// ---- explain ----

int cmd_explain(const std::string& config_path, const std::string& model_path,
                const std::string& out) {
    Config cfg = Config::from_file(config_path);
    std::string dataset_path = cfg.get_string("dataset_path");

    auto [model, header] = EsanModel::load(model_path);
    auto hget = [&header](const std::string& k) -> std::string {
        auto it = header.find(k);
        return it == header.end() ? "" : it->second;
    };
    PolicyConfig policy;
    policy.kind = policy_from_string(hget("policy"));
    policy.ego_depth = std::stoi(hget("ego_depth"));

    // a policy stated in the explain config must agree with the checkpoint
    if (cfg.has("policy")) {
        std::string want = cfg.get_string("policy");
        if (policy_from_string(want) != policy.kind)
            throw UsageError("config policy '" + want + "' does not match checkpoint policy '" +
                             to_string(policy.kind) + "'");
    }

    ExplainerConfig xcfg;
    xcfg.mlp_hidden = cfg.get_int("mlp_hidden", 32);
    xcfg.tau_init = cfg.get_double("tau_init", 5.0);
    xcfg.tau_final = cfg.get_double("tau_final", 0.1);
    xcfg.threshold = cfg.get_double("threshold", 0.5);
    xcfg.l1_coeff = cfg.get_double("l1_coeff", 0.05);
    xcfg.epochs = cfg.get_int("explainer_epochs", 20);
    xcfg.lr = cfg.get_double("explainer_lr", 3e-3);
    xcfg.batch_size = cfg.get_int("explainer_batch_size", 0);
    xcfg.grad_clip = cfg.get_double("explainer_grad_clip", 0.0);
    xcfg.l1_warmup_epochs = cfg.get_int("l1_warmup_epochs", 0);
    xcfg.seed = cfg.get_seed("seed", 0);
    xcfg.noise = noise_from_string(cfg.get_string("noise", "gumbel"));
    policy.max_bag_size = cfg.get_int("max_bag_size", 0);
    policy.seed = xcfg.seed;

    MergeMode mode = merge_mode_from_string(cfg.get_string("merge_mode", "sum_rescale"));
    bool merge_hard = cfg.get_bool("merge_hard", false);
    double train_frac = cfg.get_double("train_frac", 0.8);
    double val_frac = cfg.get_double("val_frac", 0.1);
    double test_frac = cfg.get_double("test_frac", 0.1);
    int limit = cfg.get_int("limit_graphs", 0);
    reject_unknown_keys(cfg);

    auto all_graphs = tu::load_tu_dataset(dataset_path);
    auto graphs = select(all_graphs, limit_indices(all_graphs, limit));
    int in_dim = policy_feature_dim(graphs.front().feature_dim(), policy.kind);
    if (in_dim != model.in_dim())
        throw UsageError("dataset feature dim under policy '" + to_string(policy.kind) + "' is " +
                         std::to_string(in_dim) + " but checkpoint expects " +
                         std::to_string(model.in_dim()));

    SplitIndices split = split_dataset(graphs, train_frac, val_frac, test_frac, xcfg.seed);
    Explainer explainer(xcfg, model.config().hidden);
    train_explainer(explainer, model, graphs, split.train, policy);

    // explain every graph with the full bag
    std::vector<int> all_idx(graphs.size());
    for (std::size_t i = 0; i < graphs.size(); ++i) all_idx[i] = static_cast<int>(i);
    auto expls = explain_graphs(explainer, model, graphs, all_idx, policy, mode, merge_hard);

    fs::create_directories(fs::path(out) / "masks");
    fs::create_directories(fs::path(out) / "merged");
    fs::create_directories(fs::path(out) / "dot");
    PolicyConfig full = policy;
    full.max_bag_size = 0;
    for (const GraphExplanation& ge : expls) {
        SubgraphBag bag = make_bag(graphs[ge.graph_index], full);
        std::string id = std::to_string(ge.graph_index);
        write_mask_csv(ge, bag, (fs::path(out) / "masks" / ("graph_" + id + ".csv")).string());
        write_explanation_csv(ge.merged, (fs::path(out) / "merged" / ("graph_" + id + ".csv")).string());
        write_explanation_dot(ge.merged, (fs::path(out) / "dot" / ("graph_" + id + ".dot")).string());
    }
    explainer.params().save((fs::path(out) / "explainer_checkpoint.txt").string());

    std::string dataset_tag = fs::path(dataset_path).filename().string();
    std::string encoder_tag =
        policy.kind == PolicyKind::None ? "baseline" : to_string(model.config().encoder);
    cfg.write_metadata((fs::path(out) / "metadata.txt").string(),
                       {{"dataset", dataset_tag.empty() ? dataset_path : dataset_tag},
                        {"encoder", encoder_tag},
                        {"run_policy", to_string(policy.kind)}});
    std::cout << "explained " << expls.size() << " graphs into " << out << "\n";
    return 0;
}

// ---- evaluate ----

RunResult evaluate_run_dir(const fs::path& dir) {
    auto meta = Config::read_metadata((dir / "metadata.txt").string());
    RunResult r;
    r.dataset = meta.count("dataset") ? meta["dataset"] : "unknown";
    r.encoder = meta.count("encoder") ? meta["encoder"] : "unknown";
    r.policy = meta.count("run_policy") ? meta["run_policy"] : "unknown";
    r.seed = meta.count("seed") ? std::stoull(meta["seed"]) : 0;
    double auc_sum = 0.0, mask_sum = 0.0;
    int auc_n = 0, mask_n = 0;
    fs::path merged = dir / "merged";
    if (!fs::is_directory(merged)) throw UsageError("no merged/ directory under " + dir.string());
    std::vector<fs::path> files;
    for (const auto& ent : fs::directory_iterator(merged))
        if (ent.path().extension() == ".csv") files.push_back(ent.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        auto [scores, truth] = read_explanation_csv(f.string());
        if (scores.empty()) continue;
        Explanation e;
        e.scores = scores;
        int above = 0;
        for (double s : scores)
            if (s > 0.5) ++above;
        mask_sum += 100.0 * above / static_cast<double>(scores.size());
        ++mask_n;
        try {
            auc_sum += auc(scores, truth);
            ++auc_n;
        } catch (const UndefinedMetricError&) {
        }
    }
    if (mask_n == 0) throw UsageError("no explanation CSVs under " + merged.string());
    r.mean_auc = auc_n > 0 ? auc_sum / auc_n : 0.0;
    r.mean_mask_size = mask_sum / mask_n;
    r.graphs_evaluated = auc_n;
    return r;
}

int cmd_evaluate(const std::string& explanations, const std::string& out) {
    fs::path root(explanations);
    if (!fs::is_directory(root)) throw UsageError("not a directory: " + explanations);
    std::vector<RunResult> runs;
    if (fs::exists(root / "metadata.txt")) {
        runs.push_back(evaluate_run_dir(root));
    } else {
        std::vector<fs::path> subdirs;
        for (const auto& ent : fs::directory_iterator(root))
            if (ent.is_directory() && fs::exists(ent.path() / "metadata.txt"))
                subdirs.push_back(ent.path());
        std::sort(subdirs.begin(), subdirs.end());
        for (const auto& d : subdirs) runs.push_back(evaluate_run_dir(d));
    }
    if (runs.empty()) throw UsageError("no explanation runs found under " + explanations);

    auto rows = aggregate_results(runs);
    fs::create_directories(out);
    std::ofstream csv(fs::path(out) / "report.csv");
    csv << "dataset,encoder,policy,seeds,auc_mean,auc_std,mask_mean,mask_std\n";
    csv.precision(17);
    for (const auto& r : rows)
        csv << r.dataset << "," << r.encoder << "," << r.policy << "," << r.num_seeds << ","
            << r.auc_mean << "," << r.auc_std << "," << r.mask_mean << "," << r.mask_std << "\n";
    std::string table = format_result_table(rows);
    std::ofstream txt(fs::path(out) / "report.txt");
    txt << table;
    std::cout << table;
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Subgraph-bag GNN classifier with a learned edge-mask explainer"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("gen-data", "Generate BA-2motifs or validate a TU directory");
    std::string gen_dataset, gen_out, gen_path;
    std::uint64_t gen_seed = 0;
    gen->add_option("--dataset", gen_dataset, "ba2motifs | tu")->required();
    gen->add_option("--seed", gen_seed, "generator seed");
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--path", gen_path, "existing TU directory (dataset=tu)");

    auto* train = app.add_subcommand("train", "Train the classifier (ESAN or GIN baseline)");
    std::string train_config, train_out;
    train->add_option("--config", train_config, "run configuration file")->required();
    train->add_option("--out", train_out, "output directory")->required();

    auto* explain = app.add_subcommand("explain", "Train the explainer against a frozen checkpoint");
    std::string ex_config, ex_model, ex_out;
    explain->add_option("--config", ex_config, "run configuration file")->required();
    explain->add_option("--model", ex_model, "classifier checkpoint")->required();
    explain->add_option("--out", ex_out, "output directory")->required();

    auto* evaluate = app.add_subcommand("evaluate", "Score explanations and build the report");
    std::string ev_expl, ev_out;
    evaluate->add_option("--explanations", ev_expl, "explanation run directory")->required();
    evaluate->add_option("--out", ev_out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(gen_dataset, gen_seed, gen_out, gen_path);
        if (train->parsed()) return cmd_train(train_config, train_out);
        if (explain->parsed()) return cmd_explain(ex_config, ex_model, ex_out);
        if (evaluate->parsed()) return cmd_evaluate(ev_expl, ev_out);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const TrainingError& e) {
        std::cerr << "training error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
