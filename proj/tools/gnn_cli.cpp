// Command-line front end: train/evaluate experiments, validate dataset
// directories, run the finite-difference gradient suite, and generate
// synthetic benchmark-shaped datasets.
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "gnn/checks.hpp"
#include "gnn/data.hpp"
#include "gnn/synth.hpp"
#include "gnn/train.hpp"

namespace fs = std::filesystem;

namespace {

int cmd_train(const std::string& config_path, bool evaluate_only) {
    gnn::ExperimentConfig cfg = gnn::parse_config_file(config_path);
    if (evaluate_only) cfg.repetitions = 1;
    gnn::RunResult res = gnn::run_experiment(cfg);
    std::string csv = res.to_csv();
    std::cout << csv;
    std::cout << res.summary() << "\n";
    if (!cfg.output.empty()) {
        std::ofstream f(cfg.output, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + cfg.output);
        f << csv;
    }
    for (const auto& r : res.reps)
        if (r.failed) return 1;
    return 0;
}

int cmd_datasets_validate(const std::string& dir) {
    bool any = false;
    if (fs::exists(dir + "/edges.tsv")) {
        gnn::Dataset d = gnn::load_citation(dir);
        std::cout << "citation: " << d.graphs[0].order() << " nodes, "
                  << d.n_features() << " features, " << d.n_classes << " classes\n";
        any = true;
    }
    for (const auto& entry : fs::directory_iterator(dir)) {
        std::string p = entry.path().filename().string();
        auto pos = p.find("_graph_indicator.txt");
        if (pos == std::string::npos) continue;
        std::string name = p.substr(0, pos);
        gnn::Dataset d = gnn::load_tu(dir, name);
        std::cout << "tu[" << name << "]: " << d.graphs.size() << " graphs, "
                  << d.n_classes << " classes, mean order " << d.mean_order() << "\n";
        any = true;
    }
    if (fs::exists(dir + "/qm9.sdf")) {
        gnn::Qm9LoadStats stats;
        gnn::Dataset d =
            gnn::load_qm9_sdf(dir + "/qm9.sdf", dir + "/targets.csv", -1, &stats);
        std::cout << "qm9: " << d.graphs.size() << " molecules, "
                  << d.n_targets << " targets, skipped "
                  << stats.skipped_unknown_element << "\n";
        any = true;
    }
    if (!any) {
        std::cerr << "no recognized dataset layout in " << dir << "\n";
        return 1;
    }
    return 0;
}

int cmd_gradcheck(const std::string& layer, uint64_t seed) {
    std::vector<std::string> layers;
    if (layer == "all")
        layers = gnn::gradcheck_layer_names();
    else
        layers.push_back(layer);
    bool ok = true;
    for (const auto& l : layers) {
        gnn::GradCheckResult r = gnn::layer_gradient_check(l, seed);
        bool pass = r.passed(1e-4);
        ok = ok && pass;
        std::cout << l << ": max rel error " << r.max_rel_error << " ("
                  << r.worst_param << ") " << (pass ? "ok" : "FAIL") << "\n";
    }
    return ok ? 0 : 1;
}

int cmd_generate(const std::string& kind, const std::string& out, uint64_t seed,
                 int64_t count) {
    fs::create_directories(out);
    if (kind == "citation") {
        gnn::synth::write_citation_like(out, seed);
        std::cout << "wrote citation-format dataset to " << out << "\n";
    } else if (kind == "tu") {
        gnn::synth::TuOptions o;
        if (count > 0) o.n_graphs = (int)count;
        gnn::synth::write_tu_like(out, "MUTAG", seed, o);
        std::cout << "wrote TU-format dataset MUTAG to " << out << "\n";
    } else if (kind == "qm9") {
        gnn::synth::Qm9Options o;
        if (count > 0) o.n_molecules = count;
        gnn::synth::write_qm9_like(out, seed, o);
        std::cout << "wrote SDF dataset to " << out << "\n";
    } else {
        throw gnn::ConfigError("unknown dataset kind '" + kind + "'");
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"graph neural network toolkit"};
    app.require_subcommand(1);

    std::string config_path, dir, layer = "all", kind, out;
    uint64_t seed = 1;
    int64_t count = -1;

    auto* train = app.add_subcommand("train", "run a configured experiment");
    train->add_option("--config", config_path, "config file")->required();

    auto* eval = app.add_subcommand("evaluate", "single-repetition run of a config");
    eval->add_option("--config", config_path, "config file")->required();

    auto* ds = app.add_subcommand("datasets", "dataset utilities");
    auto* dsv = ds->add_subcommand("validate", "load and summarize a dataset directory");
    dsv->add_option("dir", dir, "dataset directory")->required();
    ds->require_subcommand(1);

    auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient suite");
    gc->add_option("--layer", layer, "layer name or 'all'");
    gc->add_option("--seed", seed, "rng seed");

    auto* gen = app.add_subcommand("generate", "write a synthetic dataset");
    gen->add_option("kind", kind, "citation | tu | qm9")->required();
    gen->add_option("--out", out, "output directory")->required();
    gen->add_option("--seed", seed, "rng seed");
    gen->add_option("--count", count, "graph/molecule count override");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (train->parsed()) return cmd_train(config_path, false);
        if (eval->parsed()) return cmd_train(config_path, true);
        if (ds->parsed()) return cmd_datasets_validate(dir);
        if (gc->parsed()) return cmd_gradcheck(layer, seed);
        if (gen->parsed()) return cmd_generate(kind, out, seed, count);
    } catch (const gnn::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
