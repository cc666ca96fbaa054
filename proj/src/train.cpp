#include "gnn/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>

namespace gnn {

// ---- config ----

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

void ExperimentConfig::validate() const {
    if (task != "node_classification" && task != "graph_classification" &&
        task != "graph_regression")
        throw ConfigError("config: unknown task '" + task + "'");
    if (model.empty()) throw ConfigError("config: 'model' is required");
    if (task == "graph_regression") {
        bool known = false;
        for (const auto& t : kQm9TargetNames) known |= t == target;
        if (!known) throw ConfigError("config: unknown target '" + target + "'");
    }
    if (repetitions < 1) throw ConfigError("config: repetitions must be >= 1");
}

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[' && t.back() == ']') continue;  // section headers are cosmetic
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": expected key = value");
        std::string key = trim(t.substr(0, eq));
        std::string val = trim(t.substr(eq + 1));
        if (val.size() >= 2 && val.front() == '"' && val.back() == '"')
            val = val.substr(1, val.size() - 2);
        try {
            if (key == "task") cfg.task = val;
            else if (key == "dataset_dir") cfg.dataset_dir = val;
            else if (key == "dataset_name") cfg.dataset_name = val;
            else if (key == "model") cfg.model = val;
            else if (key == "target") cfg.target = val;
            else if (key == "learning_rate") cfg.learning_rate = std::stod(val);
            else if (key == "l2") cfg.l2 = std::stod(val);
            else if (key == "batch_size") cfg.batch_size = std::stoi(val);
            else if (key == "patience") cfg.patience = std::stoi(val);
            else if (key == "max_epochs") cfg.max_epochs = std::stoi(val);
            else if (key == "repetitions") cfg.repetitions = std::stoi(val);
            else if (key == "seed") cfg.seed = (uint64_t)std::stoull(val);
            else if (key == "limit") cfg.limit = std::stoll(val);
            else if (key == "output") cfg.output = val;
            else
                throw ConfigError("config: unknown key '" + key + "'");
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception&) {
            throw ConfigError("config: bad value for key '" + key + "': '" + val + "'");
        }
    }
    return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("config: cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str());
}

std::string resolve_dataset_dir(const ExperimentConfig& cfg) {
    std::string dir = cfg.dataset_dir;
    if (dir.empty()) dir = cfg.dataset_name;
    if (!dir.empty() && dir[0] == '/') return dir;
    const char* root = std::getenv("GNN_DATA_ROOT");
    return std::string(root ? root : "./data") + "/" + dir;
}

// ---- results ----

std::string format_metric(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

void RunResult::finalize() {
    std::sort(reps.begin(), reps.end(),
              [](const RepetitionResult& a, const RepetitionResult& b) {
                  return a.repetition < b.repetition;
              });
    std::vector<double> ok;
    for (const auto& r : reps)
        if (!r.failed) ok.push_back(r.metric);
    if (ok.empty()) {
        mean = stddev = 0.0;
        return;
    }
    mean = std::accumulate(ok.begin(), ok.end(), 0.0) / (double)ok.size();
    double ss = 0;
    for (double v : ok) ss += (v - mean) * (v - mean);
    stddev = ok.size() > 1 ? std::sqrt(ss / (double)(ok.size() - 1)) : 0.0;
}

std::string RunResult::to_csv() const {
    std::string out = "repetition,metric,epochs,seconds\n";
    for (const auto& r : reps) {
        out += std::to_string(r.repetition) + ",";
        out += r.failed ? "failed" : format_metric(r.metric);
        out += "," + std::to_string(r.epochs) + "," + format_metric(r.seconds) + "\n";
    }
    out += "# " + summary() + "\n";
    return out;
}

std::string RunResult::summary() const {
    return format_metric(mean) + " ± " + format_metric(stddev);
}

// ---- early stopping ----

TrainOutcome train_with_early_stopping(const TrainCallbacks& cb) {
    TrainOutcome out;
    double best = cb.higher_is_better ? -1e300 : 1e300;
    int since_best = 0;
    std::vector<std::vector<double>> snapshot;
    auto take_snapshot = [&]() {
        snapshot.clear();
        for (const auto& p : cb.params) snapshot.push_back(p.tensor.values());
    };
    take_snapshot();
    for (int epoch = 0; epoch < cb.max_epochs; ++epoch) {
        double loss = cb.train_epoch();
        ++out.epochs;
        if (!std::isfinite(loss)) {
            out.failed = true;
            break;
        }
        double metric = cb.validation_metric();
        bool improved = cb.higher_is_better ? metric > best : metric < best;
        if (improved) {
            best = metric;
            since_best = 0;
            take_snapshot();
        } else if (++since_best >= cb.patience) {
            break;
        }
    }
    // restore best parameters in place
    for (size_t i = 0; i < cb.params.size(); ++i)
        const_cast<Tensor&>(cb.params[i].tensor).values() = snapshot[i];
    out.best_validation = best;
    return out;
}

// ---- node classification ----

RunResult run_node_classification(const ExperimentConfig& cfg) {
    Dataset ds = load_citation(resolve_dataset_dir(cfg), cfg.dataset_name.empty()
                                                             ? "citation"
                                                             : cfg.dataset_name);
    const Graph& g = ds.graphs[0];
    int64_t f = g.n_features();
    bool any_test_possible = false;
    for (auto l : ds.labeled) any_test_possible |= l != 0;
    if (!any_test_possible)
        throw std::runtime_error("node classification: dataset has no labeled nodes");

    NodeModel::Hyper hy = NodeModel::defaults(cfg.model);
    double lr = cfg.learning_rate > 0 ? cfg.learning_rate : hy.learning_rate;
    double l2 = cfg.l2 >= 0 ? cfg.l2 : hy.l2;
    int patience = cfg.patience > 0 ? cfg.patience : hy.patience;
    int max_epochs = cfg.max_epochs > 0 ? cfg.max_epochs : hy.max_epochs;

    RunResult result;
    for (int rep = 0; rep < cfg.repetitions; ++rep) {
        auto t0 = std::chrono::steady_clock::now();
        uint64_t rep_seed = cfg.seed + (uint64_t)rep;
        auto masks = split_per_class(ds.node_labels, ds.labeled, ds.n_classes, 20, 30,
                                     rep_seed * 7919 + 1);
        Rng rng(rep_seed);
        NodeModel model(cfg.model, f, ds.n_classes, rng);
        Adam adam(lr);
        adam.register_params(model.params());

        TrainCallbacks cb;
        cb.params = model.params();
        cb.patience = patience;
        cb.max_epochs = max_epochs;
        cb.higher_is_better = true;
        cb.train_epoch = [&]() {
            Tape tape;
            Tensor logits = model.forward(g.a, g.x, true, rng);
            Tensor loss = masked_cross_entropy(logits, ds.node_labels, masks.train);
            if (l2 > 0) loss = add(loss, l2_penalty(model.l2_params(), l2));
            double lv = loss.item();
            if (!std::isfinite(lv)) return lv;
            auto grads = tape.backward(loss);
            std::vector<Tensor> gv;
            for (const auto& p : adam.params()) {
                int id = p.tensor.node_id(tape);
                auto it = id >= 0 ? grads.find(id) : grads.end();
                gv.push_back(it != grads.end() ? it->second : Tensor::zeros_like(p.tensor));
            }
            adam.step(gv);
            return lv;
        };
        cb.validation_metric = [&]() {
            Tensor logits = model.forward(g.a, g.x, false, rng);
            return masked_accuracy(logits, ds.node_labels, masks.val);
        };

        TrainOutcome out = train_with_early_stopping(cb);
        RepetitionResult rr;
        rr.repetition = rep;
        rr.epochs = out.epochs;
        rr.failed = out.failed;
        if (!out.failed) {
            Tensor logits = model.forward(g.a, g.x, false, rng);
            rr.metric = 100.0 * masked_accuracy(logits, ds.node_labels, masks.test);
        }
        rr.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                         .count();
        result.reps.push_back(rr);
    }
    result.finalize();
    return result;
}

// ---- graph classification ----

namespace {

std::vector<Tensor> collect_grads(Tape& tape, const std::unordered_map<int, Tensor>& grads,
                                  const std::vector<Param>& params) {
    std::vector<Tensor> gv;
    for (const auto& p : params) {
        int id = p.tensor.node_id(tape);
        auto it = id >= 0 ? grads.find(id) : grads.end();
        gv.push_back(it != grads.end() ? it->second : Tensor::zeros_like(p.tensor));
    }
    return gv;
}

std::vector<size_t> mask_indices(const std::vector<uint8_t>& mask) {
    std::vector<size_t> idx;
    for (size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) idx.push_back(i);
    return idx;
}

}  // namespace

RunResult run_graph_classification(const ExperimentConfig& cfg) {
    Dataset ds = load_tu(resolve_dataset_dir(cfg), cfg.dataset_name);
    int64_t f = ds.n_features();
    double nbar = ds.mean_order();
    int64_t k1 = std::max<int64_t>(1, (int64_t)std::llround(nbar / 2.0));
    int64_t k2 = std::max<int64_t>(1, (int64_t)std::llround(nbar / 4.0));
    int64_t n_max = 0;
    for (const auto& g : ds.graphs) n_max = std::max(n_max, g.order());

    double lr = cfg.learning_rate > 0 ? cfg.learning_rate : 0.001;
    double l2 = cfg.l2 >= 0 ? cfg.l2 : 1e-5;
    int batch_size = cfg.batch_size > 0 ? cfg.batch_size : 8;
    int patience = cfg.patience > 0 ? cfg.patience : 50;
    int max_epochs = cfg.max_epochs > 0 ? cfg.max_epochs : 400;

    std::vector<int> labels;
    for (const auto& g : ds.graphs) labels.push_back((int)g.y[0]);

    RunResult result;
    for (int rep = 0; rep < cfg.repetitions; ++rep) {
        auto t0 = std::chrono::steady_clock::now();
        uint64_t rep_seed = cfg.seed + (uint64_t)rep;
        auto masks = split_fractions((int64_t)ds.graphs.size(), 0.8, 0.1,
                                     rep_seed * 7919 + 1);
        Rng rng(rep_seed);
        GraphClassModel model(cfg.model, f, ds.n_classes, k1, k2, rng);
        Adam adam(lr);
        adam.register_params(model.params());

        auto train_idx = mask_indices(masks.train);
        auto val_idx = mask_indices(masks.val);
        auto test_idx = mask_indices(masks.test);

        auto eval_logits = [&](const std::vector<size_t>& idx, int bs) {
            // accuracy over `idx`, processed in chunks
            int64_t correct = 0;
            for (size_t start = 0; start < idx.size(); start += (size_t)bs) {
                std::vector<Graph> gs;
                std::vector<int> ls;
                for (size_t k = start; k < std::min(idx.size(), start + (size_t)bs); ++k) {
                    gs.push_back(ds.graphs[idx[k]]);
                    ls.push_back(labels[idx[k]]);
                }
                Tensor logits;
                if (model.dense_mode())
                    logits = model.forward_dense(to_dense(gs, n_max), nullptr);
                else
                    logits = model.forward_disjoint(to_disjoint(gs), nullptr);
                correct += (int64_t)std::llround(graph_accuracy(logits, ls) *
                                                 (double)ls.size());
            }
            return idx.empty() ? 0.0 : (double)correct / (double)idx.size();
        };

        TrainCallbacks cb;
        cb.params = model.params();
        cb.patience = patience;
        cb.max_epochs = max_epochs;
        cb.higher_is_better = true;
        cb.train_epoch = [&]() {
            std::vector<size_t> order = train_idx;
            std::shuffle(order.begin(), order.end(), rng);
            double total = 0;
            int batches = 0;
            for (size_t start = 0; start < order.size(); start += (size_t)batch_size) {
                std::vector<Graph> gs;
                std::vector<int> ls;
                for (size_t k = start; k < std::min(order.size(), start + (size_t)batch_size);
                     ++k) {
                    gs.push_back(ds.graphs[order[k]]);
                    ls.push_back(labels[order[k]]);
                }
                Tape tape;
                std::map<std::string, Tensor> aux;
                Tensor logits;
                if (model.dense_mode())
                    logits = model.forward_dense(to_dense(gs, n_max), &aux);
                else
                    logits = model.forward_disjoint(to_disjoint(gs), &aux);
                Tensor loss = graph_cross_entropy(logits, ls);
                for (auto& [name, v] : aux) loss = add(loss, v);
                if (l2 > 0) loss = add(loss, l2_penalty(model.l2_params(), l2));
                double lv = loss.item();
                if (!std::isfinite(lv)) return lv;
                auto grads = tape.backward(loss);
                adam.step(collect_grads(tape, grads, adam.params()));
                total += lv;
                ++batches;
            }
            return batches ? total / batches : 0.0;
        };
        cb.validation_metric = [&]() { return eval_logits(val_idx, batch_size); };

        TrainOutcome out = train_with_early_stopping(cb);
        RepetitionResult rr;
        rr.repetition = rep;
        rr.epochs = out.epochs;
        rr.failed = out.failed;
        if (!out.failed) rr.metric = 100.0 * eval_logits(test_idx, batch_size);
        rr.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                         .count();
        result.reps.push_back(rr);
    }
    result.finalize();
    return result;
}

// ---- graph regression ----

RunResult run_graph_regression(const ExperimentConfig& cfg) {
    std::string dir = resolve_dataset_dir(cfg);
    Dataset ds = load_qm9_sdf(dir + "/qm9.sdf", dir + "/targets.csv", cfg.limit);
    int target_col = -1;
    for (size_t i = 0; i < kQm9TargetNames.size(); ++i)
        if (kQm9TargetNames[i] == cfg.target) target_col = (int)i;
    if (target_col < 0) throw ConfigError("unknown target '" + cfg.target + "'");

    int64_t f = ds.n_features();
    double lr = cfg.learning_rate > 0 ? cfg.learning_rate : 0.0005;
    int batch_size = cfg.batch_size > 0 ? cfg.batch_size : 32;
    int patience = cfg.patience > 0 ? cfg.patience : 10;
    int max_epochs = cfg.max_epochs > 0 ? cfg.max_epochs : 100;

    std::vector<double> targets;
    for (const auto& g : ds.graphs) targets.push_back(g.y[(size_t)target_col]);

    RunResult result;
    for (int rep = 0; rep < cfg.repetitions; ++rep) {
        auto t0 = std::chrono::steady_clock::now();
        uint64_t rep_seed = cfg.seed + (uint64_t)rep;
        auto masks = split_fractions((int64_t)ds.graphs.size(), 0.8, 0.1,
                                     rep_seed * 7919 + 1);
        Rng rng(rep_seed);
        GraphRegModel model(cfg.model, f, kQm9BondTypes, 1, rng);
        Adam adam(lr);
        adam.register_params(model.params());

        // standardize on the training split; report raw-unit MSE
        auto train_idx = mask_indices(masks.train);
        auto val_idx = mask_indices(masks.val);
        auto test_idx = mask_indices(masks.test);
        double mu = 0;
        for (size_t i : train_idx) mu += targets[i];
        mu /= std::max<size_t>(train_idx.size(), 1);
        double var = 0;
        for (size_t i : train_idx) var += (targets[i] - mu) * (targets[i] - mu);
        var /= std::max<size_t>(train_idx.size(), 1);
        double sd = var > 0 ? std::sqrt(var) : 1.0;

        auto batch_pred = [&](const std::vector<size_t>& idx, size_t start, int bs,
                              Tensor* y_std_out) {
            std::vector<Graph> gs;
            std::vector<double> ys;
            for (size_t k = start; k < std::min(idx.size(), start + (size_t)bs); ++k) {
                gs.push_back(ds.graphs[idx[k]]);
                ys.push_back((targets[idx[k]] - mu) / sd);
            }
            if (y_std_out) *y_std_out = Tensor({(int64_t)ys.size(), 1}, ys);
            return model.forward(to_disjoint(gs));
        };

        auto raw_mse = [&](const std::vector<size_t>& idx, int bs) {
            double se = 0;
            for (size_t start = 0; start < idx.size(); start += (size_t)bs) {
                Tensor pred = batch_pred(idx, start, bs, nullptr);
                for (int64_t j = 0; j < pred.extent(0); ++j) {
                    double raw = pred.data()[j] * sd + mu;
                    double d = raw - targets[idx[start + (size_t)j]];
                    se += d * d;
                }
            }
            return idx.empty() ? 0.0 : se / (double)idx.size();
        };

        TrainCallbacks cb;
        cb.params = model.params();
        cb.patience = patience;
        cb.max_epochs = max_epochs;
        cb.higher_is_better = false;
        cb.train_epoch = [&]() {
            std::vector<size_t> order = train_idx;
            std::shuffle(order.begin(), order.end(), rng);
            double total = 0;
            int batches = 0;
            for (size_t start = 0; start < order.size(); start += (size_t)batch_size) {
                Tape tape;
                Tensor y;
                Tensor pred = batch_pred(order, start, batch_size, &y);
                Tensor loss = mse_loss(pred, y);
                double lv = loss.item();
                if (!std::isfinite(lv)) return lv;
                auto grads = tape.backward(loss);
                adam.step(collect_grads(tape, grads, adam.params()));
                total += lv;
                ++batches;
            }
            return batches ? total / batches : 0.0;
        };
        cb.validation_metric = [&]() { return raw_mse(val_idx, batch_size); };

        TrainOutcome out = train_with_early_stopping(cb);
        RepetitionResult rr;
        rr.repetition = rep;
        rr.epochs = out.epochs;
        rr.failed = out.failed;
        if (!out.failed) rr.metric = raw_mse(test_idx, batch_size);
        rr.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                         .count();
        result.reps.push_back(rr);
    }
    result.finalize();
    return result;
}

RunResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    if (cfg.task == "node_classification") return run_node_classification(cfg);
    if (cfg.task == "graph_classification") return run_graph_classification(cfg);
    return run_graph_regression(cfg);
}

}  // namespace gnn
