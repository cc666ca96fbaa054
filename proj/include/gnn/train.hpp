#pragma once

#include <string>
#include <vector>

#include "gnn/data.hpp"
#include "gnn/models.hpp"
#include "gnn/optim.hpp"

namespace gnn {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Flat key=value configuration with optional [sections]; unknown keys
// are rejected.
struct ExperimentConfig {
    std::string task;          // node_classification | graph_classification | graph_regression
    std::string dataset_dir;   // resolved against $GNN_DATA_ROOT (default ./data) if relative
    std::string dataset_name;  // TU prefix / citation label
    std::string model;         // model name (node) or pooling / global pooling name
    std::string target = "Mu"; // regression target column
    double learning_rate = -1.0;  // <0 = per-model default
    double l2 = -1.0;
    int batch_size = -1;
    int patience = -1;
    int max_epochs = -1;
    int repetitions = 10;
    uint64_t seed = 0;
    int64_t limit = -1;  // molecule cap for regression
    std::string output;  // CSV path ("" = stdout only)

    void validate() const;
};

ExperimentConfig parse_config_file(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text);

std::string resolve_dataset_dir(const ExperimentConfig& cfg);

struct RepetitionResult {
    int repetition = 0;
    double metric = 0.0;  // accuracy or raw-unit test MSE
    int epochs = 0;
    double seconds = 0.0;
    bool failed = false;
};

struct RunResult {
    std::vector<RepetitionResult> reps;
    double mean = 0.0;
    double stddev = 0.0;
    void finalize();
    // CSV: header + one row per repetition + trailing summary comment.
    std::string to_csv() const;
    std::string summary() const;
};

// Formats a metric with 6 significant digits, '.' decimal separator.
std::string format_metric(double v);

// ---- generic early-stopped training ----

struct TrainCallbacks {
    // One optimization epoch; returns training loss.
    std::function<double()> train_epoch;
    // Validation metric; higher_is_better tells the stopper how to compare.
    std::function<double()> validation_metric;
    bool higher_is_better = true;
    int patience = 10;
    int max_epochs = 200;
    std::vector<Param> params;  // snapshotted/restored around the best epoch
};

struct TrainOutcome {
    int epochs = 0;
    double best_validation = 0.0;
    bool failed = false;  // NaN loss
};

TrainOutcome train_with_early_stopping(const TrainCallbacks& cb);

// ---- experiment families ----

RunResult run_node_classification(const ExperimentConfig& cfg);
RunResult run_graph_classification(const ExperimentConfig& cfg);
RunResult run_graph_regression(const ExperimentConfig& cfg);
RunResult run_experiment(const ExperimentConfig& cfg);

}  // namespace gnn
