#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gnn/sparse.hpp"
#include "gnn/tensor.hpp"

namespace gnn {

// One graph: node features X (N x F), binary adjacency A (N x N),
// optional per-edge attributes E (nnz x S, aligned with A's CSR order).
struct Graph {
    Tensor x;
    SparseMatrix a;
    std::optional<Tensor> e;
    std::vector<double> y;  // graph-level target (class index or regression values)

    int64_t order() const { return a.n_rows(); }
    int64_t n_features() const { return x.extent(1); }
};

enum class TaskKind { NodeClassification, GraphClassification, GraphRegression };

struct Dataset {
    std::string name;
    TaskKind task = TaskKind::GraphClassification;
    std::vector<Graph> graphs;
    int n_classes = 0;   // 0 for regression
    int n_targets = 0;   // regression target count

    // node-level task annotations (single-graph datasets)
    std::vector<int> node_labels;
    std::vector<uint8_t> labeled;  // 1 = node carries a usable label

    int64_t n_features() const { return graphs.empty() ? 0 : graphs[0].n_features(); }
    double mean_order() const;
};

struct DisjointBatch {
    Tensor x;
    SparseMatrix a;
    std::optional<Tensor> e;
    std::vector<int> segment_ids;
    int n_graphs = 0;
};

struct DenseBatch {
    Tensor a;     // (B, N_max, N_max)
    Tensor x;     // (B, N_max, F)
    std::vector<uint8_t> mask;  // (B * N_max), 1 = real node
    int n_graphs = 0;
    int64_t n_max = 0;
};

DisjointBatch to_disjoint(const std::vector<Graph>& graphs);
DenseBatch to_dense(const std::vector<Graph>& graphs, int64_t n_max = -1);

// Mixed mode: one fixed support, B feature tensors. Equivalent to
// per-sample spmm over the batch axis.
Tensor mixed_mode_spmm(const SparseMatrix& a, const Tensor& x_batch);

// ---- splits ----

struct SplitMasks {
    std::vector<uint8_t> train, val, test;
};

// Per-class node split: 20 train / 30 val per class, remainder test.
SplitMasks split_per_class(const std::vector<int>& labels, const std::vector<uint8_t>& labeled,
                           int n_classes, int train_per_class, int val_per_class,
                           uint64_t seed);

// Fraction split over graphs: 80/10/10 by default.
SplitMasks split_fractions(int64_t n, double train_frac, double val_frac, uint64_t seed);

// ---- loaders ----

// Citation format: edges.tsv (0-based pairs), features.csv, labels.csv.
Dataset load_citation(const std::string& dir, const std::string& name = "citation",
                      bool row_normalize = true);

// TU graph-kernel plain-text layout, 1-based indices.
Dataset load_tu(const std::string& dir, const std::string& name);

// Concatenated V2000 molfiles + targets.csv (index, Mu, Alpha, Homo, U0).
struct Qm9LoadStats {
    int skipped_unknown_element = 0;
};
Dataset load_qm9_sdf(const std::string& sdf_path, const std::string& targets_path,
                     int64_t limit = -1, Qm9LoadStats* stats = nullptr);

extern const std::vector<std::string> kQm9Elements;   // H,C,N,O,F
extern const std::vector<std::string> kQm9TargetNames;  // Mu,Alpha,Homo,U0
constexpr int kQm9BondTypes = 4;  // single, double, triple, aromatic

}  // namespace gnn
