#pragma once

#include <memory>
#include <string>
#include <vector>

#include "gnn/data.hpp"
#include "gnn/layers.hpp"
#include "gnn/pooling.hpp"

namespace gnn {

// Masked cross-entropy from raw logits: mean over the rows where
// mask != 0 of -log softmax(logits)[label].
Tensor masked_cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                            const std::vector<uint8_t>& mask);
double masked_accuracy(const Tensor& logits, const std::vector<int>& labels,
                       const std::vector<uint8_t>& mask);

// Cross-entropy over per-graph logits (B, C) with one label per graph.
Tensor graph_cross_entropy(const Tensor& logits, const std::vector<int>& labels);
double graph_accuracy(const Tensor& logits, const std::vector<int>& labels);

Tensor mse_loss(const Tensor& pred, const Tensor& target);

// ---- node classification ----

// Two-layer citation-network architectures with per-model defaults.
class NodeModel {
  public:
    struct Hyper {
        double learning_rate = 0.01;
        double l2 = 5e-4;
        double dropout = 0.5;
        double edge_dropout = 0.0;  // ARMA applies dropout to propagation
        int max_epochs = 200;
        int patience = 10;
    };
    static Hyper defaults(const std::string& model);

    NodeModel(const std::string& model, int64_t f_in, int n_classes, Rng& rng);
    // logits (N, C)
    Tensor forward(const SparseMatrix& a, const Tensor& x, bool training, Rng& rng) const;
    std::vector<Param> params() const;
    std::vector<Param> l2_params() const;
    const std::string& kind() const { return kind_; }

  private:
    std::string kind_;
    Hyper hyper_;
    std::unique_ptr<GcnConv> gcn1_, gcn2_;
    std::unique_ptr<ChebConv> cheb1_, cheb2_;
    std::unique_ptr<GatConv> gat1_, gat2_;
    std::unique_ptr<ArmaConv> arma1_, arma2_;
    std::unique_ptr<AppnpConv> appnp_;
};

// ---- graph classification ----

// GCS - Pool - GCS - Pool - GCS - GlobalSumPool - Dense, with the pool
// slot chosen by name ("flat" drops the pooling layers entirely;
// "diffpool" drops the first two GCS layers).
class GraphClassModel {
  public:
    GraphClassModel(const std::string& pooling, int64_t f_in, int n_classes,
                    int64_t k1, int64_t k2, Rng& rng, int64_t channels = 32);

    // disjoint path (flat, topk, sagpool)
    Tensor forward_disjoint(const DisjointBatch& batch,
                            std::map<std::string, Tensor>* aux_losses) const;
    // dense path (mincut, diffpool)
    Tensor forward_dense(const DenseBatch& batch,
                         std::map<std::string, Tensor>* aux_losses) const;

    bool dense_mode() const { return pooling_ == "mincut" || pooling_ == "diffpool"; }
    std::vector<Param> params() const;
    std::vector<Param> l2_params() const;
    const std::string& pooling() const { return pooling_; }

  private:
    std::string pooling_;
    int64_t channels_;
    std::unique_ptr<GcsConv> gcs1_, gcs2_, gcs3_;
    std::unique_ptr<TopKPool> topk1_, topk2_;
    std::unique_ptr<SagPool> sag1_, sag2_;
    std::unique_ptr<MinCutPool> mincut1_, mincut2_;
    std::unique_ptr<DiffPool> diff1_, diff2_;
    DenseLayer out_;
};

// ---- graph regression ----

// ECC - ECC - GlobalPooling - Dense (linear output), disjoint mode.
class GraphRegModel {
  public:
    GraphRegModel(const std::string& global_pool, int64_t f_in, int64_t edge_dim,
                  int n_targets, Rng& rng, int64_t channels = 32);
    Tensor forward(const DisjointBatch& batch) const;
    std::vector<Param> params() const;

  private:
    std::string pool_;
    std::unique_ptr<EccConv> ecc1_, ecc2_;
    std::unique_ptr<GapGlobalPool> gap_;
    std::unique_ptr<AwspGlobalPool> awsp_;
    DenseLayer out_;
};

}  // namespace gnn
