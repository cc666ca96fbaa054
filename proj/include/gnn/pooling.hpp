#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gnn/layers.hpp"

namespace gnn {

// Output of a pooling step. Sparse-mode poolers fill a_sparse and
// segment_ids; dense-mode poolers fill a_dense (and keep every cluster
// "real", so no mask is needed downstream).
struct PoolResult {
    Tensor x;
    std::optional<SparseMatrix> a_sparse;
    std::optional<Tensor> a_dense;  // (B, K, K)
    std::vector<int> segment_ids;
    std::map<std::string, Tensor> auxiliary_losses;
};

// Score-and-keep pooling: keeps the ceil(ratio * n_i) best-scoring
// nodes of each graph (at least one), gated by tanh(score).
class TopKPool {
  public:
    TopKPool(std::string name, int64_t f_in, double ratio, Rng& rng);
    PoolResult forward(const SparseMatrix& a, const Tensor& x,
                       const std::vector<int>& segment_ids, int n_graphs) const;
    std::vector<Param> params() const;
    Tensor p;  // (F, 1) projection

  private:
    std::string name_;
    double ratio_;
};

// Top-K with graph-aware scores from an internal one-unit GCN.
class SagPool {
  public:
    SagPool(std::string name, int64_t f_in, double ratio, Rng& rng);
    PoolResult forward(const SparseMatrix& a, const Tensor& x,
                       const std::vector<int>& segment_ids, int n_graphs) const;
    std::vector<Param> params() const;
    GcnConv score_gcn;

  private:
    std::string name_;
    double ratio_;
};

// Soft cluster assignment with internal message-passing layers.
// Dense-batch mode only. Auxiliary losses: "link", "entropy".
class DiffPool {
  public:
    DiffPool(std::string name, int64_t f_in, int64_t channels, int64_t k_out, Rng& rng);
    PoolResult forward(const Tensor& a, const Tensor& x,
                       const std::vector<uint8_t>& mask) const;
    std::vector<Param> params() const;
    GcnConv embed_gnn, assign_gnn;
    int64_t k_out() const { return k_out_; }

  private:
    std::string name_;
    int64_t k_out_;
};

// MLP cluster assignment trained by cut and orthogonality losses.
// Dense-batch mode only. Auxiliary losses: "cut", "ortho".
class MinCutPool {
  public:
    MinCutPool(std::string name, int64_t f_in, int64_t hidden, int64_t k_out, Rng& rng);
    PoolResult forward(const Tensor& a, const Tensor& x,
                       const std::vector<uint8_t>& mask) const;
    std::vector<Param> params() const;
    Mlp assign_mlp;
    int64_t k_out() const { return k_out_; }

  private:
    std::string name_;
    int64_t k_out_;
};

// ---- global pooling ----

enum class GlobalPoolKind { Sum, Average, Max };

// Disjoint mode: per-graph reduction via segment ids.
Tensor global_pool(const Tensor& x, const std::vector<int>& segment_ids, int n_graphs,
                   GlobalPoolKind kind);

// Gated attention pooling: sum_i sigmoid(x_i Wg) * (x_i Wt) per graph.
class GapGlobalPool {
  public:
    GapGlobalPool(std::string name, int64_t f_in, int64_t units, Rng& rng);
    Tensor forward(const Tensor& x, const std::vector<int>& segment_ids,
                   int n_graphs) const;
    std::vector<Param> params() const;
    Tensor w_gate, w_trans;

  private:
    std::string name_;
};

// Attention-weighted sum with one learned query vector.
class AwspGlobalPool {
  public:
    AwspGlobalPool(std::string name, int64_t f_in, Rng& rng);
    Tensor forward(const Tensor& x, const std::vector<int>& segment_ids,
                   int n_graphs) const;
    std::vector<Param> params() const;
    Tensor q;  // (F, 1)

  private:
    std::string name_;
};

}  // namespace gnn
