#pragma once

#include <memory>
#include <string>
#include <vector>

#include "gnn/data.hpp"
#include "gnn/optim.hpp"
#include "gnn/sparse.hpp"
#include "gnn/tensor.hpp"

namespace gnn {

enum class Activation { Linear, Relu, Softmax, Tanh };
Tensor activate(const Tensor& t, Activation act);

struct UnsupportedMode : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Fully-connected layer.
class DenseLayer {
  public:
    DenseLayer() = default;
    DenseLayer(std::string name, int64_t f_in, int64_t f_out, Activation act, Rng& rng);
    Tensor forward(const Tensor& x) const;
    std::vector<Param> params() const;
    Tensor w, b;

  private:
    std::string name_;
    Activation act_ = Activation::Linear;
};

// Two-layer ReLU MLP (the stack used by GIN, APPNP and MinCut).
class Mlp {
  public:
    Mlp() = default;
    Mlp(std::string name, int64_t f_in, int64_t hidden, int64_t f_out, Activation out_act,
        Rng& rng);
    Tensor forward(const Tensor& x) const;
    std::vector<Param> params() const;

  private:
    DenseLayer l1_, l2_;
};

// X' = act(A_hat X W + b). Expects the gcn_filter of A.
class GcnConv {
  public:
    GcnConv(std::string name, int64_t f_in, int64_t f_out, Activation act, Rng& rng);
    Tensor forward(const SparseMatrix& a_hat, const Tensor& x) const;
    Tensor forward_dense(const Tensor& a_hat, const Tensor& x) const;  // (B,N,N),(B,N,F)
    std::vector<Param> params() const;
    Tensor w, b;

  private:
    std::string name_;
    Activation act_;
};

// Chebyshev polynomial filter of order K on the rescaled Laplacian,
// evaluated with the three-term recurrence applied to X directly.
class ChebConv {
  public:
    ChebConv(std::string name, int64_t f_in, int64_t f_out, int order, Activation act,
             Rng& rng);
    Tensor forward(const SparseMatrix& l_tilde, const Tensor& x) const;
    Tensor forward_dense(const Tensor& l_tilde, const Tensor& x) const;
    std::vector<Param> params() const;
    std::vector<Tensor> w;  // one per polynomial term
    Tensor b;
    int order() const { return (int)w.size(); }

  private:
    std::string name_;
    Activation act_;
};

// Mean-aggregator GraphSAGE with row-wise L2 output normalization.
class SageConv {
  public:
    SageConv(std::string name, int64_t f_in, int64_t f_out, Activation act, Rng& rng);
    // `a` is the raw binary adjacency; neighbor means use D^{-1} A.
    Tensor forward(const SparseMatrix& a, const Tensor& x) const;
    std::vector<Param> params() const;
    Tensor w, b;

  private:
    std::string name_;
    Activation act_;
};

// ARMA stack: K parallel stacks of depth T with shared weights per
// stack; GCS (K=1, T=1) is this layer's degenerate configuration.
class ArmaConv {
  public:
    ArmaConv(std::string name, int64_t f_in, int64_t f_out, int stacks, int depth,
             Activation act, Rng& rng);
    // `l_hat` is D^{-1/2} A D^{-1/2}.
    Tensor forward(const SparseMatrix& l_hat, const Tensor& x) const;
    Tensor forward_dense(const Tensor& l_hat, const Tensor& x) const;
    std::vector<Param> params() const;
    // per stack: w0 (first propagation), w (later hops), v (skip)
    std::vector<Tensor> w0, w, v;
    Tensor b;
    int stacks() const { return (int)w0.size(); }
    int depth() const { return depth_; }

  private:
    template <class MatVec>
    Tensor run(const Tensor& x, MatVec&& prop) const;
    std::string name_;
    int depth_;
    Activation act_;
};

// GCS layer of the ARMA family: X' = act(L_hat X W + X V + b).
class GcsConv {
  public:
    GcsConv(std::string name, int64_t f_in, int64_t f_out, Activation act, Rng& rng)
        : arma_(std::move(name), f_in, f_out, 1, 1, act, rng) {}
    Tensor forward(const SparseMatrix& l_hat, const Tensor& x) const {
        return arma_.forward(l_hat, x);
    }
    Tensor forward_dense(const Tensor& l_hat, const Tensor& x) const {
        return arma_.forward_dense(l_hat, x);
    }
    std::vector<Param> params() const { return arma_.params(); }

  private:
    ArmaConv arma_;
};

// Multi-head graph attention over stored edges plus self-loops.
class GatConv {
  public:
    GatConv(std::string name, int64_t f_in, int64_t channels, int heads, bool concat_heads,
            Activation act, Rng& rng);
    // `a` is the raw binary adjacency (self-loops added internally).
    Tensor forward(const SparseMatrix& a, const Tensor& x, double attn_dropout = 0.0,
                   bool training = false, Rng* rng = nullptr) const;
    Tensor forward_dense(const Tensor& a, const Tensor& x) const;
    std::vector<Param> params() const;
    Tensor w;            // (F_in, H*channels)
    Tensor a_src, a_dst; // (H, channels)
    Tensor b;
    int heads() const { return heads_; }

  private:
    std::string name_;
    int heads_;
    int64_t channels_;
    bool concat_;
    Activation act_;
};

// x'_i = MLP((1+eps) x_i + sum_{j in N(i)} x_j), eps learnable (init 0).
class GinConv {
  public:
    GinConv(std::string name, int64_t f_in, int64_t hidden, int64_t f_out, Activation act,
            Rng& rng);
    Tensor forward(const SparseMatrix& a, const Tensor& x) const;
    Tensor forward_dense(const Tensor& a, const Tensor& x) const;
    std::vector<Param> params() const;
    Tensor eps;
    Mlp mlp;

  private:
    std::string name_;
    Activation act_;
};

// Personalized-propagation layer: Z^{k+1} = (1-alpha) A_hat Z^k + alpha H,
// H = MLP(X).
class AppnpConv {
  public:
    AppnpConv(std::string name, int64_t f_in, int64_t hidden, int64_t f_out, double alpha,
              int iterations, Activation act, Rng& rng);
    Tensor forward(const SparseMatrix& a_hat, const Tensor& x, double mlp_dropout = 0.0,
                   double edge_dropout = 0.0, bool training = false,
                   Rng* rng = nullptr) const;
    std::vector<Param> params() const;
    Mlp mlp;
    double alpha;
    int iterations;

  private:
    std::string name_;
    Activation act_;
};

// Edge-conditioned convolution: the filter matrix for each message is
// generated from the edge attribute by a small MLP.
class EccConv {
  public:
    EccConv(std::string name, int64_t f_in, int64_t f_out, int64_t edge_dim,
            int64_t filter_hidden, Activation act, Rng& rng);
    Tensor forward(const SparseMatrix& a, const Tensor& x, const Tensor& e) const;
    std::vector<Param> params() const;
    Mlp filter_mlp;  // edge_dim -> hidden -> f_in*f_out
    Tensor w_root, b;

  private:
    std::string name_;
    int64_t f_in_, f_out_;
    Activation act_;
};

// L2 penalty sum over the given parameters: strength * sum ||W||^2.
Tensor l2_penalty(const std::vector<Param>& params, double strength);

// Dense-mode characteristic matrices computed per batch sample from a
// zero-padded adjacency tensor (B,N,N).
Tensor gcn_filter_dense(const Tensor& a, const std::vector<uint8_t>& mask);
Tensor rescaled_laplacian_dense(const Tensor& a, const std::vector<uint8_t>& mask,
                                double lambda_max = 2.0);
Tensor sym_normalized_adjacency_dense(const Tensor& a);

}  // namespace gnn
