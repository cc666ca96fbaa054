#pragma once

#include <tuple>
#include <vector>

#include "gnn/tensor.hpp"

namespace gnn {

// CSR matrix, canonical form: rows sorted, column indices strictly
// increasing within a row, no explicit duplicates. Immutable once built.
class SparseMatrix {
  public:
    SparseMatrix() = default;

    // From COO triplets; duplicates are summed during canonicalization.
    static SparseMatrix from_coo(int64_t n_rows, int64_t n_cols,
                                 const std::vector<int64_t>& rows,
                                 const std::vector<int64_t>& cols,
                                 const std::vector<double>& vals);
    static SparseMatrix identity(int64_t n);
    static SparseMatrix from_dense(const Tensor& dense, double tol = 0.0);

    int64_t n_rows() const { return n_rows_; }
    int64_t n_cols() const { return n_cols_; }
    int64_t nnz() const { return (int64_t)values_.size(); }

    const std::vector<int64_t>& row_ptr() const { return row_ptr_; }
    const std::vector<int64_t>& col_idx() const { return col_idx_; }
    const std::vector<double>& values() const { return values_; }

    // per-edge row index (length nnz, non-decreasing)
    std::vector<int> edge_rows() const;
    std::vector<int> edge_cols() const;

    double get(int64_t r, int64_t c) const;
    bool is_symmetric(double tol = 0.0) const;
    bool is_binary() const;

    Tensor to_dense() const;
    std::vector<double> row_sums() const;

    // A with new values in the same sparsity pattern.
    SparseMatrix with_values(std::vector<double> vals) const;

  private:
    int64_t n_rows_ = 0, n_cols_ = 0;
    std::vector<int64_t> row_ptr_{0};
    std::vector<int64_t> col_idx_;
    std::vector<double> values_;
};

// sparse x dense, differentiable w.r.t. X. Supports X of rank 2 (N,F)
// and rank 3 mixed mode (B,N,F), applying A per batch sample.
Tensor spmm(const SparseMatrix& a, const Tensor& x);

// sparse x dense with the entry values given as a tensor aligned with
// CSR order (shape (nnz) or (nnz,1)); differentiable w.r.t. both
// edge_values and X. Used for attention-weighted aggregation.
Tensor spmm_weighted(const SparseMatrix& pattern, const Tensor& edge_values,
                     const Tensor& x);

// D~^{-1/2} (A + I) D~^{-1/2} with D~ the degree matrix of A + I.
SparseMatrix gcn_filter(const SparseMatrix& a);

// L = I - D^{-1/2} A D^{-1/2}; zero-degree nodes get d^{-1/2} := 0.
SparseMatrix normalized_laplacian(const SparseMatrix& a);

// L~ = 2 L / lambda_max - I.
SparseMatrix rescaled_laplacian(const SparseMatrix& a, double lambda_max = 2.0);

// D^{-1/2} A D^{-1/2} (no self loops); the ARMA propagation matrix.
SparseMatrix sym_normalized_adjacency(const SparseMatrix& a);

struct BlockDiagonal {
    SparseMatrix matrix;
    std::vector<int> segment_ids;
};
BlockDiagonal block_diagonal(const std::vector<SparseMatrix>& blocks);

struct PowerIterationResult {
    double lambda_max = 0.0;
    bool converged = false;
    int iterations = 0;
};
PowerIterationResult power_iteration_lambda_max(const SparseMatrix& a, int max_iters = 200,
                                                double tol = 1e-9);

}  // namespace gnn
