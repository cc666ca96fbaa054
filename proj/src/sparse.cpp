#include "gnn/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gnn {

SparseMatrix SparseMatrix::from_coo(int64_t n_rows, int64_t n_cols,
                                    const std::vector<int64_t>& rows,
                                    const std::vector<int64_t>& cols,
                                    const std::vector<double>& vals) {
    if (rows.size() != cols.size() || rows.size() != vals.size())
        throw ShapeError("from_coo: triplet arrays differ in length");
    for (size_t i = 0; i < rows.size(); ++i)
        if (rows[i] < 0 || rows[i] >= n_rows || cols[i] < 0 || cols[i] >= n_cols)
            throw ShapeError("from_coo: index (" + std::to_string(rows[i]) + "," +
                             std::to_string(cols[i]) + ") outside " +
                             std::to_string(n_rows) + "x" + std::to_string(n_cols));

    std::vector<size_t> order(rows.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return rows[a] != rows[b] ? rows[a] < rows[b] : cols[a] < cols[b];
    });

    SparseMatrix m;
    m.n_rows_ = n_rows;
    m.n_cols_ = n_cols;
    m.row_ptr_.assign((size_t)n_rows + 1, 0);
    for (size_t k = 0; k < order.size(); ++k) {
        size_t i = order[k];
        // duplicates merge by summation
        if (k > 0 && rows[order[k - 1]] == rows[i] && cols[order[k - 1]] == cols[i]) {
            m.values_.back() += vals[i];
            continue;
        }
        m.col_idx_.push_back(cols[i]);
        m.values_.push_back(vals[i]);
        m.row_ptr_[(size_t)rows[i] + 1] += 1;
    }
    for (size_t r = 0; r < (size_t)n_rows; ++r) m.row_ptr_[r + 1] += m.row_ptr_[r];
    return m;
}

SparseMatrix SparseMatrix::identity(int64_t n) {
    std::vector<int64_t> idx((size_t)n);
    std::iota(idx.begin(), idx.end(), 0);
    return from_coo(n, n, idx, idx, std::vector<double>((size_t)n, 1.0));
}

SparseMatrix SparseMatrix::from_dense(const Tensor& dense, double tol) {
    if (dense.rank() != 2) throw ShapeError("from_dense: rank-2 tensor required");
    std::vector<int64_t> r, c;
    std::vector<double> v;
    int64_t n = dense.extent(0), m = dense.extent(1);
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < m; ++j) {
            double x = dense.data()[i * m + j];
            if (std::fabs(x) > tol) {
                r.push_back(i);
                c.push_back(j);
                v.push_back(x);
            }
        }
    return from_coo(n, m, r, c, v);
}

std::vector<int> SparseMatrix::edge_rows() const {
    std::vector<int> out;
    out.reserve((size_t)nnz());
    for (int64_t r = 0; r < n_rows_; ++r)
        for (int64_t k = row_ptr_[(size_t)r]; k < row_ptr_[(size_t)r + 1]; ++k)
            out.push_back((int)r);
    return out;
}

std::vector<int> SparseMatrix::edge_cols() const {
    std::vector<int> out(col_idx_.begin(), col_idx_.end());
    return out;
}

double SparseMatrix::get(int64_t r, int64_t c) const {
    for (int64_t k = row_ptr_[(size_t)r]; k < row_ptr_[(size_t)r + 1]; ++k)
        if (col_idx_[(size_t)k] == c) return values_[(size_t)k];
    return 0.0;
}

bool SparseMatrix::is_symmetric(double tol) const {
    if (n_rows_ != n_cols_) return false;
    for (int64_t r = 0; r < n_rows_; ++r)
        for (int64_t k = row_ptr_[(size_t)r]; k < row_ptr_[(size_t)r + 1]; ++k)
            if (std::fabs(values_[(size_t)k] - get(col_idx_[(size_t)k], r)) > tol)
                return false;
    return true;
}

bool SparseMatrix::is_binary() const {
    for (double v : values_)
        if (v != 0.0 && v != 1.0) return false;
    return true;
}

Tensor SparseMatrix::to_dense() const {
    Tensor out({n_rows_, n_cols_});
    for (int64_t r = 0; r < n_rows_; ++r)
        for (int64_t k = row_ptr_[(size_t)r]; k < row_ptr_[(size_t)r + 1]; ++k)
            out.data()[r * n_cols_ + col_idx_[(size_t)k]] = values_[(size_t)k];
    return out;
}

std::vector<double> SparseMatrix::row_sums() const {
    std::vector<double> s((size_t)n_rows_, 0.0);
    for (int64_t r = 0; r < n_rows_; ++r)
        for (int64_t k = row_ptr_[(size_t)r]; k < row_ptr_[(size_t)r + 1]; ++k)
            s[(size_t)r] += values_[(size_t)k];
    return s;
}

SparseMatrix SparseMatrix::with_values(std::vector<double> vals) const {
    if ((int64_t)vals.size() != nnz())
        throw ShapeError("with_values: length mismatch");
    SparseMatrix m = *this;
    m.values_ = std::move(vals);
    return m;
}

// ---- products ----

// y(N,F) = A x(N,F), fixed per-row accumulation order
static void spmm_kernel(const SparseMatrix& a, const double* x, double* y, int64_t f) {
    const auto& rp = a.row_ptr();
    const auto& ci = a.col_idx();
    const auto& av = a.values();
    for (int64_t r = 0; r < a.n_rows(); ++r) {
        double* yr = y + r * f;
        for (int64_t k = rp[(size_t)r]; k < rp[(size_t)r + 1]; ++k) {
            double w = av[(size_t)k];
            const double* xc = x + ci[(size_t)k] * f;
            for (int64_t j = 0; j < f; ++j) yr[j] += w * xc[j];
        }
    }
}

// y += A^T x
static void spmm_t_kernel(const SparseMatrix& a, const double* x, double* y, int64_t f) {
    const auto& rp = a.row_ptr();
    const auto& ci = a.col_idx();
    const auto& av = a.values();
    for (int64_t r = 0; r < a.n_rows(); ++r) {
        const double* xr = x + r * f;
        for (int64_t k = rp[(size_t)r]; k < rp[(size_t)r + 1]; ++k) {
            double w = av[(size_t)k];
            double* yc = y + ci[(size_t)k] * f;
            for (int64_t j = 0; j < f; ++j) yc[j] += w * xr[j];
        }
    }
}

Tensor spmm(const SparseMatrix& a, const Tensor& x) {
    if (x.rank() != 2 && x.rank() != 3)
        throw ShapeError("spmm: X must be rank 2 or 3, got " + shape_str(x.shape()));
    int64_t n = x.extent(-2), f = x.extent(-1);
    if (a.n_cols() != n)
        throw ShapeError("spmm: A is " + std::to_string(a.n_rows()) + "x" +
                         std::to_string(a.n_cols()) + " but X is " + shape_str(x.shape()));
    int64_t B = x.rank() == 3 ? x.extent(0) : 1;
    Shape os = x.shape();
    os[os.size() - 2] = a.n_rows();
    Tensor out(os);
    for (int64_t s = 0; s < B; ++s)
        spmm_kernel(a, x.data() + s * n * f, out.data() + s * a.n_rows() * f, f);

    if (Tape* tape = Tape::active()) {
        int xid = tape->track(x);
        int oid = tape->track(out);
        int64_t nr = a.n_rows();
        tape->record({xid}, oid, [a, x, xid, B, n, nr, f](const Tensor& g, Tape& t) {
            Tensor dx(x.shape());
            for (int64_t s = 0; s < B; ++s)
                spmm_t_kernel(a, g.data() + s * nr * f, dx.data() + s * n * f, f);
            t.accumulate(xid, dx);
        });
    }
    return out;
}

Tensor spmm_weighted(const SparseMatrix& pattern, const Tensor& edge_values,
                     const Tensor& x) {
    if (edge_values.size() != pattern.nnz())
        throw ShapeError("spmm_weighted: edge value count " +
                         std::to_string(edge_values.size()) + " != nnz " +
                         std::to_string(pattern.nnz()));
    if (x.rank() != 2 || x.extent(0) != pattern.n_cols())
        throw ShapeError("spmm_weighted: X shape " + shape_str(x.shape()) +
                         " incompatible with pattern");
    int64_t f = x.extent(1);
    Tensor out({pattern.n_rows(), f});
    const auto& rp = pattern.row_ptr();
    const auto& ci = pattern.col_idx();
    const double* ev = edge_values.data();
    for (int64_t r = 0; r < pattern.n_rows(); ++r) {
        double* yr = out.data() + r * f;
        for (int64_t k = rp[(size_t)r]; k < rp[(size_t)r + 1]; ++k) {
            const double* xc = x.data() + ci[(size_t)k] * f;
            for (int64_t j = 0; j < f; ++j) yr[j] += ev[k] * xc[j];
        }
    }
    if (Tape* tape = Tape::active()) {
        int vid = tape->track(edge_values);
        int xid = tape->track(x);
        int oid = tape->track(out);
        tape->record({vid, xid}, oid,
                     [pattern, edge_values, x, vid, xid, f](const Tensor& g, Tape& t) {
                         Tensor dv(edge_values.shape());
                         Tensor dx(x.shape());
                         const auto& rp = pattern.row_ptr();
                         const auto& ci = pattern.col_idx();
                         for (int64_t r = 0; r < pattern.n_rows(); ++r) {
                             const double* gr = g.data() + r * f;
                             for (int64_t k = rp[(size_t)r]; k < rp[(size_t)r + 1]; ++k) {
                                 int64_t c = ci[(size_t)k];
                                 const double* xc = x.data() + c * f;
                                 double* dxc = dx.data() + c * f;
                                 double s = 0;
                                 double w = edge_values.data()[k];
                                 for (int64_t j = 0; j < f; ++j) {
                                     s += gr[j] * xc[j];
                                     dxc[j] += w * gr[j];
                                 }
                                 dv.data()[k] = s;
                             }
                         }
                         t.accumulate(vid, dv);
                         t.accumulate(xid, dx);
                     });
    }
    return out;
}

// ---- characteristic matrices ----

static void require_square(const SparseMatrix& a, const char* op) {
    if (a.n_rows() != a.n_cols())
        throw ShapeError(std::string(op) + ": square matrix required");
}

SparseMatrix gcn_filter(const SparseMatrix& a) {
    require_square(a, "gcn_filter");
    int64_t n = a.n_rows();
    // A + I
    std::vector<int64_t> r, c;
    std::vector<double> v;
    auto rows = a.edge_rows();
    for (size_t k = 0; k < rows.size(); ++k) {
        r.push_back(rows[k]);
        c.push_back(a.col_idx()[k]);
        v.push_back(a.values()[k]);
    }
    for (int64_t i = 0; i < n; ++i) {
        r.push_back(i);
        c.push_back(i);
        v.push_back(1.0);
    }
    SparseMatrix ai = SparseMatrix::from_coo(n, n, r, c, v);
    auto deg = ai.row_sums();
    std::vector<double> dinv((size_t)n);
    for (int64_t i = 0; i < n; ++i)
        dinv[(size_t)i] = deg[(size_t)i] > 0 ? 1.0 / std::sqrt(deg[(size_t)i]) : 0.0;
    std::vector<double> vals = ai.values();
    auto er = ai.edge_rows();
    for (size_t k = 0; k < vals.size(); ++k)
        vals[k] *= dinv[(size_t)er[k]] * dinv[(size_t)ai.col_idx()[k]];
    return ai.with_values(std::move(vals));
}

SparseMatrix sym_normalized_adjacency(const SparseMatrix& a) {
    require_square(a, "sym_normalized_adjacency");
    int64_t n = a.n_rows();
    auto deg = a.row_sums();
    std::vector<double> dinv((size_t)n);
    for (int64_t i = 0; i < n; ++i)
        dinv[(size_t)i] = deg[(size_t)i] > 0 ? 1.0 / std::sqrt(deg[(size_t)i]) : 0.0;
    std::vector<double> vals = a.values();
    auto er = a.edge_rows();
    for (size_t k = 0; k < vals.size(); ++k)
        vals[k] *= dinv[(size_t)er[k]] * dinv[(size_t)a.col_idx()[k]];
    return a.with_values(std::move(vals));
}

SparseMatrix normalized_laplacian(const SparseMatrix& a) {
    require_square(a, "normalized_laplacian");
    int64_t n = a.n_rows();
    SparseMatrix na = sym_normalized_adjacency(a);
    std::vector<int64_t> r, c;
    std::vector<double> v;
    auto er = na.edge_rows();
    for (size_t k = 0; k < (size_t)na.nnz(); ++k) {
        r.push_back(er[k]);
        c.push_back(na.col_idx()[k]);
        v.push_back(-na.values()[k]);
    }
    for (int64_t i = 0; i < n; ++i) {
        r.push_back(i);
        c.push_back(i);
        v.push_back(1.0);
    }
    return SparseMatrix::from_coo(n, n, r, c, v);
}

SparseMatrix rescaled_laplacian(const SparseMatrix& a, double lambda_max) {
    if (lambda_max <= 0) throw ShapeError("rescaled_laplacian: lambda_max must be > 0");
    SparseMatrix l = normalized_laplacian(a);
    int64_t n = l.n_rows();
    std::vector<int64_t> r, c;
    std::vector<double> v;
    auto er = l.edge_rows();
    double s = 2.0 / lambda_max;
    for (size_t k = 0; k < (size_t)l.nnz(); ++k) {
        r.push_back(er[k]);
        c.push_back(l.col_idx()[k]);
        v.push_back(s * l.values()[k]);
    }
    for (int64_t i = 0; i < n; ++i) {
        r.push_back(i);
        c.push_back(i);
        v.push_back(-1.0);
    }
    return SparseMatrix::from_coo(n, n, r, c, v);
}

BlockDiagonal block_diagonal(const std::vector<SparseMatrix>& blocks) {
    if (blocks.empty()) throw ShapeError("block_diagonal: empty list");
    int64_t n = 0, nnz = 0;
    for (const auto& b : blocks) {
        require_square(b, "block_diagonal");
        n += b.n_rows();
        nnz += b.nnz();
    }
    std::vector<int64_t> r, c;
    std::vector<double> v;
    r.reserve((size_t)nnz);
    c.reserve((size_t)nnz);
    v.reserve((size_t)nnz);
    BlockDiagonal out;
    out.segment_ids.reserve((size_t)n);
    int64_t off = 0;
    for (size_t g = 0; g < blocks.size(); ++g) {
        const auto& b = blocks[g];
        auto er = b.edge_rows();
        for (size_t k = 0; k < (size_t)b.nnz(); ++k) {
            r.push_back(off + er[k]);
            c.push_back(off + b.col_idx()[k]);
            v.push_back(b.values()[k]);
        }
        for (int64_t i = 0; i < b.n_rows(); ++i) out.segment_ids.push_back((int)g);
        off += b.n_rows();
    }
    out.matrix = SparseMatrix::from_coo(n, n, r, c, v);
    return out;
}

PowerIterationResult power_iteration_lambda_max(const SparseMatrix& a, int max_iters,
                                                double tol) {
    require_square(a, "power_iteration");
    int64_t n = a.n_rows();
    Rng rng(12345);
    std::uniform_real_distribution<double> dist(0.5, 1.0);
    std::vector<double> x((size_t)n);
    for (auto& xi : x) xi = dist(rng);

    PowerIterationResult res;
    double prev = 0.0;
    std::vector<double> y((size_t)n);
    for (int it = 0; it < max_iters; ++it) {
        std::fill(y.begin(), y.end(), 0.0);
        spmm_kernel(a, x.data(), y.data(), 1);
        double xy = 0, xx = 0;
        for (int64_t i = 0; i < n; ++i) {
            xy += x[(size_t)i] * y[(size_t)i];
            xx += x[(size_t)i] * x[(size_t)i];
        }
        double lam = xx > 0 ? xy / xx : 0.0;
        double nrm = 0;
        for (double yi : y) nrm += yi * yi;
        nrm = std::sqrt(nrm);
        if (nrm == 0) {
            res.lambda_max = 0.0;
            res.converged = true;
            res.iterations = it + 1;
            return res;
        }
        for (int64_t i = 0; i < n; ++i) x[(size_t)i] = y[(size_t)i] / nrm;
        res.lambda_max = lam;
        res.iterations = it + 1;
        if (it > 0 && std::fabs(lam - prev) <= tol) {
            res.converged = true;
            return res;
        }
        prev = lam;
    }
    return res;
}

}  // namespace gnn
