#include "gnn/pooling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gnn {

// ---- shared top-k machinery ----

namespace {

// Per-graph selection of the ceil(ratio*n_i) best-scoring nodes, at
// least one per graph. Ties keep the lowest node index (stable sort).
std::vector<int> select_topk(const Tensor& scores, const std::vector<int>& segment_ids,
                             int n_graphs, double ratio) {
    int64_t n = scores.size();
    std::vector<std::vector<int>> per_graph((size_t)n_graphs);
    for (int64_t i = 0; i < n; ++i) per_graph[(size_t)segment_ids[(size_t)i]].push_back((int)i);
    std::vector<int> kept;
    for (int g = 0; g < n_graphs; ++g) {
        auto& idx = per_graph[(size_t)g];
        if (idx.empty()) continue;
        int keep = (int)std::ceil(ratio * (double)idx.size());
        keep = std::max(1, std::min(keep, (int)idx.size()));
        std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
            return scores.data()[a] > scores.data()[b];
        });
        idx.resize((size_t)keep);
        std::sort(idx.begin(), idx.end());  // preserve node order inside the graph
        kept.insert(kept.end(), idx.begin(), idx.end());
    }
    return kept;
}

SparseMatrix submatrix(const SparseMatrix& a, const std::vector<int>& kept) {
    std::vector<int64_t> remap((size_t)a.n_rows(), -1);
    for (size_t k = 0; k < kept.size(); ++k) remap[(size_t)kept[k]] = (int64_t)k;
    std::vector<int64_t> r, c;
    std::vector<double> v;
    auto er = a.edge_rows();
    for (int64_t k = 0; k < a.nnz(); ++k) {
        int64_t nr = remap[(size_t)er[(size_t)k]];
        int64_t nc = remap[(size_t)a.col_idx()[(size_t)k]];
        if (nr >= 0 && nc >= 0) {
            r.push_back(nr);
            c.push_back(nc);
            v.push_back(a.values()[(size_t)k]);
        }
    }
    return SparseMatrix::from_coo((int64_t)kept.size(), (int64_t)kept.size(), r, c, v);
}

PoolResult topk_apply(const SparseMatrix& a, const Tensor& x, const Tensor& scores,
                      const std::vector<int>& segment_ids, int n_graphs, double ratio) {
    if (ratio <= 0.0 || ratio > 1.0)
        throw std::runtime_error("topk: ratio must be in (0, 1]");
    auto kept = select_topk(scores, segment_ids, n_graphs, ratio);
    if (kept.empty()) throw std::runtime_error("topk: selection kept no nodes");
    PoolResult res;
    res.x = gather(mul(x, tanh_op(scores)), kept);
    res.a_sparse = submatrix(a, kept);
    res.segment_ids.reserve(kept.size());
    for (int i : kept) res.segment_ids.push_back(segment_ids[(size_t)i]);
    return res;
}

}  // namespace

TopKPool::TopKPool(std::string name, int64_t f_in, double ratio, Rng& rng)
    : name_(std::move(name)), ratio_(ratio) {
    p = glorot_uniform({f_in, 1}, rng).set_requires_grad(true);
}

PoolResult TopKPool::forward(const SparseMatrix& a, const Tensor& x,
                             const std::vector<int>& segment_ids, int n_graphs) const {
    // y = X p / ||p||
    Tensor pnorm = sqrt_op(reduce_sum(square(p)));
    Tensor y = mul(matmul(x, p), reciprocal(pnorm));
    return topk_apply(a, x, y, segment_ids, n_graphs, ratio_);
}

std::vector<Param> TopKPool::params() const { return {{name_ + ".p", p}}; }

SagPool::SagPool(std::string name, int64_t f_in, double ratio, Rng& rng)
    : score_gcn(name + ".score", f_in, 1, Activation::Linear, rng), name_(std::move(name)),
      ratio_(ratio) {}

PoolResult SagPool::forward(const SparseMatrix& a, const Tensor& x,
                            const std::vector<int>& segment_ids, int n_graphs) const {
    Tensor y = score_gcn.forward(gcn_filter(a), x);
    return topk_apply(a, x, y, segment_ids, n_graphs, ratio_);
}

std::vector<Param> SagPool::params() const { return score_gcn.params(); }

// ---- dense-mode helpers ----

namespace {

// zero out padded rows of a (B,N,K) tensor
Tensor mask_rows(const Tensor& t, const std::vector<uint8_t>& mask) {
    int64_t B = t.extent(0), n = t.extent(1), k = t.extent(2);
    std::vector<uint8_t> keep((size_t)t.size());
    for (int64_t s = 0; s < B; ++s)
        for (int64_t i = 0; i < n; ++i)
            std::fill_n(keep.begin() + (s * n + i) * k, k, mask[(size_t)(s * n + i)]);
    return masked_fill(t, keep, 0.0);
}

// per-sample sum over the last two axes: (B,N,M) -> (B)
Tensor sum_per_sample(const Tensor& t) {
    return reduce_sum(reduce_sum(t, 2), 1);
}

// per-sample trace of (B,K,K) -> (B)
Tensor trace_per_sample(const Tensor& t) {
    int64_t B = t.extent(0), k = t.extent(1);
    std::vector<uint8_t> keep((size_t)t.size(), 0);
    for (int64_t s = 0; s < B; ++s)
        for (int64_t i = 0; i < k; ++i) keep[(size_t)((s * k + i) * k + i)] = 1;
    return sum_per_sample(masked_fill(t, keep, 0.0));
}

std::vector<double> real_counts(const std::vector<uint8_t>& mask, int64_t B, int64_t n) {
    std::vector<double> c((size_t)B, 0.0);
    for (int64_t s = 0; s < B; ++s)
        for (int64_t i = 0; i < n; ++i) c[(size_t)s] += mask[(size_t)(s * n + i)] ? 1.0 : 0.0;
    return c;
}

}  // namespace

// ---- DiffPool ----

DiffPool::DiffPool(std::string name, int64_t f_in, int64_t channels, int64_t k_out,
                   Rng& rng)
    : embed_gnn(name + ".embed", f_in, channels, Activation::Linear, rng),
      assign_gnn(name + ".assign", f_in, k_out, Activation::Linear, rng),
      name_(std::move(name)), k_out_(k_out) {}

PoolResult DiffPool::forward(const Tensor& a, const Tensor& x,
                             const std::vector<uint8_t>& mask) const {
    int64_t B = a.extent(0), n = a.extent(1);
    Tensor a_hat = gcn_filter_dense(a, mask);
    Tensor s = mask_rows(softmax(assign_gnn.forward_dense(a_hat, x)), mask);  // (B,N,K)
    Tensor z = embed_gnn.forward_dense(a_hat, x);                             // (B,N,C)
    Tensor st = transpose(s);

    PoolResult res;
    res.x = matmul(st, z);                 // (B,K,C)
    res.a_dense = matmul(st, matmul(a, s));  // (B,K,K)

    // link prediction loss ||A - S S^T||_F / N^2, mean over batch
    Tensor diff = sub(a, matmul(s, st));
    Tensor fro = sqrt_op(add_scalar(sum_per_sample(square(diff)), 1e-24));  // (B)
    auto nreal = real_counts(mask, B, n);
    Tensor inv_n2({B});
    for (int64_t i = 0; i < B; ++i) {
        double nr = std::max(nreal[(size_t)i], 1.0);
        inv_n2.data()[i] = 1.0 / (nr * nr);
    }
    res.auxiliary_losses["link"] = reduce_mean(mul(fro, inv_n2));

    // entropy of assignments, mean over real nodes (padded rows of S
    // are zero and contribute nothing)
    Tensor ent_terms = scale(mul(s, log_op(add_scalar(s, 1e-12))), -1.0);
    double total_real = 0;
    for (double c : nreal) total_real += c;
    res.auxiliary_losses["entropy"] =
        scale(reduce_sum(ent_terms), 1.0 / std::max(total_real, 1.0));
    return res;
}

std::vector<Param> DiffPool::params() const {
    auto p = embed_gnn.params();
    auto q = assign_gnn.params();
    p.insert(p.end(), q.begin(), q.end());
    return p;
}

// ---- MinCutPool ----

MinCutPool::MinCutPool(std::string name, int64_t f_in, int64_t hidden, int64_t k_out,
                       Rng& rng)
    : assign_mlp(name + ".assign", f_in, hidden, k_out, Activation::Linear, rng),
      name_(std::move(name)), k_out_(k_out) {}

PoolResult MinCutPool::forward(const Tensor& a, const Tensor& x,
                               const std::vector<uint8_t>& mask) const {
    int64_t B = a.extent(0), n = a.extent(1);
    Tensor s = mask_rows(softmax(assign_mlp.forward(x)), mask);  // (B,N,K)
    Tensor st = transpose(s);

    PoolResult res;
    res.x = matmul(st, x);
    Tensor a_pool = matmul(st, matmul(a, s));  // (B,K,K)

    // cut loss: -Tr(S^T A S) / Tr(S^T D S); 0 for edgeless samples
    Tensor num = trace_per_sample(a_pool);  // (B)
    // D S has rows d_i * s_i; Tr(S^T D S) = sum_i d_i ||s_i||^2
    Tensor deg({B, n, 1});
    std::vector<uint8_t> edged((size_t)B, 0);
    for (int64_t smp = 0; smp < B; ++smp)
        for (int64_t i = 0; i < n; ++i) {
            double d = 0;
            for (int64_t j = 0; j < n; ++j) d += a.data()[(smp * n + i) * n + j];
            deg.data()[smp * n + i] = d;
            if (d > 0) edged[(size_t)smp] = 1;
        }
    Tensor den = reduce_sum(mul(reduce_sum(square(s), 2), reshape(deg, {B, n})), 1);
    // guard edgeless samples: num := 0, den := 1
    std::vector<uint8_t> keepb(edged.begin(), edged.end());
    num = masked_fill(num, keepb, 0.0);
    den = masked_fill(den, keepb, 1.0);
    res.auxiliary_losses["cut"] = reduce_mean(scale(mul(num, reciprocal(den)), -1.0));

    // orthogonality loss || S^T S / ||S^T S||_F  -  I/sqrt(K) ||_F
    Tensor sts = matmul(st, s);  // (B,K,K)
    Tensor sts_fro = sqrt_op(add_scalar(sum_per_sample(square(sts)), 1e-24));  // (B)
    int64_t k = k_out_;
    Tensor eye({B, k, k});
    double invsq = 1.0 / std::sqrt((double)k);
    for (int64_t smp = 0; smp < B; ++smp)
        for (int64_t i = 0; i < k; ++i) eye.data()[(smp * k + i) * k + i] = invsq;
    // scale each sample of sts by 1/||.||_F (row broadcast on the
    // flattened layout)
    Tensor inv_fro = reshape(reciprocal(sts_fro), {B, (int64_t)1});
    Tensor sts_scaled = reshape(mul(reshape(sts, {B, k * k}), inv_fro), {B, k, k});
    Tensor ortho =
        sqrt_op(add_scalar(sum_per_sample(square(sub(sts_scaled, eye))), 1e-24));
    res.auxiliary_losses["ortho"] = reduce_mean(ortho);

    // post-processing of A': zero diagonal, then symmetric degree
    // renormalization, keeping everything differentiable through S
    std::vector<uint8_t> offdiag((size_t)(B * k * k), 1);
    for (int64_t smp = 0; smp < B; ++smp)
        for (int64_t i = 0; i < k; ++i) offdiag[(size_t)((smp * k + i) * k + i)] = 0;
    Tensor a_nodiag = masked_fill(a_pool, offdiag, 0.0);
    Tensor dpool = reduce_sum(a_nodiag, 2);  // (B,K)
    Tensor dinv = reciprocal(sqrt_op(add_scalar(dpool, 1e-12)));  // (B,K)
    Tensor ones_row({1, k}, 1.0);
    Tensor drow = matmul(reshape(dinv, {B, k, (int64_t)1}), ones_row);  // (B,K,K)
    Tensor dcol = transpose(drow);
    res.a_dense = mul(mul(a_nodiag, drow), dcol);
    return res;
}

std::vector<Param> MinCutPool::params() const { return assign_mlp.params(); }

// ---- global pooling ----

Tensor global_pool(const Tensor& x, const std::vector<int>& segment_ids, int n_graphs,
                   GlobalPoolKind kind) {
    switch (kind) {
        case GlobalPoolKind::Sum: return segment_sum(x, segment_ids, n_graphs);
        case GlobalPoolKind::Average: return segment_mean(x, segment_ids, n_graphs);
        case GlobalPoolKind::Max: {
            std::vector<int> count((size_t)n_graphs, 0);
            for (int s : segment_ids) count[(size_t)s] += 1;
            for (int g = 0; g < n_graphs; ++g)
                if (count[(size_t)g] == 0)
                    throw std::runtime_error("global max pool: empty graph " +
                                             std::to_string(g));
            return segment_max(x, segment_ids, n_graphs);
        }
    }
    throw std::runtime_error("unknown global pool kind");
}

GapGlobalPool::GapGlobalPool(std::string name, int64_t f_in, int64_t units, Rng& rng)
    : name_(std::move(name)) {
    w_gate = glorot_uniform({f_in, units}, rng).set_requires_grad(true);
    w_trans = glorot_uniform({f_in, units}, rng).set_requires_grad(true);
}

Tensor GapGlobalPool::forward(const Tensor& x, const std::vector<int>& segment_ids,
                              int n_graphs) const {
    Tensor gated = mul(sigmoid(matmul(x, w_gate)), matmul(x, w_trans));
    return segment_sum(gated, segment_ids, n_graphs);
}

std::vector<Param> GapGlobalPool::params() const {
    return {{name_ + ".w_gate", w_gate}, {name_ + ".w_trans", w_trans}};
}

AwspGlobalPool::AwspGlobalPool(std::string name, int64_t f_in, Rng& rng)
    : name_(std::move(name)) {
    q = glorot_uniform({f_in, 1}, rng).set_requires_grad(true);
}

Tensor AwspGlobalPool::forward(const Tensor& x, const std::vector<int>& segment_ids,
                               int n_graphs) const {
    Tensor scores = matmul(x, q);  // (N,1)
    Tensor mx = segment_max(scores, segment_ids, n_graphs);
    Tensor ex = exp_op(sub(scores, gather(mx, segment_ids)));
    Tensor denom = segment_sum(ex, segment_ids, n_graphs);
    Tensor alpha = mul(ex, reciprocal(gather(denom, segment_ids)));
    return segment_sum(mul(x, alpha), segment_ids, n_graphs);
}

std::vector<Param> AwspGlobalPool::params() const { return {{name_ + ".q", q}}; }

}  // namespace gnn
