#include "gnn/layers.hpp"

#include <cmath>

namespace gnn {

Tensor activate(const Tensor& t, Activation act) {
    switch (act) {
        case Activation::Linear: return t;
        case Activation::Relu: return relu(t);
        case Activation::Softmax: return softmax(t);
        case Activation::Tanh: return tanh_op(t);
    }
    throw std::runtime_error("unknown activation");
}

// ---- DenseLayer / Mlp ----

DenseLayer::DenseLayer(std::string name, int64_t f_in, int64_t f_out, Activation act,
                       Rng& rng)
    : name_(std::move(name)), act_(act) {
    w = glorot_uniform({f_in, f_out}, rng).set_requires_grad(true);
    b = Tensor({f_out}, 0.0).set_requires_grad(true);
}

Tensor DenseLayer::forward(const Tensor& x) const {
    return activate(add(matmul(x, w), b), act_);
}

std::vector<Param> DenseLayer::params() const {
    return {{name_ + ".w", w}, {name_ + ".b", b}};
}

Mlp::Mlp(std::string name, int64_t f_in, int64_t hidden, int64_t f_out, Activation out_act,
         Rng& rng)
    : l1_(name + ".l1", f_in, hidden, Activation::Relu, rng),
      l2_(name + ".l2", hidden, f_out, out_act, rng) {}

Tensor Mlp::forward(const Tensor& x) const { return l2_.forward(l1_.forward(x)); }

std::vector<Param> Mlp::params() const {
    auto p = l1_.params();
    auto q = l2_.params();
    p.insert(p.end(), q.begin(), q.end());
    return p;
}

// ---- GCN ----

GcnConv::GcnConv(std::string name, int64_t f_in, int64_t f_out, Activation act, Rng& rng)
    : name_(std::move(name)), act_(act) {
    w = glorot_uniform({f_in, f_out}, rng).set_requires_grad(true);
    b = Tensor({f_out}, 0.0).set_requires_grad(true);
}

Tensor GcnConv::forward(const SparseMatrix& a_hat, const Tensor& x) const {
    if (x.rank() != 2)
        throw UnsupportedMode(name_ + ": sparse forward expects single/disjoint mode");
    return activate(add(spmm(a_hat, matmul(x, w)), b), act_);
}

Tensor GcnConv::forward_dense(const Tensor& a_hat, const Tensor& x) const {
    if (x.rank() != 3 || a_hat.rank() != 3)
        throw UnsupportedMode(name_ + ": dense forward expects batch mode");
    return activate(add(matmul(a_hat, matmul(x, w)), b), act_);
}

std::vector<Param> GcnConv::params() const {
    return {{name_ + ".w", w}, {name_ + ".b", b}};
}

// ---- ChebNet ----

ChebConv::ChebConv(std::string name, int64_t f_in, int64_t f_out, int order, Activation act,
                   Rng& rng)
    : name_(std::move(name)), act_(act) {
    if (order < 1) throw std::runtime_error(name_ + ": order must be >= 1");
    for (int k = 0; k < order; ++k)
        w.push_back(glorot_uniform({f_in, f_out}, rng).set_requires_grad(true));
    b = Tensor({f_out}, 0.0).set_requires_grad(true);
}

template <class MatVec>
static Tensor cheb_run(const std::vector<Tensor>& w, const Tensor& b, Activation act,
                       const Tensor& x, MatVec&& prop) {
    Tensor t_prev2 = x;           // T_0 X
    Tensor acc = matmul(x, w[0]);
    if (w.size() > 1) {
        Tensor t_prev1 = prop(x);  // T_1 X
        acc = add(acc, matmul(t_prev1, w[1]));
        for (size_t k = 2; k < w.size(); ++k) {
            Tensor t_k = sub(scale(prop(t_prev1), 2.0), t_prev2);
            acc = add(acc, matmul(t_k, w[k]));
            t_prev2 = t_prev1;
            t_prev1 = t_k;
        }
    }
    return activate(add(acc, b), act);
}

Tensor ChebConv::forward(const SparseMatrix& l_tilde, const Tensor& x) const {
    if (x.rank() != 2)
        throw UnsupportedMode(name_ + ": sparse forward expects single/disjoint mode");
    return cheb_run(w, b, act_, x, [&](const Tensor& t) { return spmm(l_tilde, t); });
}

Tensor ChebConv::forward_dense(const Tensor& l_tilde, const Tensor& x) const {
    if (x.rank() != 3)
        throw UnsupportedMode(name_ + ": dense forward expects batch mode");
    return cheb_run(w, b, act_, x, [&](const Tensor& t) { return matmul(l_tilde, t); });
}

std::vector<Param> ChebConv::params() const {
    std::vector<Param> p;
    for (size_t k = 0; k < w.size(); ++k)
        p.push_back({name_ + ".w" + std::to_string(k), w[k]});
    p.push_back({name_ + ".b", b});
    return p;
}

// ---- GraphSAGE ----

SageConv::SageConv(std::string name, int64_t f_in, int64_t f_out, Activation act, Rng& rng)
    : name_(std::move(name)), act_(act) {
    w = glorot_uniform({2 * f_in, f_out}, rng).set_requires_grad(true);
    b = Tensor({f_out}, 0.0).set_requires_grad(true);
}

Tensor SageConv::forward(const SparseMatrix& a, const Tensor& x) const {
    if (x.rank() != 2)
        throw UnsupportedMode(name_ + ": sparse forward expects single/disjoint mode");
    // D^{-1} A (zero rows stay zero)
    auto deg = a.row_sums();
    std::vector<double> vals = a.values();
    auto er = a.edge_rows();
    for (size_t k = 0; k < vals.size(); ++k)
        if (deg[(size_t)er[k]] > 0) vals[k] /= deg[(size_t)er[k]];
    SparseMatrix mean_op = a.with_values(std::move(vals));
    Tensor agg = spmm(mean_op, x);
    Tensor h = activate(add(matmul(concat(x, agg, 1), w), b), act_);
    return l2_normalize_rows(h);
}

std::vector<Param> SageConv::params() const {
    return {{name_ + ".w", w}, {name_ + ".b", b}};
}

// ---- ARMA ----

ArmaConv::ArmaConv(std::string name, int64_t f_in, int64_t f_out, int stacks, int depth,
                   Activation act, Rng& rng)
    : name_(std::move(name)), depth_(depth), act_(act) {
    if (stacks < 1 || depth < 1)
        throw std::runtime_error(name_ + ": stacks and depth must be >= 1");
    for (int k = 0; k < stacks; ++k) {
        w0.push_back(glorot_uniform({f_in, f_out}, rng).set_requires_grad(true));
        w.push_back(glorot_uniform({f_out, f_out}, rng).set_requires_grad(true));
        v.push_back(glorot_uniform({f_in, f_out}, rng).set_requires_grad(true));
    }
    b = Tensor({f_out}, 0.0).set_requires_grad(true);
}

template <class MatVec>
Tensor ArmaConv::run(const Tensor& x, MatVec&& prop) const {
    Tensor out;
    for (int k = 0; k < stacks(); ++k) {
        Tensor h = x;
        for (int t = 0; t < depth_; ++t) {
            const Tensor& wt = t == 0 ? w0[(size_t)k] : w[(size_t)k];
            h = activate(add(add(prop(matmul(h, wt)), matmul(x, v[(size_t)k])), b), act_);
        }
        out = out.defined() ? add(out, h) : h;
    }
    return stacks() > 1 ? scale(out, 1.0 / (double)stacks()) : out;
}

Tensor ArmaConv::forward(const SparseMatrix& l_hat, const Tensor& x) const {
    if (x.rank() != 2)
        throw UnsupportedMode(name_ + ": sparse forward expects single/disjoint mode");
    return run(x, [&](const Tensor& t) { return spmm(l_hat, t); });
}

Tensor ArmaConv::forward_dense(const Tensor& l_hat, const Tensor& x) const {
    if (x.rank() != 3)
        throw UnsupportedMode(name_ + ": dense forward expects batch mode");
    return run(x, [&](const Tensor& t) { return matmul(l_hat, t); });
}

std::vector<Param> ArmaConv::params() const {
    std::vector<Param> p;
    for (int k = 0; k < stacks(); ++k) {
        p.push_back({name_ + ".w0_" + std::to_string(k), w0[(size_t)k]});
        if (depth_ > 1) p.push_back({name_ + ".w_" + std::to_string(k), w[(size_t)k]});
        p.push_back({name_ + ".v_" + std::to_string(k), v[(size_t)k]});
    }
    p.push_back({name_ + ".b", b});
    return p;
}

// ---- GAT ----

GatConv::GatConv(std::string name, int64_t f_in, int64_t channels, int heads,
                 bool concat_heads, Activation act, Rng& rng)
    : name_(std::move(name)), heads_(heads), channels_(channels), concat_(concat_heads),
      act_(act) {
    w = glorot_uniform({f_in, heads * channels}, rng).set_requires_grad(true);
    a_src = glorot_uniform({(int64_t)heads, channels}, rng).set_requires_grad(true);
    a_dst = glorot_uniform({(int64_t)heads, channels}, rng).set_requires_grad(true);
    b = Tensor({concat_heads ? heads * channels : channels}, 0.0).set_requires_grad(true);
}

static SparseMatrix with_self_loops(const SparseMatrix& a) {
    std::vector<int64_t> r, c;
    std::vector<double> v;
    auto er = a.edge_rows();
    for (int64_t k = 0; k < a.nnz(); ++k) {
        if (er[(size_t)k] == a.col_idx()[(size_t)k]) continue;
        r.push_back(er[(size_t)k]);
        c.push_back(a.col_idx()[(size_t)k]);
        v.push_back(1.0);
    }
    for (int64_t i = 0; i < a.n_rows(); ++i) {
        r.push_back(i);
        c.push_back(i);
        v.push_back(1.0);
    }
    return SparseMatrix::from_coo(a.n_rows(), a.n_cols(), r, c, v);
}

Tensor GatConv::forward(const SparseMatrix& a, const Tensor& x, double attn_dropout,
                        bool training, Rng* rng) const {
    if (x.rank() != 2)
        throw UnsupportedMode(name_ + ": sparse forward expects single/disjoint mode");
    SparseMatrix pattern = with_self_loops(a);
    int64_t n = pattern.n_rows();
    auto rows = pattern.edge_rows();
    auto cols = pattern.edge_cols();

    Tensor wx = matmul(x, w);  // (N, H*C)
    Tensor out;
    for (int h = 0; h < heads_; ++h) {
        // head slice of WX: rows i*H + h of the (N*H, C) layout
        std::vector<int> sel((size_t)n);
        for (int64_t i = 0; i < n; ++i) sel[(size_t)i] = (int)(i * heads_ + h);
        Tensor wxh = gather(reshape(wx, {n * heads_, channels_}), sel);  // (N, C)

        std::vector<int> asel{h};
        Tensor s_src = matmul(wxh, transpose(gather(a_src, asel)));  // (N,1)
        Tensor s_dst = matmul(wxh, transpose(gather(a_dst, asel)));  // (N,1)

        Tensor e_score = leaky_relu(add(gather(s_src, rows), gather(s_dst, cols)), 0.2);
        // neighborhood softmax with max-subtraction (every node has a
        // self-loop, so no empty segments)
        Tensor mx = segment_max(e_score, rows, (int)n);
        Tensor shifted = sub(e_score, gather(mx, rows));
        Tensor ex = exp_op(shifted);
        Tensor denom = segment_sum(ex, rows, (int)n);
        Tensor alpha = mul(ex, reciprocal(gather(denom, rows)));  // (E,1)
        if (attn_dropout > 0 && training && rng)
            alpha = dropout(alpha, attn_dropout, true, *rng);
        Tensor head_out = spmm_weighted(pattern, reshape(alpha, {pattern.nnz()}), wxh);
        if (!out.defined())
            out = head_out;
        else if (concat_)
            out = concat(out, head_out, 1);
        else
            out = add(out, head_out);
    }
    if (!concat_ && heads_ > 1) out = scale(out, 1.0 / (double)heads_);
    return activate(add(out, b), act_);
}

Tensor GatConv::forward_dense(const Tensor& a, const Tensor& x) const {
    if (x.rank() != 3 || a.rank() != 3)
        throw UnsupportedMode(name_ + ": dense forward expects batch mode");
    int64_t B = x.extent(0), n = x.extent(1);
    // edge mask of A + I
    std::vector<uint8_t> keep((size_t)(B * n * n), 0);
    for (int64_t s = 0; s < B; ++s)
        for (int64_t i = 0; i < n; ++i)
            for (int64_t j = 0; j < n; ++j)
                keep[(size_t)((s * n + i) * n + j)] =
                    (i == j || a.data()[(s * n + i) * n + j] != 0.0) ? 1 : 0;

    Tensor wx = matmul(x, w);  // (B, N, H*C)
    Tensor ones_row({1, n}, 1.0);
    Tensor out;
    for (int h = 0; h < heads_; ++h) {
        std::vector<int> sel((size_t)(B * n));
        for (int64_t i = 0; i < B * n; ++i) sel[(size_t)i] = (int)(i * heads_ + h);
        Tensor wxh = reshape(gather(reshape(wx, {B * n * heads_, channels_}), sel),
                             {B, n, channels_});
        std::vector<int> asel{h};
        Tensor s_src = matmul(wxh, transpose(gather(a_src, asel)));  // (B,N,1)
        Tensor s_dst = matmul(wxh, transpose(gather(a_dst, asel)));
        Tensor scores = leaky_relu(
            add(matmul(s_src, ones_row), transpose(matmul(s_dst, ones_row))), 0.2);
        scores = masked_fill(scores, keep, -1e30);
        Tensor alpha = softmax(scores);  // (B,N,N)
        Tensor head_out = matmul(alpha, wxh);
        if (!out.defined())
            out = head_out;
        else if (concat_)
            out = concat(out, head_out, 2);
        else
            out = add(out, head_out);
    }
    if (!concat_ && heads_ > 1) out = scale(out, 1.0 / (double)heads_);
    return activate(add(out, b), act_);
}

std::vector<Param> GatConv::params() const {
    return {{name_ + ".w", w},
            {name_ + ".a_src", a_src},
            {name_ + ".a_dst", a_dst},
            {name_ + ".b", b}};
}

// ---- GIN ----

GinConv::GinConv(std::string name, int64_t f_in, int64_t hidden, int64_t f_out,
                 Activation act, Rng& rng)
    : mlp(name + ".mlp", f_in, hidden, f_out, Activation::Linear, rng),
      name_(std::move(name)), act_(act) {
    eps = Tensor({1}, 0.0).set_requires_grad(true);
}

Tensor GinConv::forward(const SparseMatrix& a, const Tensor& x) const {
    if (x.rank() != 2)
        throw UnsupportedMode(name_ + ": sparse forward expects single/disjoint mode");
    Tensor h = add(spmm(a, x), mul(x, add_scalar(eps, 1.0)));
    return activate(mlp.forward(h), act_);
}

Tensor GinConv::forward_dense(const Tensor& a, const Tensor& x) const {
    if (x.rank() != 3)
        throw UnsupportedMode(name_ + ": dense forward expects batch mode");
    Tensor h = add(matmul(a, x), mul(x, add_scalar(eps, 1.0)));
    return activate(mlp.forward(h), act_);
}

std::vector<Param> GinConv::params() const {
    auto p = mlp.params();
    p.push_back({name_ + ".eps", eps});
    return p;
}

// ---- APPNP ----

AppnpConv::AppnpConv(std::string name, int64_t f_in, int64_t hidden, int64_t f_out,
                     double alpha_, int iterations_, Activation act, Rng& rng)
    : mlp(name + ".mlp", f_in, hidden, f_out, Activation::Linear, rng), alpha(alpha_),
      iterations(iterations_), name_(std::move(name)), act_(act) {}

Tensor AppnpConv::forward(const SparseMatrix& a_hat, const Tensor& x, double mlp_dropout,
                          double edge_dropout, bool training, Rng* rng) const {
    if (x.rank() != 2)
        throw UnsupportedMode(name_ + ": sparse forward expects single/disjoint mode");
    Tensor h = x;
    if (mlp_dropout > 0 && training && rng) h = dropout(h, mlp_dropout, true, *rng);
    h = mlp.forward(h);
    Tensor z = h;
    for (int k = 0; k < iterations; ++k) {
        SparseMatrix prop = a_hat;
        if (edge_dropout > 0 && training && rng) {
            std::uniform_real_distribution<double> dist(0.0, 1.0);
            std::vector<double> vals = a_hat.values();
            for (auto& vv : vals)
                vv = dist(*rng) >= edge_dropout ? vv / (1.0 - edge_dropout) : 0.0;
            prop = a_hat.with_values(std::move(vals));
        }
        z = add(scale(spmm(prop, z), 1.0 - alpha), scale(h, alpha));
    }
    return activate(z, act_);
}

std::vector<Param> AppnpConv::params() const { return mlp.params(); }

// ---- ECC ----

EccConv::EccConv(std::string name, int64_t f_in, int64_t f_out, int64_t edge_dim,
                 int64_t filter_hidden, Activation act, Rng& rng)
    : filter_mlp(name + ".filter", edge_dim, filter_hidden, f_in * f_out,
                 Activation::Linear, rng),
      name_(std::move(name)), f_in_(f_in), f_out_(f_out), act_(act) {
    w_root = glorot_uniform({f_in, f_out}, rng).set_requires_grad(true);
    b = Tensor({f_out}, 0.0).set_requires_grad(true);
}

Tensor EccConv::forward(const SparseMatrix& a, const Tensor& x, const Tensor& e) const {
    if (x.rank() != 2)
        throw UnsupportedMode(name_ + ": sparse forward expects single/disjoint mode");
    if (e.extent(0) != a.nnz())
        throw ShapeError(name_ + ": edge attribute rows " + std::to_string(e.extent(0)) +
                         " != nnz " + std::to_string(a.nnz()));
    int64_t n = a.n_rows(), nnz = a.nnz();
    Tensor root = matmul(x, w_root);
    if (nnz == 0) return activate(add(root, b), act_);

    auto rows = a.edge_rows();
    auto cols = a.edge_cols();
    Tensor theta = filter_mlp.forward(e);                      // (E, F_in*F_out)
    Tensor xj = gather(x, cols);                               // (E, F_in)
    Tensor msg = reshape(matmul(reshape(xj, {nnz, 1, f_in_}),
                                reshape(theta, {nnz, f_in_, f_out_})),
                         {nnz, f_out_});
    // mean over incoming edges; isolated nodes keep only the root term
    Tensor agg = segment_mean(msg, rows, (int)n);
    return activate(add(add(root, agg), b), act_);
}

std::vector<Param> EccConv::params() const {
    auto p = filter_mlp.params();
    p.push_back({name_ + ".w_root", w_root});
    p.push_back({name_ + ".b", b});
    return p;
}

// ---- regularization ----

Tensor l2_penalty(const std::vector<Param>& params, double strength) {
    Tensor total;
    for (const auto& p : params) {
        if (p.tensor.rank() < 2) continue;  // weights only, not biases
        Tensor s = reduce_sum(square(p.tensor));
        total = total.defined() ? add(total, s) : s;
    }
    if (!total.defined()) return Tensor({1}, 0.0);
    return scale(total, strength);
}

// ---- dense characteristic matrices ----

Tensor gcn_filter_dense(const Tensor& a, const std::vector<uint8_t>& mask) {
    int64_t B = a.extent(0), n = a.extent(1);
    Tensor out(a.shape());
    for (int64_t s = 0; s < B; ++s) {
        std::vector<double> deg((size_t)n, 0.0);
        for (int64_t i = 0; i < n; ++i) {
            if (!mask[(size_t)(s * n + i)]) continue;
            deg[(size_t)i] = 1.0;  // self loop
            for (int64_t j = 0; j < n; ++j) deg[(size_t)i] += a.data()[(s * n + i) * n + j];
        }
        for (int64_t i = 0; i < n; ++i) {
            if (!mask[(size_t)(s * n + i)]) continue;
            double di = 1.0 / std::sqrt(deg[(size_t)i]);
            for (int64_t j = 0; j < n; ++j) {
                double v = a.data()[(s * n + i) * n + j] + (i == j ? 1.0 : 0.0);
                if (v == 0.0 || !mask[(size_t)(s * n + j)]) continue;
                out.data()[(s * n + i) * n + j] = di * v / std::sqrt(deg[(size_t)j]);
            }
        }
    }
    return out;
}

Tensor sym_normalized_adjacency_dense(const Tensor& a) {
    int64_t B = a.extent(0), n = a.extent(1);
    Tensor out(a.shape());
    for (int64_t s = 0; s < B; ++s) {
        std::vector<double> deg((size_t)n, 0.0);
        for (int64_t i = 0; i < n; ++i)
            for (int64_t j = 0; j < n; ++j) deg[(size_t)i] += a.data()[(s * n + i) * n + j];
        for (int64_t i = 0; i < n; ++i) {
            if (deg[(size_t)i] == 0) continue;
            double di = 1.0 / std::sqrt(deg[(size_t)i]);
            for (int64_t j = 0; j < n; ++j) {
                double v = a.data()[(s * n + i) * n + j];
                if (v == 0.0 || deg[(size_t)j] == 0) continue;
                out.data()[(s * n + i) * n + j] = di * v / std::sqrt(deg[(size_t)j]);
            }
        }
    }
    return out;
}

Tensor rescaled_laplacian_dense(const Tensor& a, const std::vector<uint8_t>& mask,
                                double lambda_max) {
    int64_t B = a.extent(0), n = a.extent(1);
    Tensor na = sym_normalized_adjacency_dense(a);
    Tensor out(a.shape());
    double s2 = 2.0 / lambda_max;
    for (int64_t s = 0; s < B; ++s)
        for (int64_t i = 0; i < n; ++i) {
            if (!mask[(size_t)(s * n + i)]) continue;
            for (int64_t j = 0; j < n; ++j) {
                double l = (i == j ? 1.0 : 0.0) - na.data()[(s * n + i) * n + j];
                double lt = s2 * l - (i == j ? 1.0 : 0.0);
                if (mask[(size_t)(s * n + j)]) out.data()[(s * n + i) * n + j] = lt;
            }
        }
    return out;
}

}  // namespace gnn
