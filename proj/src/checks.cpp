#include "gnn/checks.hpp"

#include <stdexcept>

#include "gnn/data.hpp"
#include "gnn/layers.hpp"
#include "gnn/pooling.hpp"

namespace gnn {

namespace {

// Random symmetric binary adjacency over n nodes, every node with at
// least one neighbor.
SparseMatrix random_adjacency(int64_t n, Rng& rng) {
    std::vector<int64_t> ri, ci;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = i + 1; j < n; ++j)
            if (u(rng) < 0.45 || j == (i + 1) % n) {
                ri.push_back(i);
                ci.push_back(j);
                ri.push_back(j);
                ci.push_back(i);
            }
    std::vector<double> vals(ri.size(), 1.0);
    return SparseMatrix::from_coo(n, n, ri, ci, vals);
}

Graph random_graph(int64_t n, int64_t f, Rng& rng, int64_t edge_dim = 0) {
    Graph g;
    g.a = random_adjacency(n, rng);
    g.x = normal({n, f}, 0.0, 1.0, rng);
    if (edge_dim > 0) g.e = normal({g.a.nnz(), edge_dim}, 0.0, 1.0, rng);
    return g;
}

Tensor sq_sum(const Tensor& t) { return reduce_sum(square(t)); }

}  // namespace

const std::vector<std::string>& gradcheck_layer_names() {
    static const std::vector<std::string> names = {
        "dense", "gcn",  "cheb",  "sage",     "arma",   "gcs",        "gat",
        "gin",   "appnp", "ecc",  "topk",     "sagpool", "diffpool",  "mincut",
        "global_sum", "global_avg", "gap", "awsp"};
    return names;
}

GradCheckResult layer_gradient_check(const std::string& layer, uint64_t seed) {
    Rng rng(seed);
    int64_t n = 5 + (int64_t)(rng() % 6);  // 5-10 nodes
    const int64_t f = 4, c = 3;
    Graph g = random_graph(n, f, rng, layer == "ecc" ? 3 : 0);
    // mark the inputs differentiable too: layers must propagate to X
    Tensor x = g.x;
    x.set_requires_grad(true);

    auto check = [&](const std::function<Tensor()>& fwd, std::vector<Param> ps) {
        ps.push_back({"x", x});
        return gradient_check([&] { return sq_sum(fwd()); }, ps);
    };

    if (layer == "dense") {
        DenseLayer d("dense", f, c, Activation::Tanh, rng);
        return check([&] { return d.forward(x); }, d.params());
    }
    if (layer == "gcn") {
        GcnConv conv("gcn", f, c, Activation::Tanh, rng);
        SparseMatrix ah = gcn_filter(g.a);
        return check([&] { return conv.forward(ah, x); }, conv.params());
    }
    if (layer == "cheb") {
        ChebConv conv("cheb", f, c, 3, Activation::Tanh, rng);
        SparseMatrix lt = rescaled_laplacian(g.a);
        return check([&] { return conv.forward(lt, x); }, conv.params());
    }
    if (layer == "sage") {
        SageConv conv("sage", f, c, Activation::Tanh, rng);
        // the output rows are unit-norm, so a plain square-sum loss is
        // constant; weight the entries to get a non-degenerate objective
        Tensor wts = normal({n, c}, 0.0, 1.0, rng);
        auto ps = conv.params();
        ps.push_back({"x", x});
        return gradient_check(
            [&] { return reduce_sum(mul(conv.forward(g.a, x), wts)); }, ps);
    }
    if (layer == "arma" || layer == "gcs") {
        int stacks = layer == "arma" ? 2 : 1;
        int depth = layer == "arma" ? 2 : 1;
        ArmaConv conv("arma", f, c, stacks, depth, Activation::Tanh, rng);
        SparseMatrix lh = sym_normalized_adjacency(g.a);
        return check([&] { return conv.forward(lh, x); }, conv.params());
    }
    if (layer == "gat") {
        GatConv conv("gat", f, c, 2, true, Activation::Tanh, rng);
        return check([&] { return conv.forward(g.a, x); }, conv.params());
    }
    if (layer == "gin") {
        GinConv conv("gin", f, 6, c, Activation::Tanh, rng);
        return check([&] { return conv.forward(g.a, x); }, conv.params());
    }
    if (layer == "appnp") {
        AppnpConv conv("appnp", f, 6, c, 0.1, 3, Activation::Tanh, rng);
        SparseMatrix ah = gcn_filter(g.a);
        return check([&] { return conv.forward(ah, x); }, conv.params());
    }
    if (layer == "ecc") {
        EccConv conv("ecc", f, c, 3, 8, Activation::Tanh, rng);
        Tensor e = *g.e;
        e.set_requires_grad(true);
        auto ps = conv.params();
        ps.push_back({"x", x});
        ps.push_back({"e", e});
        return gradient_check([&] { return sq_sum(conv.forward(g.a, x, e)); }, ps);
    }

    // pooling layers run over a two-graph batch
    Graph g2 = random_graph(4 + (int64_t)(rng() % 4), f, rng);
    DisjointBatch batch = to_disjoint({g, g2});
    Tensor bx = batch.x;
    bx.set_requires_grad(true);

    if (layer == "topk" || layer == "sagpool") {
        std::unique_ptr<TopKPool> tk;
        std::unique_ptr<SagPool> sp;
        std::vector<Param> ps;
        if (layer == "topk") {
            tk = std::make_unique<TopKPool>("topk", f, 0.5, rng);
            ps = tk->params();
        } else {
            sp = std::make_unique<SagPool>("sagpool", f, 0.5, rng);
            ps = sp->params();
        }
        ps.push_back({"x", bx});
        return gradient_check(
            [&] {
                PoolResult r = tk ? tk->forward(batch.a, bx, batch.segment_ids, 2)
                                  : sp->forward(batch.a, bx, batch.segment_ids, 2);
                return sq_sum(r.x);
            },
            ps);
    }
    if (layer == "diffpool" || layer == "mincut") {
        DenseBatch db = to_dense({g, g2});
        Tensor dx = db.x;
        dx.set_requires_grad(true);
        std::unique_ptr<DiffPool> dp;
        std::unique_ptr<MinCutPool> mc;
        std::vector<Param> ps;
        if (layer == "diffpool") {
            dp = std::make_unique<DiffPool>("diffpool", f, c, 3, rng);
            ps = dp->params();
        } else {
            mc = std::make_unique<MinCutPool>("mincut", f, 8, 3, rng);
            ps = mc->params();
        }
        ps.push_back({"x", dx});
        return gradient_check(
            [&] {
                PoolResult r = dp ? dp->forward(db.a, dx, db.mask)
                                  : mc->forward(db.a, dx, db.mask);
                Tensor loss = sq_sum(r.x);
                for (auto& [k, v] : r.auxiliary_losses) loss = add(loss, v);
                return loss;
            },
            ps);
    }
    if (layer == "global_sum" || layer == "global_avg") {
        GlobalPoolKind kind =
            layer == "global_sum" ? GlobalPoolKind::Sum : GlobalPoolKind::Average;
        std::vector<Param> ps{{"x", bx}};
        return gradient_check(
            [&] { return sq_sum(global_pool(bx, batch.segment_ids, 2, kind)); }, ps);
    }
    if (layer == "gap") {
        GapGlobalPool gp("gap", f, 6, rng);
        auto ps = gp.params();
        ps.push_back({"x", bx});
        return gradient_check(
            [&] { return sq_sum(gp.forward(bx, batch.segment_ids, 2)); }, ps);
    }
    if (layer == "awsp") {
        AwspGlobalPool ap("awsp", f, rng);
        auto ps = ap.params();
        ps.push_back({"x", bx});
        return gradient_check(
            [&] { return sq_sum(ap.forward(bx, batch.segment_ids, 2)); }, ps);
    }
    throw std::invalid_argument("unknown layer '" + layer + "'");
}

}  // namespace gnn
