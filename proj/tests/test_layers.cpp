#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "gnn/checks.hpp"
#include "gnn/data.hpp"
#include "gnn/layers.hpp"

using namespace gnn;

namespace {

SparseMatrix coo(int64_t n, std::vector<int64_t> r, std::vector<int64_t> c) {
    return SparseMatrix::from_coo(n, n, r, c, std::vector<double>(r.size(), 1.0));
}

SparseMatrix random_adj(int64_t n, uint64_t seed, double density = 0.4) {
    Rng rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<int64_t> ri, ci;
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = i + 1; j < n; ++j)
            if (u(rng) < density || j == i + 1) {
                ri.push_back(i);
                ci.push_back(j);
                ri.push_back(j);
                ci.push_back(i);
            }
    return coo(n, ri, ci);
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    REQUIRE(a.size() == b.size());
    double m = 0;
    for (int64_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

// Applies a node permutation to a sparse adjacency.
SparseMatrix permute_adj(const SparseMatrix& a, const std::vector<int64_t>& perm) {
    std::vector<int64_t> ri, ci;
    std::vector<double> v;
    for (int64_t i = 0; i < a.n_rows(); ++i)
        for (int64_t k = a.row_ptr()[i]; k < a.row_ptr()[i + 1]; ++k) {
            ri.push_back(perm[(size_t)i]);
            ci.push_back(perm[(size_t)a.col_idx()[k]]);
            v.push_back(a.values()[(size_t)k]);
        }
    return SparseMatrix::from_coo(a.n_rows(), a.n_cols(), ri, ci, v);
}

Tensor permute_rows(const Tensor& x, const std::vector<int64_t>& perm) {
    Tensor out(x.shape());
    int64_t f = x.extent(1);
    for (int64_t i = 0; i < x.extent(0); ++i)
        std::copy(x.data() + i * f, x.data() + (i + 1) * f,
                  out.data() + perm[(size_t)i] * f);
    return out;
}

// Permutes per-edge attributes from the CSR order of `a` to the CSR
// order of the permuted adjacency.
Tensor permute_edge_attrs(const SparseMatrix& a, const SparseMatrix& pa, const Tensor& e,
                          const std::vector<int64_t>& perm) {
    Tensor out({pa.nnz(), e.extent(1)});
    auto rows = a.edge_rows();
    const auto& cols = a.col_idx();
    auto prow_ptr = pa.row_ptr();
    for (int64_t k = 0; k < a.nnz(); ++k) {
        int64_t pr = perm[(size_t)rows[(size_t)k]];
        int64_t pc = perm[(size_t)cols[(size_t)k]];
        // locate (pr, pc) in pa
        int64_t pos = -1;
        for (int64_t q = prow_ptr[pr]; q < prow_ptr[pr + 1]; ++q)
            if (pa.col_idx()[(size_t)q] == pc) pos = q;
        REQUIRE(pos >= 0);
        std::copy(e.data() + k * e.extent(1), e.data() + (k + 1) * e.extent(1),
                  out.data() + pos * e.extent(1));
    }
    return out;
}

}  // namespace

TEST_CASE("gcn examples") {
    Rng rng(1);
    SUBCASE("identity on one node") {
        GcnConv conv("g", 2, 2, Activation::Linear, rng);
        conv.w.values() = {1, 0, 0, 1};
        conv.b.values() = {0, 0};
        SparseMatrix ah = SparseMatrix::identity(1);
        Tensor out = conv.forward(ah, Tensor({1, 2}, {1, 0}));
        CHECK(out.values() == std::vector<double>{1, 0});
    }
    SUBCASE("two-node averaging") {
        GcnConv conv("g", 2, 2, Activation::Linear, rng);
        conv.w.values() = {1, 0, 0, 1};
        conv.b.values() = {0, 0};
        SparseMatrix ah = gcn_filter(coo(2, {0, 1}, {1, 0}));
        Tensor out = conv.forward(ah, Tensor({2, 2}, {2, 0, 0, 2}));
        for (double v : out.values()) CHECK(v == doctest::Approx(1.0));
    }
}

TEST_CASE("cheb") {
    Rng rng(2);
    SUBCASE("K=1 is a dense linear map") {
        ChebConv conv("c", 3, 2, 1, Activation::Linear, rng);
        Tensor x({2, 3}, {1, 2, 3, 4, 5, 6});
        SparseMatrix lt = rescaled_laplacian(coo(2, {0, 1}, {1, 0}));
        Tensor out = conv.forward(lt, x);
        Tensor ref = add(matmul(x, conv.w[0]), conv.b);
        CHECK(max_abs_diff(out, ref) <= 1e-15);
    }
    SUBCASE("zero support kills the T1 term") {
        ChebConv conv("c", 3, 2, 2, Activation::Linear, rng);
        SparseMatrix zero = SparseMatrix::from_coo(2, 2, {}, {}, {});
        Tensor x({2, 3}, {1, 2, 3, 4, 5, 6});
        Tensor out = conv.forward(zero, x);
        Tensor ref = add(matmul(x, conv.w[0]), conv.b);
        CHECK(max_abs_diff(out, ref) <= 1e-15);
    }
    SUBCASE("K=3 matches the explicit dense polynomial") {
        int64_t n = 5;
        SparseMatrix a = random_adj(n, 7);
        SparseMatrix lt = rescaled_laplacian(a);
        ChebConv conv("c", 3, 4, 3, Activation::Linear, rng);
        Rng xr(8);
        Tensor x = normal({n, 3}, 0.0, 1.0, xr);
        Tensor out = conv.forward(lt, x);
        // dense oracle: T0 = I, T1 = Lt, T2 = 2 Lt Lt - I as matrices
        Tensor ld = lt.to_dense();
        Tensor t0({n, n});
        for (int64_t i = 0; i < n; ++i) t0.at({i, i}) = 1.0;
        Tensor t1 = ld;
        Tensor t2 = sub(scale(matmul(ld, ld), 2.0), t0);
        Tensor ref = add(add(matmul(matmul(t0, x), conv.w[0]),
                             matmul(matmul(t1, x), conv.w[1])),
                         add(matmul(matmul(t2, x), conv.w[2]), conv.b));
        CHECK(max_abs_diff(out, ref) <= 1e-10);
    }
}

TEST_CASE("sage") {
    Rng rng(3);
    SageConv conv("s", 1, 2, Activation::Linear, rng);
    SUBCASE("neighbor mean and L2 rows") {
        // node 0 has neighbors 1,2 with features 2 and 4 -> aggregate 3
        SparseMatrix a = coo(3, {0, 0, 1, 2}, {1, 2, 0, 0});
        Tensor x({3, 1}, {1, 2, 4});
        conv.w.values() = {1, 0, 0, 1};  // concat(x, agg) passes through
        conv.b.values() = {0, 0};
        Tensor out = conv.forward(a, x);
        // pre-normalization row 0 = (1, 3); normalized
        double nrm = std::sqrt(1.0 + 9.0);
        CHECK(out.at({0, 0}) == doctest::Approx(1.0 / nrm));
        CHECK(out.at({0, 1}) == doctest::Approx(3.0 / nrm));
        for (int64_t i = 0; i < 3; ++i) {
            double s = 0;
            for (int64_t j = 0; j < 2; ++j) s += out.at({i, j}) * out.at({i, j});
            CHECK(std::sqrt(s) == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
    SUBCASE("isolated node aggregates zero") {
        SparseMatrix a = SparseMatrix::from_coo(2, 2, {}, {}, {});
        conv.w.values() = {1, 0, 0, 1};
        conv.b.values() = {0, 0};
        Tensor out = conv.forward(a, Tensor({2, 1}, {5, -2}));
        CHECK(out.at({0, 1}) == 0.0);  // aggregate half is zero
        CHECK(std::abs(out.at({0, 0})) == doctest::Approx(1.0));
    }
}

TEST_CASE("arma") {
    SUBCASE("zero support reduces to the skip term") {
        Rng rng(4);
        ArmaConv conv("a", 3, 2, 1, 1, Activation::Linear, rng);
        SparseMatrix zero = SparseMatrix::from_coo(2, 2, {}, {}, {});
        Tensor x({2, 3}, {1, -1, 2, 0, 3, 1});
        Tensor out = conv.forward(zero, x);
        Tensor ref = add(matmul(x, conv.v[0]), conv.b);
        CHECK(max_abs_diff(out, ref) <= 1e-15);
    }
    SUBCASE("K equal stacks equal K=1") {
        Rng rng(5);
        ArmaConv c2("a2", 3, 2, 2, 2, Activation::Relu, rng);
        // force both stacks to identical weights
        c2.w0[1].values() = c2.w0[0].values();
        c2.w[1].values() = c2.w[0].values();
        c2.v[1].values() = c2.v[0].values();
        Rng rng2(6);
        ArmaConv c1("a1", 3, 2, 1, 2, Activation::Relu, rng2);
        c1.w0[0].values() = c2.w0[0].values();
        c1.w[0].values() = c2.w[0].values();
        c1.v[0].values() = c2.v[0].values();
        c1.b.values() = c2.b.values();
        SparseMatrix a = random_adj(6, 9);
        SparseMatrix lh = sym_normalized_adjacency(a);
        Rng xr(10);
        Tensor x = normal({6, 3}, 0.0, 1.0, xr);
        CHECK(max_abs_diff(c2.forward(lh, x), c1.forward(lh, x)) <= 1e-14);
    }
    SUBCASE("K=1 T=2 matches manual unroll on a path") {
        Rng rng(7);
        ArmaConv conv("a", 2, 2, 1, 2, Activation::Relu, rng);
        SparseMatrix a = coo(4, {0, 1, 1, 2, 2, 3}, {1, 0, 2, 1, 3, 2});
        SparseMatrix lh = sym_normalized_adjacency(a);
        Rng xr(11);
        Tensor x = normal({4, 2}, 0.0, 1.0, xr);
        Tensor out = conv.forward(lh, x);
        // X1 = relu(Lh X W0 + X V); X2 = relu(Lh X1 W + X V) -> output
        Tensor skip = matmul(x, conv.v[0]);
        Tensor x1 = relu(add(matmul(spmm(lh, x), conv.w0[0]), skip));
        Tensor x2 = relu(add(add(matmul(spmm(lh, x1), conv.w[0]), skip), conv.b));
        CHECK(max_abs_diff(out, x2) <= 1e-10);
    }
}

TEST_CASE("gat") {
    SUBCASE("single node output is its own transform") {
        Rng rng(12);
        GatConv conv("g", 3, 2, 2, true, Activation::Linear, rng);
        Tensor x({1, 3}, {0.5, -1.0, 2.0});
        SparseMatrix a = SparseMatrix::from_coo(1, 1, {}, {}, {});
        Tensor out = conv.forward(a, x);
        Tensor ref = add(matmul(x, conv.w), conv.b);  // alpha_ii = 1 per head
        CHECK(max_abs_diff(out, ref) <= 1e-12);
    }
    SUBCASE("identical features give identical outputs (attention normalized)") {
        Rng rng(13);
        GatConv conv("g", 3, 4, 2, true, Activation::Linear, rng);
        SparseMatrix a = random_adj(5, 14);
        Tensor x({5, 3});
        for (int64_t i = 0; i < 5; ++i)
            for (int64_t j = 0; j < 3; ++j) x.at({i, j}) = (double)j - 1.0;
        Tensor out = conv.forward(a, x);
        for (int64_t i = 1; i < 5; ++i)
            for (int64_t j = 0; j < out.extent(1); ++j)
                CHECK(out.at({i, j}) == doctest::Approx(out.at({0, j})).epsilon(1e-12));
    }
}

TEST_CASE("gin") {
    Rng rng(15);
    SUBCASE("sum aggregation with pass-through mlp") {
        GinConv conv("g", 1, 1, 1, Activation::Linear, rng);
        auto ps = conv.mlp.params();
        for (auto& p : ps) {
            // two 1x1 layers; set weights 1 and biases 0 -> identity on positives
            if (p.tensor.size() == 1 && p.name.find(".w") != std::string::npos)
                p.tensor.values() = {1.0};
            else
                p.tensor.values().assign((size_t)p.tensor.size(), 0.0);
        }
        SparseMatrix a = coo(2, {0, 1}, {1, 0});
        Tensor out = conv.forward(a, Tensor({2, 1}, {1, 2}));
        CHECK(out.values() == std::vector<double>{3, 3});
    }
    SUBCASE("edgeless graph keeps features (eps=0, identity mlp)") {
        GinConv conv("g", 1, 1, 1, Activation::Linear, rng);
        for (auto& p : conv.mlp.params()) {
            if (p.name.find(".w") != std::string::npos)
                p.tensor.values() = {1.0};
            else
                p.tensor.values().assign((size_t)p.tensor.size(), 0.0);
        }
        SparseMatrix a = SparseMatrix::from_coo(2, 2, {}, {}, {});
        Tensor out = conv.forward(a, Tensor({2, 1}, {1, 2}));
        CHECK(out.values() == std::vector<double>{1, 2});
    }
}

TEST_CASE("appnp") {
    Rng rng(16);
    SUBCASE("alpha=1 ignores the graph") {
        AppnpConv conv("p", 3, 4, 2, 1.0, 5, Activation::Linear, rng);
        SparseMatrix ah = gcn_filter(random_adj(5, 17));
        Rng xr(18);
        Tensor x = normal({5, 3}, 0.0, 1.0, xr);
        Tensor h = conv.mlp.forward(x);
        CHECK(max_abs_diff(conv.forward(ah, x), h) <= 1e-12);
    }
    SUBCASE("zero iterations returns the mlp output") {
        AppnpConv conv("p", 3, 4, 2, 0.1, 0, Activation::Linear, rng);
        SparseMatrix ah = gcn_filter(random_adj(5, 19));
        Rng xr(20);
        Tensor x = normal({5, 3}, 0.0, 1.0, xr);
        CHECK(max_abs_diff(conv.forward(ah, x), conv.mlp.forward(x)) <= 1e-12);
    }
    SUBCASE("matches the manual unroll") {
        AppnpConv conv("p", 2, 4, 3, 0.1, 10, Activation::Linear, rng);
        SparseMatrix a = coo(4, {0, 1, 1, 2, 2, 3, 3, 0}, {1, 0, 2, 1, 3, 2, 0, 3});
        SparseMatrix ah = gcn_filter(a);
        Rng xr(21);
        Tensor x = normal({4, 2}, 0.0, 1.0, xr);
        Tensor h = conv.mlp.forward(x);
        Tensor z = h;
        for (int k = 0; k < 10; ++k) z = add(scale(spmm(ah, z), 0.9), scale(h, 0.1));
        CHECK(max_abs_diff(conv.forward(ah, x), z) <= 1e-10);
    }
}

TEST_CASE("ecc") {
    Rng rng(22);
    SUBCASE("edgeless graph uses only the root term") {
        EccConv conv("e", 3, 2, 4, 8, Activation::Tanh, rng);
        SparseMatrix a = SparseMatrix::from_coo(2, 2, {}, {}, {});
        Rng xr(23);
        Tensor x = normal({2, 3}, 0.0, 1.0, xr);
        Tensor e({0, 4});
        Tensor out = conv.forward(a, x, e);
        Tensor ref = tanh_op(add(matmul(x, conv.w_root), conv.b));
        CHECK(max_abs_diff(out, ref) <= 1e-12);
    }
}

TEST_CASE("l2 penalty is exact") {
    Tensor w({2, 2}, {1, 2, 3, 4});
    Tensor b({2}, {9, 9});  // rank-1: excluded from the penalty
    Tensor p = l2_penalty({{"w", w}, {"b", b}}, 0.5);
    CHECK(p.item() == doctest::Approx(0.5 * 30.0).epsilon(1e-15));
}

TEST_CASE("permutation equivariance of all message-passing layers") {
    Rng seed_rng(31);
    for (int inst = 0; inst < 10; ++inst) {
        int64_t n = 6;
        SparseMatrix a = random_adj(n, 100 + (uint64_t)inst);
        Rng xr(200 + (uint64_t)inst);
        Tensor x = normal({n, 3}, 0.0, 1.0, xr);
        std::vector<int64_t> perm(n);
        for (int64_t i = 0; i < n; ++i) perm[(size_t)i] = i;
        std::shuffle(perm.begin(), perm.end(), seed_rng);
        SparseMatrix pa = permute_adj(a, perm);
        Tensor px = permute_rows(x, perm);

        auto check_equiv = [&](const std::function<Tensor(const SparseMatrix&, const Tensor&)>& f) {
            Tensor out = f(a, x);
            Tensor pout = f(pa, px);
            CHECK(max_abs_diff(permute_rows(out, perm), pout) <= 1e-9);
        };

        Rng lr(300 + (uint64_t)inst);
        GcnConv gcn("gcn", 3, 4, Activation::Tanh, lr);
        check_equiv([&](const SparseMatrix& aa, const Tensor& xx) {
            return gcn.forward(gcn_filter(aa), xx);
        });
        ChebConv cheb("cheb", 3, 4, 3, Activation::Tanh, lr);
        check_equiv([&](const SparseMatrix& aa, const Tensor& xx) {
            return cheb.forward(rescaled_laplacian(aa), xx);
        });
        SageConv sage("sage", 3, 4, Activation::Tanh, lr);
        check_equiv([&](const SparseMatrix& aa, const Tensor& xx) {
            return sage.forward(aa, xx);
        });
        ArmaConv arma("arma", 3, 4, 2, 2, Activation::Tanh, lr);
        check_equiv([&](const SparseMatrix& aa, const Tensor& xx) {
            return arma.forward(sym_normalized_adjacency(aa), xx);
        });
        GatConv gat("gat", 3, 4, 2, true, Activation::Tanh, lr);
        check_equiv([&](const SparseMatrix& aa, const Tensor& xx) {
            return gat.forward(aa, xx);
        });
        GinConv gin("gin", 3, 5, 4, Activation::Tanh, lr);
        check_equiv([&](const SparseMatrix& aa, const Tensor& xx) {
            return gin.forward(aa, xx);
        });
        AppnpConv appnp("appnp", 3, 5, 4, 0.1, 4, Activation::Tanh, lr);
        check_equiv([&](const SparseMatrix& aa, const Tensor& xx) {
            return appnp.forward(gcn_filter(aa), xx);
        });
        EccConv ecc("ecc", 3, 4, 2, 8, Activation::Tanh, lr);
        Rng er(400 + (uint64_t)inst);
        Tensor e = normal({a.nnz(), 2}, 0.0, 1.0, er);
        SparseMatrix pa2 = permute_adj(a, perm);
        Tensor pe = permute_edge_attrs(a, pa2, e, perm);
        Tensor out = ecc.forward(a, x, e);
        Tensor pout = ecc.forward(pa2, px, pe);
        CHECK(max_abs_diff(permute_rows(out, perm), pout) <= 1e-9);
    }
}

TEST_CASE("disjoint batch equals concatenated per-graph runs") {
    Rng lr(41);
    GcnConv gcn("gcn", 3, 4, Activation::Tanh, lr);
    GatConv gat("gat", 3, 4, 2, true, Activation::Tanh, lr);
    GinConv gin("gin", 3, 5, 4, Activation::Tanh, lr);
    for (int inst = 0; inst < 5; ++inst) {
        Graph g1, g2;
        g1.a = random_adj(4, 500 + (uint64_t)inst);
        g2.a = random_adj(6, 600 + (uint64_t)inst);
        Rng xr(700 + (uint64_t)inst);
        g1.x = normal({4, 3}, 0.0, 1.0, xr);
        g2.x = normal({6, 3}, 0.0, 1.0, xr);
        DisjointBatch b = to_disjoint({g1, g2});

        Tensor whole = gcn.forward(gcn_filter(b.a), b.x);
        Tensor parts = concat(gcn.forward(gcn_filter(g1.a), g1.x),
                              gcn.forward(gcn_filter(g2.a), g2.x), 0);
        CHECK(max_abs_diff(whole, parts) <= 1e-9);

        whole = gat.forward(b.a, b.x);
        parts = concat(gat.forward(g1.a, g1.x), gat.forward(g2.a, g2.x), 0);
        CHECK(max_abs_diff(whole, parts) <= 1e-9);

        whole = gin.forward(b.a, b.x);
        parts = concat(gin.forward(g1.a, g1.x), gin.forward(g2.a, g2.x), 0);
        CHECK(max_abs_diff(whole, parts) <= 1e-9);
    }
}

TEST_CASE("disjoint vs dense mode agreement") {
    for (int inst = 0; inst < 5; ++inst) {
        Graph g1, g2;
        g1.a = random_adj(4, 800 + (uint64_t)inst);
        g2.a = random_adj(7, 900 + (uint64_t)inst);
        Rng xr(1000 + (uint64_t)inst);
        g1.x = normal({4, 3}, 0.0, 1.0, xr);
        g2.x = normal({7, 3}, 0.0, 1.0, xr);
        DisjointBatch db = to_disjoint({g1, g2});
        DenseBatch dn = to_dense({g1, g2});
        int64_t nm = dn.n_max, f_out = 4;

        auto compare = [&](const Tensor& disjoint_out, const Tensor& dense_out) {
            // dense_out is (B, n_max, f_out); compare real rows only
            int64_t row = 0;
            for (int64_t b = 0; b < 2; ++b) {
                int64_t order = b == 0 ? 4 : 7;
                for (int64_t i = 0; i < order; ++i, ++row)
                    for (int64_t j = 0; j < f_out; ++j)
                        CHECK(std::abs(disjoint_out.at({row, j}) -
                                       dense_out.at({b, i, j})) <= 1e-9);
            }
        };

        Rng lr(1100 + (uint64_t)inst);
        GcnConv gcn("gcn", 3, f_out, Activation::Tanh, lr);
        compare(gcn.forward(gcn_filter(db.a), db.x),
                gcn.forward_dense(gcn_filter_dense(dn.a, dn.mask), dn.x));

        ChebConv cheb("cheb", 3, f_out, 3, Activation::Tanh, lr);
        compare(cheb.forward(rescaled_laplacian(db.a), db.x),
                cheb.forward_dense(rescaled_laplacian_dense(dn.a, dn.mask), dn.x));

        GatConv gat("gat", 3, f_out / 2, 2, true, Activation::Tanh, lr);
        compare(gat.forward(db.a, db.x), gat.forward_dense(dn.a, dn.x));

        GinConv gin("gin", 3, 5, f_out, Activation::Tanh, lr);
        compare(gin.forward(db.a, db.x), gin.forward_dense(dn.a, dn.x));
    }
}

TEST_CASE("gradient suite for every layer") {
    for (const auto& name : gradcheck_layer_names()) {
        CAPTURE(name);
        auto r = layer_gradient_check(name, 12345);
        CHECK(r.passed(1e-4));
    }
}
