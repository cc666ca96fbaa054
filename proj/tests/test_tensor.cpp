#include <doctest.h>

#include <cmath>

#include "gnn/optim.hpp"
#include "gnn/tensor.hpp"

using namespace gnn;

namespace {

// Central finite differences of a scalar function of one leaf tensor,
// compared against the tape gradient.
double max_fd_error(const std::function<Tensor(const Tensor&)>& f, Tensor x,
                    double h = 1e-5) {
    x.set_requires_grad(true);
    std::vector<Param> ps{{"x", x}};
    auto r = gradient_check([&] { return reduce_sum(f(x)); }, ps, h);
    REQUIRE(r.finite);
    return r.max_rel_error;
}

Tensor rand_t(Shape s, uint64_t seed, double lo = -1.0, double hi = 1.0) {
    Rng rng(seed);
    return uniform(std::move(s), lo, hi, rng);
}

}  // namespace

TEST_CASE("matmul identity and shapes") {
    Tensor a({2, 2}, {1, 2, 3, 4});
    Tensor id({2, 2}, {1, 0, 0, 1});
    Tensor out = matmul(a, id);
    CHECK(out.values() == std::vector<double>{1, 2, 3, 4});
    CHECK_THROWS_AS(matmul(a, Tensor({3, 2}, 0.0)), ShapeError);
}

TEST_CASE("relu example") {
    Tensor out = relu(Tensor({3}, {-1, 0, 2}));
    CHECK(out.values() == std::vector<double>{0, 0, 2});
}

TEST_CASE("segment_sum example") {
    Tensor out = segment_sum(Tensor({4, 1}, {1, 2, 3, 4}), {0, 0, 1, 1}, 2);
    CHECK(out.values() == std::vector<double>{3, 7});
    CHECK_THROWS(segment_sum(Tensor({4, 1}, {1, 2, 3, 4}), {0, 1, 0, 1}, 2));
}

TEST_CASE("backward basics") {
    SUBCASE("sum is linear") {
        Tensor w({3}, {1, 2, 3});
        w.set_requires_grad(true);
        Tape tape;
        Tensor loss = reduce_sum(w);
        auto grads = tape.backward(loss);
        CHECK(grads.at(w.node_id(tape)).values() == std::vector<double>{1, 1, 1});
    }
    SUBCASE("square") {
        Tensor w({1}, {2.0});
        w.set_requires_grad(true);
        Tape tape;
        auto grads = tape.backward(reduce_sum(square(w)));
        CHECK(grads.at(w.node_id(tape)).values()[0] == doctest::Approx(4.0));
    }
    SUBCASE("sigmoid at 0") {
        Tensor w({1}, {0.0});
        w.set_requires_grad(true);
        Tape tape;
        auto grads = tape.backward(reduce_sum(sigmoid(w)));
        CHECK(grads.at(w.node_id(tape)).values()[0] == doctest::Approx(0.25).epsilon(1e-9));
    }
    SUBCASE("non-scalar loss rejected") {
        Tensor w({2}, {1.0, 2.0});
        w.set_requires_grad(true);
        Tape tape;
        Tensor y = square(w);
        CHECK_THROWS(tape.backward(y));
    }
    SUBCASE("unreachable leaf gets zero gradient") {
        Tensor w({2}, {1.0, 2.0}), v({3}, {1.0, 1.0, 1.0});
        w.set_requires_grad(true);
        v.set_requires_grad(true);
        Tape tape;
        tape.track(v);
        auto grads = tape.backward(reduce_sum(square(w)));
        CHECK(grads.at(v.node_id(tape)).values() == std::vector<double>{0, 0, 0});
    }
}

TEST_CASE("finite differences across op kinds and shapes") {
    std::vector<Shape> shapes = {{3}, {2, 4}, {2, 3, 2}};
    for (size_t si = 0; si < shapes.size(); ++si) {
        Shape s = shapes[si];
        uint64_t seed = 100 + si;
        CAPTURE(si);
        CHECK(max_fd_error([](const Tensor& x) { return relu(add_scalar(x, 0.37)); },
                           rand_t(s, seed)) < 1e-4);
        CHECK(max_fd_error([](const Tensor& x) { return leaky_relu(add_scalar(x, 0.37), 0.2); },
                           rand_t(s, seed + 1)) < 1e-4);
        CHECK(max_fd_error([](const Tensor& x) { return tanh_op(x); }, rand_t(s, seed + 2)) <
              1e-4);
        CHECK(max_fd_error([](const Tensor& x) { return sigmoid(x); }, rand_t(s, seed + 3)) <
              1e-4);
        // weight the softmax output: its plain sum is constant 1 per row
        Tensor sm_w = rand_t(s, seed + 90);
        CHECK(max_fd_error([&](const Tensor& x) { return mul(softmax(x), sm_w); },
                           rand_t(s, seed + 4)) < 1e-4);
        CHECK(max_fd_error([](const Tensor& x) { return log_op(x); },
                           rand_t(s, seed + 5, 0.5, 2.0)) < 1e-4);
        CHECK(max_fd_error([](const Tensor& x) { return exp_op(x); }, rand_t(s, seed + 6)) <
              1e-4);
        CHECK(max_fd_error([](const Tensor& x) { return square(x); }, rand_t(s, seed + 7)) <
              1e-4);
        CHECK(max_fd_error([](const Tensor& x) { return sqrt_op(x); },
                           rand_t(s, seed + 8, 0.5, 2.0)) < 1e-4);
        CHECK(max_fd_error([](const Tensor& x) { return reciprocal(x); },
                           rand_t(s, seed + 9, 0.5, 2.0)) < 1e-4);
        CHECK(max_fd_error([](const Tensor& x) { return scale(x, -1.7); },
                           rand_t(s, seed + 10)) < 1e-4);
        CHECK(max_fd_error([&](const Tensor& x) { return mul(x, x); }, rand_t(s, seed + 11)) <
              1e-4);
        for (int axis = 0; axis < (int)s.size(); ++axis) {
            CHECK(max_fd_error([axis](const Tensor& x) { return reduce_sum(x, axis); },
                               rand_t(s, seed + 12)) < 1e-4);
            CHECK(max_fd_error([axis](const Tensor& x) { return reduce_mean(x, axis); },
                               rand_t(s, seed + 13)) < 1e-4);
            CHECK(max_fd_error([axis](const Tensor& x) { return reduce_max(x, axis); },
                               rand_t(s, seed + 14)) < 1e-4);
        }
    }

    SUBCASE("matmul variants") {
        for (uint64_t seed : {7u, 8u, 9u}) {
            Tensor b2 = rand_t({4, 3}, seed * 31);
            CHECK(max_fd_error([&](const Tensor& x) { return matmul(x, b2); },
                               rand_t({3, 4}, seed)) < 1e-4);
            CHECK(max_fd_error([&](const Tensor& x) { return matmul(x, b2); },
                               rand_t({2, 3, 4}, seed + 40)) < 1e-4);
            Tensor a3 = rand_t({2, 3, 4}, seed + 80);
            CHECK(max_fd_error([&](const Tensor& x) { return matmul(a3, x); },
                               rand_t({2, 4, 3}, seed + 120)) < 1e-4);
        }
    }

    SUBCASE("add broadcasting") {
        Tensor bias = rand_t({5}, 3);
        CHECK(max_fd_error([&](const Tensor& x) { return add(x, bias); },
                           rand_t({4, 5}, 4)) < 1e-4);
        Tensor x0 = rand_t({4, 5}, 5);
        CHECK(max_fd_error([&](const Tensor& b) { return add(x0, b); }, rand_t({5}, 6)) <
              1e-4);
        CHECK(max_fd_error([&](const Tensor& b) { return add(rand_t({2, 4, 5}, 8), b); },
                           rand_t({5}, 7)) < 1e-4);
    }

    SUBCASE("mul broadcasting") {
        Tensor x0 = rand_t({4, 5}, 10);
        CHECK(max_fd_error([&](const Tensor& c) { return mul(x0, c); },
                           rand_t({4, 1}, 11)) < 1e-4);
        CHECK(max_fd_error([&](const Tensor& c) { return mul(x0, c); }, rand_t({1}, 12)) <
              1e-4);
    }

    SUBCASE("structural ops") {
        CHECK(max_fd_error([](const Tensor& x) { return reshape(x, {6, 2}); },
                           rand_t({3, 4}, 20)) < 1e-4);
        Tensor other = rand_t({3, 2}, 21);
        CHECK(max_fd_error([&](const Tensor& x) { return concat(x, other, 1); },
                           rand_t({3, 4}, 22)) < 1e-4);
        CHECK(max_fd_error([&](const Tensor& x) { return concat(other, x, 0); },
                           rand_t({4, 2}, 23)) < 1e-4);
        CHECK(max_fd_error([](const Tensor& x) { return transpose(x); },
                           rand_t({3, 4}, 24)) < 1e-4);
        CHECK(max_fd_error([](const Tensor& x) { return transpose(x); },
                           rand_t({2, 3, 4}, 25)) < 1e-4);
        CHECK(max_fd_error([](const Tensor& x) { return gather(x, {2, 0, 2}); },
                           rand_t({4, 3}, 26)) < 1e-4);
        std::vector<uint8_t> keep = {1, 0, 1, 1, 0, 1};
        CHECK(max_fd_error([&](const Tensor& x) { return masked_fill(x, keep, -3.0); },
                           rand_t({2, 3}, 27)) < 1e-4);
        CHECK(max_fd_error([](const Tensor& x) { return l2_normalize_rows(square(x)); },
                           rand_t({4, 3}, 28, 0.3, 1.0)) < 1e-4);
    }

    SUBCASE("segment ops") {
        std::vector<int> ids = {0, 0, 1, 2, 2, 2};
        for (uint64_t seed : {31u, 32u, 33u}) {
            CHECK(max_fd_error([&](const Tensor& x) { return segment_sum(x, ids, 3); },
                               rand_t({6, 3}, seed)) < 1e-4);
            CHECK(max_fd_error([&](const Tensor& x) { return segment_mean(x, ids, 3); },
                               rand_t({6, 3}, seed + 10)) < 1e-4);
            CHECK(max_fd_error([&](const Tensor& x) { return segment_max(x, ids, 3); },
                               rand_t({6, 3}, seed + 20)) < 1e-4);
        }
    }
}

TEST_CASE("backward linearity") {
    Tensor w = rand_t({4, 3}, 55);
    w.set_requires_grad(true);
    auto grad_of = [&](int which) {
        Tape tape;
        Tensor l1 = reduce_sum(square(w));
        Tensor l2 = reduce_sum(tanh_op(w));
        Tensor loss = which == 0 ? l1 : which == 1 ? l2 : add(l1, l2);
        auto grads = tape.backward(loss);
        return grads.at(w.node_id(tape)).values();
    };
    auto g1 = grad_of(0), g2 = grad_of(1), gs = grad_of(2);
    for (size_t i = 0; i < gs.size(); ++i)
        CHECK(std::abs(gs[i] - (g1[i] + g2[i])) <= 1e-12);
}

TEST_CASE("segment properties") {
    SUBCASE("segment_mean of a constant per segment is exact") {
        Tensor x({5, 2}, {3, -1, 3, -1, 7, 2, 7, 2, 7, 2});
        Tensor m = segment_mean(x, {0, 0, 1, 1, 1}, 2);
        CHECK(m.values() == std::vector<double>{3, -1, 7, 2});
    }
    SUBCASE("segment_sum then gather-expansion is block constant") {
        Tensor x = rand_t({6, 2}, 60);
        std::vector<int> ids = {0, 0, 0, 1, 1, 2};
        Tensor s = segment_sum(x, ids, 3);
        Tensor expanded = gather(s, ids);
        for (int64_t i = 0; i < 6; ++i)
            for (int64_t j = 0; j < 2; ++j)
                CHECK(expanded.at({i, j}) == s.at({ids[(size_t)i], j}));
    }
}

TEST_CASE("topk_indices is stable with lowest-index ties") {
    Tensor scores({6}, {1.0, 3.0, 3.0, 0.5, 3.0, 2.0});
    auto idx = topk_indices(scores, 4);
    CHECK(idx == std::vector<int>{1, 2, 4, 5});
}

TEST_CASE("dropout") {
    Rng rng(5);
    Tensor x({1000}, 1.0);
    Tensor kept = dropout(x, 0.4, true, rng);
    double sum = 0, zeros = 0;
    for (double v : kept.values()) {
        sum += v;
        zeros += v == 0.0;
    }
    // inverted dropout: survivors scaled by 1/(1-rate), mean preserved
    CHECK(sum / 1000.0 == doctest::Approx(1.0).epsilon(0.1));
    CHECK(zeros / 1000.0 == doctest::Approx(0.4).epsilon(0.15));
    Rng rng2(5);
    Tensor same = dropout(x, 0.4, false, rng2);
    CHECK(same.values() == x.values());
}

TEST_CASE("determinism: same seed gives identical gradients") {
    auto run = [] {
        Rng rng(77);
        Tensor w = glorot_uniform({4, 3}, rng);
        w.set_requires_grad(true);
        Tensor x = normal({5, 4}, 0.0, 1.0, rng);
        Tape tape;
        Tensor loss = reduce_sum(square(tanh_op(matmul(x, w))));
        auto grads = tape.backward(loss);
        return grads.at(w.node_id(tape)).values();
    };
    CHECK(run() == run());
}

TEST_CASE("adam") {
    SUBCASE("zero gradient leaves parameters unchanged") {
        Tensor w({2}, {1.0, -2.0});
        Adam adam(0.01);
        adam.register_params({{"w", w}});
        adam.step({Tensor({2}, 0.0)});
        CHECK(w.values() == std::vector<double>{1.0, -2.0});
    }
    SUBCASE("first step moves by about lr") {
        Tensor w({1}, {0.5});
        Adam adam(0.001);
        adam.register_params({{"w", w}});
        adam.step({Tensor({1}, {1.0})});
        CHECK(w.values()[0] == doctest::Approx(0.5 - 0.001).epsilon(1e-3));
    }
    SUBCASE("second identical step is no larger than the first") {
        Tensor w({1}, {0.5});
        Adam adam(0.001);
        adam.register_params({{"w", w}});
        adam.step({Tensor({1}, {1.0})});
        double d1 = 0.5 - w.values()[0];
        double before = w.values()[0];
        adam.step({Tensor({1}, {1.0})});
        double d2 = before - w.values()[0];
        CHECK(d2 <= d1 * 1.0 + 1e-9);
    }
    SUBCASE("NaN gradient names the parameter") {
        Tensor w({1}, {0.5});
        Adam adam(0.001);
        adam.register_params({{"w_hidden", w}});
        Tensor bad({1}, {std::nan("")});
        CHECK_THROWS_WITH_AS(adam.step({bad}), doctest::Contains("w_hidden"),
                             std::runtime_error);
    }
}

TEST_CASE("gradient_check harness") {
    SUBCASE("linear function is near-exact") {
        Rng rng(9);
        Tensor x = normal({4, 3}, 0.0, 1.0, rng);
        Tensor w = glorot_uniform({3, 2}, rng);
        w.set_requires_grad(true);
        auto r = gradient_check([&] { return reduce_sum(matmul(x, w)); }, {{"w", w}});
        CHECK(r.max_rel_error < 1e-6);
    }
    SUBCASE("frozen parameters are absent from the report") {
        Tensor w({1}, {2.0});
        auto r = gradient_check([&] { return reduce_sum(square(w)); }, {{"w", w}});
        CHECK(r.worst_param.empty());
        CHECK(r.max_rel_error == 0.0);
    }
}
