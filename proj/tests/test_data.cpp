#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "gnn/data.hpp"
#include "gnn/synth.hpp"

using namespace gnn;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("gnn_test_" + tag);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
    void write(const std::string& name, const std::string& content) const {
        std::ofstream f(path / name);
        f << content;
    }
};

const std::string kMethaneSdf =
    "methane\n"
    "  test\n"
    "\n"
    "  5  4  0  0  0  0  0  0  0  0999 V2000\n"
    "    0.0000    0.0000    0.0000 C   0  0  0  0  0  0  0  0  0  0  0  0\n"
    "    0.6300    0.6300    0.6300 H   0  0  0  0  0  0  0  0  0  0  0  0\n"
    "   -0.6300   -0.6300    0.6300 H   0  0  0  0  0  0  0  0  0  0  0  0\n"
    "   -0.6300    0.6300   -0.6300 H   0  0  0  0  0  0  0  0  0  0  0  0\n"
    "    0.6300   -0.6300   -0.6300 H   0  0  0  0  0  0  0  0  0  0  0  0\n"
    "  1  2  1  0\n"
    "  1  3  1  0\n"
    "  1  4  1  0\n"
    "  1  5  1  0\n"
    "M  END\n"
    "$$$$\n";

}  // namespace

TEST_CASE("citation loader") {
    SUBCASE("3-node single edge") {
        TempDir d("cit1");
        d.write("edges.tsv", "0\t1\n");
        d.write("features.csv", "1,0\n0,1\n1,1\n");
        d.write("labels.csv", "0\n1\n0\n");
        Dataset ds = load_citation(d.str(), "toy", false);
        const Graph& g = ds.graphs[0];
        CHECK(g.order() == 3);
        CHECK(g.a.nnz() == 2);
        CHECK(g.a.get(0, 1) == 1.0);
        CHECK(g.a.get(1, 0) == 1.0);
        CHECK(ds.n_classes == 2);
        CHECK(ds.node_labels == std::vector<int>{0, 1, 0});
    }
    SUBCASE("row normalization") {
        TempDir d("cit2");
        d.write("edges.tsv", "");
        d.write("features.csv", "2,2\n0,4\n");
        d.write("labels.csv", "0\n1\n");
        Dataset ds = load_citation(d.str(), "toy", true);
        CHECK(ds.graphs[0].x.values() == std::vector<double>{0.5, 0.5, 0.0, 1.0});
    }
    SUBCASE("empty edges file succeeds with zero adjacency") {
        TempDir d("cit3");
        d.write("edges.tsv", "");
        d.write("features.csv", "1\n1\n");
        d.write("labels.csv", "0\n1\n");
        Dataset ds = load_citation(d.str());
        CHECK(ds.graphs[0].a.nnz() == 0);
    }
    SUBCASE("dangling edge index names the line") {
        TempDir d("cit4");
        d.write("edges.tsv", "0\t1\n0\t9\n");
        d.write("features.csv", "1\n1\n");
        d.write("labels.csv", "0\n1\n");
        CHECK_THROWS_WITH_AS(load_citation(d.str()), doctest::Contains("edges.tsv:2"),
                             std::runtime_error);
    }
    SUBCASE("duplicate edges deduplicated to binary") {
        TempDir d("cit5");
        d.write("edges.tsv", "0\t1\n1\t0\n0\t1\n");
        d.write("features.csv", "1\n1\n");
        d.write("labels.csv", "0\n1\n");
        Dataset ds = load_citation(d.str());
        CHECK(ds.graphs[0].a.nnz() == 2);
        CHECK(ds.graphs[0].a.get(0, 1) == 1.0);
    }
    SUBCASE("unlabeled flag column") {
        TempDir d("cit6");
        d.write("edges.tsv", "");
        d.write("features.csv", "1\n1\n1\n");
        d.write("labels.csv", "0,1\n1,0\n1,1\n");
        Dataset ds = load_citation(d.str());
        CHECK(ds.labeled == std::vector<uint8_t>{1, 0, 1});
    }
}

TEST_CASE("tu loader") {
    SUBCASE("minimal two-graph fixture") {
        TempDir d("tu1");
        d.write("T_A.txt", "1, 2\n2, 1\n3, 4\n4, 3\n4, 5\n5, 4\n");
        d.write("T_graph_indicator.txt", "1\n1\n2\n2\n2\n");
        d.write("T_graph_labels.txt", "3\n7\n");
        Dataset ds = load_tu(d.str(), "T");
        CHECK(ds.graphs.size() == 2);
        CHECK(ds.n_classes == 2);
        CHECK(ds.graphs[0].order() == 2);
        CHECK(ds.graphs[1].order() == 3);
        CHECK(ds.graphs[1].a.get(0, 1) == 1.0);  // local indices
        CHECK(ds.graphs[1].a.get(1, 2) == 1.0);
        // labels remapped to contiguous classes
        CHECK(ds.graphs[0].y == std::vector<double>{0.0});
        CHECK(ds.graphs[1].y == std::vector<double>{1.0});
    }
    SUBCASE("node labels become one-hot features") {
        TempDir d("tu2");
        d.write("T_A.txt", "1, 2\n2, 1\n");
        d.write("T_graph_indicator.txt", "1\n1\n");
        d.write("T_graph_labels.txt", "0\n");
        d.write("T_node_labels.txt", "2\n0\n");
        Dataset ds = load_tu(d.str(), "T");
        CHECK(ds.graphs[0].x.shape() == Shape{2, 3});
        CHECK(ds.graphs[0].x.values() == std::vector<double>{0, 0, 1, 1, 0, 0});
    }
    SUBCASE("single node graph") {
        TempDir d("tu3");
        d.write("T_A.txt", "");
        d.write("T_graph_indicator.txt", "1\n");
        d.write("T_graph_labels.txt", "5\n");
        Dataset ds = load_tu(d.str(), "T");
        CHECK(ds.graphs[0].order() == 1);
        CHECK(ds.graphs[0].a.nnz() == 0);
    }
    SUBCASE("cross-graph edge rejected") {
        TempDir d("tu4");
        d.write("T_A.txt", "1, 3\n3, 1\n");
        d.write("T_graph_indicator.txt", "1\n1\n2\n");
        d.write("T_graph_labels.txt", "0\n1\n");
        CHECK_THROWS(load_tu(d.str(), "T"));
    }
    SUBCASE("missing indicator file rejected") {
        TempDir d("tu5");
        d.write("T_A.txt", "");
        d.write("T_graph_labels.txt", "0\n");
        CHECK_THROWS(load_tu(d.str(), "T"));
    }
}

TEST_CASE("qm9 loader") {
    SUBCASE("methane fixture") {
        TempDir d("qm1");
        d.write("qm9.sdf", kMethaneSdf);
        d.write("targets.csv", "index,Mu,Alpha,Homo,U0\n0,0.0,13.2,-0.39,-40.5\n");
        Dataset ds = load_qm9_sdf(d.str() + "/qm9.sdf", d.str() + "/targets.csv");
        REQUIRE(ds.graphs.size() == 1);
        const Graph& g = ds.graphs[0];
        CHECK(g.order() == 5);
        CHECK(g.a.nnz() == 8);  // 4 undirected bonds
        // vocabulary {H,C,N,O,F}: row 0 is carbon, rows 1-4 hydrogen
        CHECK(g.x.shape() == Shape{5, 5});
        CHECK(g.x.at({0, 1}) == 1.0);
        for (int64_t i = 1; i < 5; ++i) CHECK(g.x.at({i, 0}) == 1.0);
        // every stored edge carries the one-hot single-bond vector
        REQUIRE(g.e.has_value());
        CHECK(g.e->shape() == Shape{8, 4});
        for (int64_t k = 0; k < 8; ++k) {
            CHECK(g.e->at({k, 0}) == 1.0);
            CHECK(g.e->at({k, 1}) + g.e->at({k, 2}) + g.e->at({k, 3}) == 0.0);
        }
        CHECK(g.y == std::vector<double>{0.0, 13.2, -0.39, -40.5});
    }
    SUBCASE("diatomic double bond symmetric edge attributes") {
        TempDir d("qm2");
        d.write("qm9.sdf",
                "o2\n  t\n\n"
                "  2  1  0  0  0  0  0  0  0  0999 V2000\n"
                "    0.0000    0.0000    0.0000 O   0  0\n"
                "    1.2000    0.0000    0.0000 O   0  0\n"
                "  1  2  2  0\n"
                "M  END\n$$$$\n");
        d.write("targets.csv", "index,Mu,Alpha,Homo,U0\n0,0,0,0,0\n");
        Dataset ds = load_qm9_sdf(d.str() + "/qm9.sdf", d.str() + "/targets.csv");
        const Graph& g = ds.graphs[0];
        CHECK(g.a.nnz() == 2);
        CHECK(g.e->at({0, 1}) == 1.0);
        CHECK(g.e->at({1, 1}) == 1.0);
    }
    SUBCASE("unknown element skips the molecule and keeps target alignment") {
        TempDir d("qm3");
        std::string sdf =
            "nacl\n  t\n\n"
            "  1  0  0  0  0  0  0  0  0  0999 V2000\n"
            "    0.0000    0.0000    0.0000 Na  0  0\n"
            "M  END\n$$$$\n" +
            kMethaneSdf;
        d.write("qm9.sdf", sdf);
        d.write("targets.csv",
                "index,Mu,Alpha,Homo,U0\n0,9,9,9,9\n1,1.5,2.5,3.5,4.5\n");
        Qm9LoadStats stats;
        Dataset ds =
            load_qm9_sdf(d.str() + "/qm9.sdf", d.str() + "/targets.csv", -1, &stats);
        CHECK(stats.skipped_unknown_element == 1);
        REQUIRE(ds.graphs.size() == 1);
        CHECK(ds.graphs[0].y == std::vector<double>{1.5, 2.5, 3.5, 4.5});
    }
    SUBCASE("limit caps the record count") {
        TempDir d("qm4");
        std::string sdf, targets = "index,Mu,Alpha,Homo,U0\n";
        for (int i = 0; i < 12; ++i) {
            sdf += kMethaneSdf;
            targets += std::to_string(i) + ",1,1,1,1\n";
        }
        d.write("qm9.sdf", sdf);
        d.write("targets.csv", targets);
        Dataset ds = load_qm9_sdf(d.str() + "/qm9.sdf", d.str() + "/targets.csv", 5);
        CHECK(ds.graphs.size() == 5);
    }
    SUBCASE("malformed counts line names the record") {
        TempDir d("qm5");
        d.write("qm9.sdf", "bad\n t\n\nxxx\nM  END\n$$$$\n");
        d.write("targets.csv", "index,Mu,Alpha,Homo,U0\n0,0,0,0,0\n");
        CHECK_THROWS_WITH_AS(
            load_qm9_sdf(d.str() + "/qm9.sdf", d.str() + "/targets.csv"),
            doctest::Contains("record 0"), std::runtime_error);
    }
}

TEST_CASE("splits") {
    SUBCASE("per-class counts are exact") {
        std::vector<int> labels;
        for (int c = 0; c < 7; ++c)
            for (int i = 0; i < 100; ++i) labels.push_back(c);
        std::vector<uint8_t> labeled(labels.size(), 1);
        SplitMasks m = split_per_class(labels, labeled, 7, 20, 30, 42);
        auto count = [](const std::vector<uint8_t>& v) {
            int64_t s = 0;
            for (auto b : v) s += b;
            return s;
        };
        CHECK(count(m.train) == 140);
        CHECK(count(m.val) == 210);
        CHECK(count(m.test) == 350);
        for (size_t i = 0; i < labels.size(); ++i)
            CHECK(m.train[i] + m.val[i] + m.test[i] == 1);
        // per-class exactness
        for (int c = 0; c < 7; ++c) {
            int tr = 0;
            for (size_t i = 0; i < labels.size(); ++i)
                if (labels[i] == c && m.train[i]) ++tr;
            CHECK(tr == 20);
        }
    }
    SUBCASE("class with fewer than train+val labeled nodes rejected") {
        std::vector<int> labels(60, 0);
        labels.resize(100, 1);  // class 1 has only 40 nodes
        std::vector<uint8_t> labeled(labels.size(), 1);
        CHECK_THROWS(split_per_class(labels, labeled, 2, 20, 30, 1));
    }
    SUBCASE("fractions 80/10/10") {
        SplitMasks m = split_fractions(10, 0.8, 0.1, 3);
        auto count = [](const std::vector<uint8_t>& v) {
            int64_t s = 0;
            for (auto b : v) s += b;
            return s;
        };
        CHECK(count(m.train) == 8);
        CHECK(count(m.val) == 1);
        CHECK(count(m.test) == 1);
    }
    SUBCASE("same seed twice gives identical masks") {
        std::vector<int> labels(200, 0);
        for (size_t i = 100; i < 200; ++i) labels[i] = 1;
        std::vector<uint8_t> labeled(200, 1);
        SplitMasks a = split_per_class(labels, labeled, 2, 20, 30, 9);
        SplitMasks b = split_per_class(labels, labeled, 2, 20, 30, 9);
        CHECK(a.train == b.train);
        CHECK(a.val == b.val);
        CHECK(a.test == b.test);
        CHECK(split_fractions(50, 0.8, 0.1, 5).train ==
              split_fractions(50, 0.8, 0.1, 5).train);
    }
}

namespace {

Graph make_graph(int64_t n, uint64_t seed) {
    Rng rng(seed);
    std::vector<int64_t> ri, ci;
    for (int64_t i = 0; i + 1 < n; ++i) {
        ri.push_back(i);
        ci.push_back(i + 1);
        ri.push_back(i + 1);
        ci.push_back(i);
    }
    Graph g;
    g.a = SparseMatrix::from_coo(n, n, ri, ci, std::vector<double>(ri.size(), 1.0));
    g.x = normal({n, 3}, 0.0, 1.0, rng);
    return g;
}

}  // namespace

TEST_CASE("batching") {
    Graph g1 = make_graph(2, 1), g2 = make_graph(3, 2);
    SUBCASE("disjoint") {
        DisjointBatch b = to_disjoint({g1, g2});
        CHECK(b.x.shape() == Shape{5, 3});
        CHECK(b.segment_ids == std::vector<int>{0, 0, 1, 1, 1});
        CHECK(b.a.nnz() == g1.a.nnz() + g2.a.nnz());
        DisjointBatch single = to_disjoint({g1});
        CHECK(single.segment_ids == std::vector<int>{0, 0});
    }
    SUBCASE("dense round trip") {
        DenseBatch b = to_dense({g1, g2});
        CHECK(b.n_max == 3);
        CHECK(b.a.shape() == Shape{2, 3, 3});
        CHECK(b.x.shape() == Shape{2, 3, 3});
        // padded entries are exactly zero, mask counts match orders
        CHECK(b.mask == std::vector<uint8_t>{1, 1, 0, 1, 1, 1});
        for (int64_t j = 0; j < 3; ++j) {
            CHECK(b.x.at({0, 2, j}) == 0.0);
            CHECK(b.a.at({0, 2, j}) == 0.0);
            CHECK(b.a.at({0, j, 2}) == 0.0);
        }
        // slicing by mask reproduces each graph's X exactly
        for (int64_t i = 0; i < 2; ++i)
            for (int64_t j = 0; j < 3; ++j)
                CHECK(b.x.at({0, i, j}) == g1.x.at({i, j}));
        for (int64_t i = 0; i < 3; ++i)
            for (int64_t j = 0; j < 3; ++j) {
                CHECK(b.x.at({1, i, j}) == g2.x.at({i, j}));
                CHECK(b.a.at({1, i, j}) == g2.a.get(i, j));
            }
    }
    SUBCASE("order above n_max rejected naming the graph") {
        CHECK_THROWS_WITH_AS(to_dense({g1, g2}, 2), doctest::Contains("1"),
                             std::runtime_error);
    }
}

TEST_CASE("mixed mode equals per-sample spmm") {
    Graph g = make_graph(6, 5);
    Rng rng(6);
    Tensor xb = normal({3, 6, 4}, 0.0, 1.0, rng);
    Tensor out = mixed_mode_spmm(g.a, xb);
    for (int64_t b = 0; b < 3; ++b) {
        Tensor xs({6, 4});
        std::copy(xb.data() + b * 24, xb.data() + (b + 1) * 24, xs.data());
        Tensor ref = spmm(g.a, xs);
        for (int64_t i = 0; i < 24; ++i)
            CHECK(out.data()[b * 24 + i] == doctest::Approx(ref.data()[i]).epsilon(1e-12));
    }
    // identity support leaves the batch unchanged
    Tensor same = mixed_mode_spmm(SparseMatrix::identity(6), xb);
    CHECK(same.values() == xb.values());
}

TEST_CASE("loader determinism and synthetic generator shapes") {
    TempDir d("synth");
    synth::TuOptions o;
    o.n_graphs = 30;
    synth::write_tu_like(d.str(), "S", 11, o);
    Dataset a = load_tu(d.str(), "S");
    Dataset b = load_tu(d.str(), "S");
    CHECK(a.graphs.size() == 30);
    CHECK(a.n_classes == 2);
    REQUIRE(a.graphs.size() == b.graphs.size());
    for (size_t i = 0; i < a.graphs.size(); ++i) {
        CHECK(a.graphs[i].x.values() == b.graphs[i].x.values());
        CHECK(a.graphs[i].a.col_idx() == b.graphs[i].a.col_idx());
    }
}
