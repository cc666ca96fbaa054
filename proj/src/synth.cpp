#include "gnn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <stdexcept>
#include <vector>

namespace gnn::synth {

namespace {

using Rng = std::mt19937_64;

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    return f;
}

}  // namespace

// ---- citation ----

void write_citation_like(const std::string& dir, uint64_t seed,
                         const CitationOptions& o) {
    Rng rng(seed);
    int64_t n = o.n_nodes;
    std::vector<int> cls((size_t)n);
    for (int64_t i = 0; i < n; ++i) cls[(size_t)i] = (int)(i % o.n_classes);
    std::shuffle(cls.begin(), cls.end(), rng);

    std::vector<std::vector<int64_t>> by_class((size_t)o.n_classes);
    for (int64_t i = 0; i < n; ++i) by_class[(size_t)cls[(size_t)i]].push_back(i);

    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::set<std::pair<int64_t, int64_t>> edges;
    std::uniform_int_distribution<int64_t> any_node(0, n - 1);
    for (int64_t i = 0; i < n; ++i) {
        int ne = (int)o.edges_per_node;
        if (u(rng) < o.edges_per_node - ne) ++ne;
        for (int k = 0; k < ne; ++k) {
            int64_t j;
            if (u(rng) < o.homophily) {
                const auto& pool = by_class[(size_t)cls[(size_t)i]];
                j = pool[(size_t)(rng() % pool.size())];
            } else {
                j = any_node(rng);
            }
            if (j == i) continue;
            edges.insert({std::min(i, j), std::max(i, j)});
        }
    }

    auto fe = open_out(dir + "/edges.tsv");
    for (auto& [a, b] : edges) fe << a << "\t" << b << "\n";

    // sparse binary bag-of-words: each class owns a topic band of dims
    auto ff = open_out(dir + "/features.csv");
    for (int64_t i = 0; i < n; ++i) {
        std::set<int64_t> words;
        int c = cls[(size_t)i];
        int64_t band_start = (int64_t)c * o.topic_width % o.n_features;
        std::uniform_int_distribution<int64_t> in_band(0, o.topic_width - 1);
        std::uniform_int_distribution<int64_t> any_dim(0, o.n_features - 1);
        for (int w = 0; w < o.words_per_node; ++w) {
            if (u(rng) < o.topic_word_prob)
                words.insert((band_start + in_band(rng)) % o.n_features);
            else
                words.insert(any_dim(rng));
        }
        std::string row;
        row.reserve((size_t)o.n_features * 2);
        for (int64_t d = 0; d < o.n_features; ++d) {
            if (d) row += ',';
            row += words.count(d) ? '1' : '0';
        }
        ff << row << "\n";
    }

    auto fl = open_out(dir + "/labels.csv");
    for (int64_t i = 0; i < n; ++i) fl << cls[(size_t)i] << ",1\n";
}

// ---- TU ----

void write_tu_like(const std::string& dir, const std::string& name, uint64_t seed,
                   const TuOptions& o) {
    Rng rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::string base = dir + "/" + name;
    auto fa = open_out(base + "_A.txt");
    auto fi = open_out(base + "_graph_indicator.txt");
    auto fg = open_out(base + "_graph_labels.txt");
    auto fn = open_out(base + "_node_labels.txt");

    int64_t node_offset = 0;
    for (int g = 0; g < o.n_graphs; ++g) {
        int y = g % o.n_classes;
        std::poisson_distribution<int> pn(o.mean_order - 8.0);
        int n = 8 + pn(rng);  // ring motif needs a handful of nodes

        // class motif: a ring of y-dependent length on the first nodes
        int ring = 0;
        if (u(rng) < o.ring_signal) ring = y == 0 ? 5 : 6;
        std::set<std::pair<int, int>> edges;
        for (int i = 0; i < ring; ++i)
            edges.insert({std::min(i, (i + 1) % ring), std::max(i, (i + 1) % ring)});
        // random spanning tree over the rest
        for (int i = std::max(ring, 1); i < n; ++i) {
            int j = (int)(rng() % (uint64_t)i);
            edges.insert({j, i});
        }
        // a few extra edges
        int extra = (int)(0.3 * n);
        std::uniform_int_distribution<int> node(0, n - 1);
        for (int k = 0; k < extra; ++k) {
            int a = node(rng), b = node(rng);
            if (a != b) edges.insert({std::min(a, b), std::max(a, b)});
        }

        // node labels: class-specific mixture over the label alphabet
        for (int i = 0; i < n; ++i) {
            int lab;
            if (u(rng) < o.label_signal) {
                // class 0 favors low labels, class 1 high labels
                std::uniform_int_distribution<int> half(0, o.n_node_labels / 2 - 1);
                lab = y == 0 ? half(rng) : o.n_node_labels - 1 - half(rng);
            } else {
                lab = (int)(rng() % (uint64_t)o.n_node_labels);
            }
            fn << lab << "\n";
            fi << (g + 1) << "\n";
        }
        for (auto& [a, b] : edges) {
            fa << (node_offset + a + 1) << ", " << (node_offset + b + 1) << "\n";
            fa << (node_offset + b + 1) << ", " << (node_offset + a + 1) << "\n";
        }
        fg << y << "\n";
        node_offset += n;
    }
}

// ---- QM9 ----

namespace {

struct Atom {
    std::string el;
};
struct Bond {
    int a, b, type;  // 1-based atoms, V2000 bond type
};

}  // namespace

void write_qm9_like(const std::string& dir, uint64_t seed, const Qm9Options& o) {
    Rng rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto fs = open_out(dir + "/qm9.sdf");
    auto ft = open_out(dir + "/targets.csv");
    ft << "index,Mu,Alpha,Homo,U0\n";

    const char* heavy[] = {"C", "N", "O", "F"};
    const int valence[] = {4, 3, 2, 1};

    for (int64_t m = 0; m < o.n_molecules; ++m) {
        int nh = 1 + (int)(rng() % 8);  // heavy atoms
        std::vector<int> kind((size_t)nh);
        for (auto& k : kind) {
            double r = u(rng);
            k = r < 0.62 ? 0 : r < 0.78 ? 1 : r < 0.94 ? 2 : 3;
        }
        std::vector<Atom> atoms;
        for (int i = 0; i < nh; ++i) atoms.push_back({heavy[kind[(size_t)i]]});

        std::vector<Bond> bonds;
        std::vector<int> used((size_t)nh, 0);
        // heavy-atom tree; F stays terminal
        for (int i = 1; i < nh; ++i) {
            int j = (int)(rng() % (uint64_t)i);
            int tries = 0;
            while ((used[(size_t)j] >= valence[kind[(size_t)j]] - (j > 0 ? 0 : 0) ||
                    kind[(size_t)j] == 3) &&
                   tries++ < 8)
                j = (int)(rng() % (uint64_t)i);
            int bt = 1;
            if (kind[(size_t)i] != 3 && kind[(size_t)j] != 3 &&
                used[(size_t)i] + 1 < valence[kind[(size_t)i]] &&
                used[(size_t)j] + 1 < valence[kind[(size_t)j]] && u(rng) < 0.25)
                bt = 2;
            bonds.push_back({j + 1, i + 1, bt});
            used[(size_t)i] += bt;
            used[(size_t)j] += bt;
        }
        // fill remaining valence with hydrogens
        int n_heavy = nh;
        for (int i = 0; i < n_heavy; ++i) {
            int free = valence[kind[(size_t)i]] - used[(size_t)i];
            for (int h = 0; h < free; ++h) {
                atoms.push_back({"H"});
                bonds.push_back({i + 1, (int)atoms.size(), 1});
            }
        }

        // record
        fs << "mol" << m << "\n  synth\n\n";
        char buf[128];
        std::snprintf(buf, sizeof buf, "%3d%3d  0  0  0  0  0  0  0  0999 V2000\n",
                      (int)atoms.size(), (int)bonds.size());
        fs << buf;
        for (const auto& a : atoms) {
            std::snprintf(buf, sizeof buf,
                          "%10.4f%10.4f%10.4f %-3s 0  0  0  0  0  0  0  0  0  0  0  0\n",
                          u(rng) * 4 - 2, u(rng) * 4 - 2, u(rng) * 4 - 2, a.el.c_str());
            fs << buf;
        }
        for (const auto& b : bonds) {
            std::snprintf(buf, sizeof buf, "%3d%3d%3d  0\n", b.a, b.b, b.type);
            fs << buf;
        }
        fs << "M  END\n$$$$\n";

        // targets: smooth functions of composition with noise
        double nC = 0, nN = 0, nO = 0, nF = 0, nDouble = 0;
        for (int k : kind) {
            nC += k == 0;
            nN += k == 1;
            nO += k == 2;
            nF += k == 3;
        }
        for (const auto& b : bonds) nDouble += b.type == 2;
        int nH = (int)atoms.size() - nh;
        double mu = 0.4 * nO + 0.35 * nN + 0.5 * nF + 0.12 * nDouble +
                    o.noise * gauss(rng);
        double alpha = 0.9 * nC + 0.5 * nH + 0.7 * nN + 0.4 * nO +
                       3.0 * o.noise * gauss(rng);
        double homo = -0.24 + 0.01 * nN - 0.008 * nO + 0.004 * nDouble +
                      0.02 * o.noise * gauss(rng);
        double u0 = -40.0 * nC - 55.0 * nN - 75.0 * nO - 100.0 * nF - 0.6 * nH +
                    2.0 * o.noise * gauss(rng);
        ft << m << "," << mu << "," << alpha << "," << homo << "," << u0 << "\n";
    }
}

}  // namespace gnn::synth
