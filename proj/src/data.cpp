#include "gnn/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace gnn {

const std::vector<std::string> kQm9Elements = {"H", "C", "N", "O", "F"};
const std::vector<std::string> kQm9TargetNames = {"Mu", "Alpha", "Homo", "U0"};

double Dataset::mean_order() const {
    if (graphs.empty()) return 0.0;
    double s = 0;
    for (const auto& g : graphs) s += (double)g.order();
    return s / (double)graphs.size();
}

// ---- batching ----

DisjointBatch to_disjoint(const std::vector<Graph>& graphs) {
    if (graphs.empty()) throw ShapeError("to_disjoint: empty graph list");
    int64_t f = graphs[0].n_features();
    bool has_e = graphs[0].e.has_value();
    int64_t n_tot = 0, e_tot = 0;
    for (const auto& g : graphs) {
        if (g.n_features() != f) throw ShapeError("to_disjoint: feature widths differ");
        if (g.e.has_value() != has_e)
            throw ShapeError("to_disjoint: edge attributes present on some graphs only");
        n_tot += g.order();
        if (has_e) e_tot += g.a.nnz();
    }
    DisjointBatch b;
    b.n_graphs = (int)graphs.size();
    std::vector<SparseMatrix> as;
    as.reserve(graphs.size());
    for (const auto& g : graphs) as.push_back(g.a);
    auto bd = block_diagonal(as);
    b.a = std::move(bd.matrix);
    b.segment_ids = std::move(bd.segment_ids);
    b.x = Tensor({n_tot, f});
    int64_t row = 0;
    for (const auto& g : graphs) {
        std::copy(g.x.data(), g.x.data() + g.x.size(), b.x.data() + row * f);
        row += g.order();
    }
    if (has_e) {
        int64_t s = graphs[0].e->extent(1);
        Tensor e({e_tot, s});
        int64_t er = 0;
        for (const auto& g : graphs) {
            std::copy(g.e->data(), g.e->data() + g.e->size(), e.data() + er * s);
            er += g.a.nnz();
        }
        b.e = e;
    }
    return b;
}

DenseBatch to_dense(const std::vector<Graph>& graphs, int64_t n_max) {
    if (graphs.empty()) throw ShapeError("to_dense: empty graph list");
    int64_t f = graphs[0].n_features();
    if (n_max < 0)
        for (const auto& g : graphs) n_max = std::max(n_max, g.order());
    for (size_t i = 0; i < graphs.size(); ++i)
        if (graphs[i].order() > n_max)
            throw ShapeError("to_dense: graph " + std::to_string(i) + " has order " +
                             std::to_string(graphs[i].order()) + " > n_max " +
                             std::to_string(n_max));
    int64_t B = (int64_t)graphs.size();
    DenseBatch b;
    b.n_graphs = (int)B;
    b.n_max = n_max;
    b.a = Tensor({B, n_max, n_max});
    b.x = Tensor({B, n_max, f});
    b.mask.assign((size_t)(B * n_max), 0);
    for (int64_t s = 0; s < B; ++s) {
        const Graph& g = graphs[(size_t)s];
        int64_t n = g.order();
        Tensor ad = g.a.to_dense();
        for (int64_t i = 0; i < n; ++i) {
            std::copy(ad.data() + i * n, ad.data() + (i + 1) * n,
                      b.a.data() + (s * n_max + i) * n_max);
            std::copy(g.x.data() + i * f, g.x.data() + (i + 1) * f,
                      b.x.data() + (s * n_max + i) * f);
            b.mask[(size_t)(s * n_max + i)] = 1;
        }
    }
    return b;
}

Tensor mixed_mode_spmm(const SparseMatrix& a, const Tensor& x_batch) {
    if (x_batch.rank() != 3 || x_batch.extent(1) != a.n_cols())
        throw ShapeError("mixed_mode_spmm: X batch " + shape_str(x_batch.shape()) +
                         " incompatible with " + std::to_string(a.n_rows()) + "x" +
                         std::to_string(a.n_cols()) + " support");
    return spmm(a, x_batch);
}

// ---- splits ----

SplitMasks split_per_class(const std::vector<int>& labels, const std::vector<uint8_t>& labeled,
                           int n_classes, int train_per_class, int val_per_class,
                           uint64_t seed) {
    int64_t n = (int64_t)labels.size();
    SplitMasks m;
    m.train.assign((size_t)n, 0);
    m.val.assign((size_t)n, 0);
    m.test.assign((size_t)n, 0);
    Rng rng(seed);
    for (int c = 0; c < n_classes; ++c) {
        std::vector<int64_t> idx;
        for (int64_t i = 0; i < n; ++i)
            if (labeled[(size_t)i] && labels[(size_t)i] == c) idx.push_back(i);
        if ((int64_t)idx.size() < train_per_class + val_per_class)
            throw std::runtime_error("split_per_class: class " + std::to_string(c) +
                                     " has only " + std::to_string(idx.size()) +
                                     " labeled nodes");
        std::shuffle(idx.begin(), idx.end(), rng);
        for (size_t k = 0; k < idx.size(); ++k) {
            if ((int)k < train_per_class)
                m.train[(size_t)idx[k]] = 1;
            else if ((int)k < train_per_class + val_per_class)
                m.val[(size_t)idx[k]] = 1;
            else
                m.test[(size_t)idx[k]] = 1;
        }
    }
    return m;
}

SplitMasks split_fractions(int64_t n, double train_frac, double val_frac, uint64_t seed) {
    std::vector<int64_t> idx((size_t)n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    int64_t n_train = (int64_t)std::llround(train_frac * (double)n);
    int64_t n_val = (int64_t)std::llround(val_frac * (double)n);
    n_train = std::min(n_train, n);
    n_val = std::min(n_val, n - n_train);
    SplitMasks m;
    m.train.assign((size_t)n, 0);
    m.val.assign((size_t)n, 0);
    m.test.assign((size_t)n, 0);
    for (int64_t k = 0; k < n; ++k) {
        if (k < n_train)
            m.train[(size_t)idx[(size_t)k]] = 1;
        else if (k < n_train + n_val)
            m.val[(size_t)idx[(size_t)k]] = 1;
        else
            m.test[(size_t)idx[(size_t)k]] = 1;
    }
    return m;
}

// ---- parsing helpers ----

namespace {

std::vector<std::string> split_line(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == sep) {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::ifstream open_or_throw(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    return f;
}

}  // namespace

// ---- citation loader ----

Dataset load_citation(const std::string& dir, const std::string& name, bool row_normalize) {
    Dataset ds;
    ds.name = name;
    ds.task = TaskKind::NodeClassification;

    // features.csv fixes N and F
    std::vector<std::vector<double>> feats;
    {
        auto f = open_or_throw(dir + "/features.csv");
        std::string line;
        while (std::getline(f, line)) {
            if (trim(line).empty()) continue;
            auto cells = split_line(line, ',');
            std::vector<double> row;
            row.reserve(cells.size());
            for (auto& c : cells) row.push_back(std::stod(c));
            if (!feats.empty() && row.size() != feats[0].size())
                throw std::runtime_error("features.csv: ragged row " +
                                         std::to_string(feats.size()));
            feats.push_back(std::move(row));
        }
    }
    int64_t n = (int64_t)feats.size();
    int64_t fdim = n ? (int64_t)feats[0].size() : 0;

    std::vector<int64_t> er, ec;
    {
        auto f = open_or_throw(dir + "/edges.tsv");
        std::string line;
        int64_t lineno = 0;
        while (std::getline(f, line)) {
            ++lineno;
            if (trim(line).empty()) continue;
            auto cells = split_line(line, '\t');
            if (cells.size() < 2)
                throw std::runtime_error("edges.tsv:" + std::to_string(lineno) +
                                         ": expected two columns");
            int64_t u = std::stoll(cells[0]), v = std::stoll(cells[1]);
            if (u < 0 || u >= n || v < 0 || v >= n)
                throw std::runtime_error("edges.tsv:" + std::to_string(lineno) +
                                         ": node index out of range [0," +
                                         std::to_string(n) + ")");
            if (u == v) continue;
            er.push_back(u);
            ec.push_back(v);
            er.push_back(v);
            ec.push_back(u);
        }
    }

    Graph g;
    // duplicates collapse to a single binary entry
    g.a = SparseMatrix::from_coo(n, n, er, ec, std::vector<double>(er.size(), 1.0));
    g.a = g.a.with_values(std::vector<double>((size_t)g.a.nnz(), 1.0));

    g.x = Tensor({n, fdim});
    for (int64_t i = 0; i < n; ++i) {
        double s = 0;
        for (int64_t j = 0; j < fdim; ++j) s += feats[(size_t)i][(size_t)j];
        double inv = (row_normalize && s != 0) ? 1.0 / s : 1.0;
        for (int64_t j = 0; j < fdim; ++j)
            g.x.data()[i * fdim + j] = feats[(size_t)i][(size_t)j] * inv;
    }

    {
        auto f = open_or_throw(dir + "/labels.csv");
        std::string line;
        while (std::getline(f, line)) {
            if (trim(line).empty()) continue;
            auto cells = split_line(line, ',');
            ds.node_labels.push_back(std::stoi(cells[0]));
            ds.labeled.push_back(cells.size() > 1 ? (uint8_t)std::stoi(cells[1]) : 1);
        }
    }
    if ((int64_t)ds.node_labels.size() != n)
        throw std::runtime_error("labels.csv: " + std::to_string(ds.node_labels.size()) +
                                 " rows but features.csv has " + std::to_string(n));
    for (int l : ds.node_labels) ds.n_classes = std::max(ds.n_classes, l + 1);
    ds.graphs.push_back(std::move(g));
    return ds;
}

// ---- TU loader ----

Dataset load_tu(const std::string& dir, const std::string& name) {
    Dataset ds;
    ds.name = name;
    ds.task = TaskKind::GraphClassification;
    std::string base = dir + "/" + name;

    std::vector<int> indicator;  // node -> graph, 0-based after remap
    {
        std::ifstream f(base + "_graph_indicator.txt");
        if (!f)
            throw std::runtime_error("missing " + base + "_graph_indicator.txt");
        std::string line;
        while (std::getline(f, line)) {
            if (trim(line).empty()) continue;
            indicator.push_back(std::stoi(trim(line)) - 1);
        }
    }
    int64_t n_nodes = (int64_t)indicator.size();
    int n_graphs = indicator.empty() ? 0 : *std::max_element(indicator.begin(), indicator.end()) + 1;

    std::vector<int> graph_labels;
    {
        auto f = open_or_throw(base + "_graph_labels.txt");
        std::string line;
        while (std::getline(f, line)) {
            if (trim(line).empty()) continue;
            graph_labels.push_back(std::stoi(trim(line)));
        }
    }
    if ((int)graph_labels.size() != n_graphs)
        throw std::runtime_error(name + ": graph label count mismatch");
    // remap to contiguous 0-based classes
    std::vector<int> uniq = graph_labels;
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    for (auto& l : graph_labels)
        l = (int)(std::lower_bound(uniq.begin(), uniq.end(), l) - uniq.begin());
    ds.n_classes = (int)uniq.size();

    // optional node labels / attributes
    std::vector<int> node_labels;
    {
        std::ifstream f(base + "_node_labels.txt");
        if (f) {
            std::string line;
            while (std::getline(f, line)) {
                if (trim(line).empty()) continue;
                node_labels.push_back(std::stoi(trim(line)));
            }
            if ((int64_t)node_labels.size() != n_nodes)
                throw std::runtime_error(name + ": node label count mismatch");
        }
    }
    std::vector<std::vector<double>> node_attrs;
    {
        std::ifstream f(base + "_node_attributes.txt");
        if (f) {
            std::string line;
            while (std::getline(f, line)) {
                if (trim(line).empty()) continue;
                auto cells = split_line(line, ',');
                std::vector<double> row;
                for (auto& c : cells) row.push_back(std::stod(trim(c)));
                node_attrs.push_back(std::move(row));
            }
            if ((int64_t)node_attrs.size() != n_nodes)
                throw std::runtime_error(name + ": node attribute count mismatch");
        }
    }

    // per-graph node ranges (TU nodes are grouped by graph)
    std::vector<int64_t> first_node((size_t)n_graphs + 1, 0);
    for (int64_t i = 0; i < n_nodes; ++i) first_node[(size_t)indicator[(size_t)i] + 1] += 1;
    for (int g = 0; g < n_graphs; ++g) first_node[(size_t)g + 1] += first_node[(size_t)g];

    std::vector<std::vector<int64_t>> ger((size_t)n_graphs), gec((size_t)n_graphs);
    {
        auto f = open_or_throw(base + "_A.txt");
        std::string line;
        int64_t lineno = 0;
        while (std::getline(f, line)) {
            ++lineno;
            if (trim(line).empty()) continue;
            auto cells = split_line(line, ',');
            if (cells.size() < 2)
                throw std::runtime_error(name + "_A.txt:" + std::to_string(lineno) +
                                         ": expected two columns");
            int64_t u = std::stoll(trim(cells[0])) - 1;
            int64_t v = std::stoll(trim(cells[1])) - 1;
            if (u < 0 || u >= n_nodes || v < 0 || v >= n_nodes)
                throw std::runtime_error(name + "_A.txt:" + std::to_string(lineno) +
                                         ": node index out of range");
            int gu = indicator[(size_t)u], gv = indicator[(size_t)v];
            if (gu != gv)
                throw std::runtime_error(name + "_A.txt:" + std::to_string(lineno) +
                                         ": edge joins graphs " + std::to_string(gu + 1) +
                                         " and " + std::to_string(gv + 1));
            ger[(size_t)gu].push_back(u - first_node[(size_t)gu]);
            gec[(size_t)gu].push_back(v - first_node[(size_t)gu]);
        }
    }

    int max_node_label = 0;
    for (int l : node_labels) max_node_label = std::max(max_node_label, l);
    int64_t fdim = !node_attrs.empty() ? (int64_t)node_attrs[0].size()
                   : !node_labels.empty() ? (int64_t)max_node_label + 1
                                          : 1;

    for (int gi = 0; gi < n_graphs; ++gi) {
        int64_t n = first_node[(size_t)gi + 1] - first_node[(size_t)gi];
        Graph g;
        g.a = SparseMatrix::from_coo(n, n, ger[(size_t)gi], gec[(size_t)gi],
                                     std::vector<double>(ger[(size_t)gi].size(), 1.0));
        g.a = g.a.with_values(std::vector<double>((size_t)g.a.nnz(), 1.0));
        g.x = Tensor({n, fdim});
        for (int64_t i = 0; i < n; ++i) {
            int64_t node = first_node[(size_t)gi] + i;
            if (!node_attrs.empty())
                for (int64_t j = 0; j < fdim; ++j)
                    g.x.data()[i * fdim + j] = node_attrs[(size_t)node][(size_t)j];
            else if (!node_labels.empty())
                g.x.data()[i * fdim + node_labels[(size_t)node]] = 1.0;
            else
                g.x.data()[i * fdim] = 1.0;  // featureless datasets get a constant
        }
        g.y = {(double)graph_labels[(size_t)gi]};
        ds.graphs.push_back(std::move(g));
    }
    return ds;
}

// ---- QM9 SDF loader ----

namespace {

struct MolRecord {
    std::vector<std::string> elements;
    std::vector<std::tuple<int, int, int>> bonds;  // (a, b, type) 0-based
};

// Parses one V2000 connection table starting after the 3 header lines.
MolRecord parse_v2000(const std::vector<std::string>& lines, int64_t record_index) {
    if (lines.size() < 4)
        throw std::runtime_error("sdf record " + std::to_string(record_index) +
                                 ": truncated header");
    const std::string& counts = lines[3];
    int n_atoms = 0, n_bonds = 0;
    try {
        n_atoms = std::stoi(counts.substr(0, 3));
        n_bonds = std::stoi(counts.substr(3, 3));
    } catch (const std::exception&) {
        throw std::runtime_error("sdf record " + std::to_string(record_index) +
                                 ": malformed counts line '" + counts + "'");
    }
    if ((int64_t)lines.size() < 4 + n_atoms + n_bonds)
        throw std::runtime_error("sdf record " + std::to_string(record_index) +
                                 ": truncated atom/bond block");
    MolRecord mol;
    for (int i = 0; i < n_atoms; ++i) {
        const std::string& l = lines[(size_t)(4 + i)];
        if (l.size() < 34)
            throw std::runtime_error("sdf record " + std::to_string(record_index) +
                                     ": short atom line");
        mol.elements.push_back(trim(l.substr(31, 3)));
    }
    for (int i = 0; i < n_bonds; ++i) {
        const std::string& l = lines[(size_t)(4 + n_atoms + i)];
        if (l.size() < 9)
            throw std::runtime_error("sdf record " + std::to_string(record_index) +
                                     ": short bond line");
        int a = std::stoi(l.substr(0, 3)) - 1;
        int b = std::stoi(l.substr(3, 3)) - 1;
        int t = std::stoi(l.substr(6, 3));
        if (a < 0 || a >= n_atoms || b < 0 || b >= n_atoms)
            throw std::runtime_error("sdf record " + std::to_string(record_index) +
                                     ": bond references missing atom");
        mol.bonds.emplace_back(a, b, t);
    }
    return mol;
}

}  // namespace

Dataset load_qm9_sdf(const std::string& sdf_path, const std::string& targets_path,
                     int64_t limit, Qm9LoadStats* stats) {
    Dataset ds;
    ds.name = "qm9";
    ds.task = TaskKind::GraphRegression;
    ds.n_targets = (int)kQm9TargetNames.size();

    // target table keyed by record index
    std::vector<std::vector<double>> targets;
    {
        auto f = open_or_throw(targets_path);
        std::string line;
        bool first = true;
        while (std::getline(f, line)) {
            line = trim(line);
            if (line.empty()) continue;
            if (first && line.find("Mu") != std::string::npos) {
                first = false;
                continue;  // header
            }
            first = false;
            auto cells = split_line(line, ',');
            if (cells.size() < 5)
                throw std::runtime_error("targets.csv: expected 5 columns, got " +
                                         std::to_string(cells.size()));
            std::vector<double> row;
            for (size_t j = 1; j < 5; ++j) row.push_back(std::stod(cells[j]));
            targets.push_back(std::move(row));
        }
    }

    Qm9LoadStats local;
    auto f = open_or_throw(sdf_path);
    std::string line;
    std::vector<std::string> record;
    int64_t record_index = 0;
    int64_t f_dim = (int64_t)kQm9Elements.size();

    auto flush = [&]() {
        if (record.empty()) return;
        if (limit >= 0 && (int64_t)ds.graphs.size() >= limit) {
            record.clear();
            return;
        }
        MolRecord mol = parse_v2000(record, record_index);
        record.clear();
        int64_t idx = record_index++;

        int64_t n = (int64_t)mol.elements.size();
        Tensor x({n, f_dim});
        for (int64_t i = 0; i < n; ++i) {
            auto it = std::find(kQm9Elements.begin(), kQm9Elements.end(),
                                mol.elements[(size_t)i]);
            if (it == kQm9Elements.end()) {
                ++local.skipped_unknown_element;
                return;
            }
            x.data()[i * f_dim + (it - kQm9Elements.begin())] = 1.0;
        }
        std::vector<int64_t> er, ec;
        std::vector<int> bt;
        for (auto [a, b, t] : mol.bonds) {
            if (t < 1 || t > kQm9BondTypes) t = 1;
            er.push_back(a);
            ec.push_back(b);
            bt.push_back(t - 1);
            er.push_back(b);
            ec.push_back(a);
            bt.push_back(t - 1);
        }
        Graph g;
        g.x = x;
        g.a = SparseMatrix::from_coo(n, n, er, ec, std::vector<double>(er.size(), 1.0));
        // edge attrs aligned with CSR order
        Tensor e({g.a.nnz(), (int64_t)kQm9BondTypes});
        auto rows = g.a.edge_rows();
        const auto& cols = g.a.col_idx();
        for (int64_t k = 0; k < g.a.nnz(); ++k) {
            // find the bond matching this CSR entry
            for (size_t q = 0; q < er.size(); ++q)
                if (er[q] == rows[(size_t)k] && ec[q] == cols[(size_t)k]) {
                    e.data()[k * kQm9BondTypes + bt[q]] = 1.0;
                    break;
                }
        }
        g.e = e;
        if ((size_t)idx >= targets.size())
            throw std::runtime_error("sdf record " + std::to_string(idx) +
                                     ": no matching row in targets.csv");
        g.y = targets[(size_t)idx];
        ds.graphs.push_back(std::move(g));
    };

    while (std::getline(f, line)) {
        std::string t = trim(line);
        if (t == "$$$$") {
            flush();
        } else {
            record.push_back(line);
        }
    }
    flush();
    if (stats) *stats = local;
    return ds;
}

}  // namespace gnn
