#include "gnn/models.hpp"

#include <cmath>

namespace gnn {

// ---- losses / metrics ----

Tensor masked_cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                            const std::vector<uint8_t>& mask) {
    std::vector<int> rows;
    for (size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) rows.push_back((int)i);
    if (rows.empty()) throw std::runtime_error("cross entropy: empty mask");
    Tensor sel = gather(logits, rows);  // (M, C)
    Tensor logp = log_op(add_scalar(softmax(sel), 1e-12));
    int64_t c = logits.extent(1);
    std::vector<uint8_t> pick((size_t)((int64_t)rows.size() * c), 0);
    for (size_t k = 0; k < rows.size(); ++k)
        pick[k * (size_t)c + (size_t)labels[(size_t)rows[k]]] = 1;
    Tensor picked = masked_fill(logp, pick, 0.0);
    return scale(reduce_sum(picked), -1.0 / (double)rows.size());
}

double masked_accuracy(const Tensor& logits, const std::vector<int>& labels,
                       const std::vector<uint8_t>& mask) {
    int64_t c = logits.extent(1);
    int64_t correct = 0, total = 0;
    for (size_t i = 0; i < mask.size(); ++i) {
        if (!mask[i]) continue;
        const double* row = logits.data() + (int64_t)i * c;
        int best = 0;
        for (int j = 1; j < c; ++j)
            if (row[j] > row[best]) best = j;
        correct += best == labels[i];
        ++total;
    }
    return total ? (double)correct / (double)total : 0.0;
}

Tensor graph_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
    std::vector<uint8_t> mask(labels.size(), 1);
    return masked_cross_entropy(logits, labels, mask);
}

double graph_accuracy(const Tensor& logits, const std::vector<int>& labels) {
    std::vector<uint8_t> mask(labels.size(), 1);
    return masked_accuracy(logits, labels, mask);
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
    return reduce_mean(square(sub(pred, target)));
}

// ---- NodeModel ----

NodeModel::Hyper NodeModel::defaults(const std::string& model) {
    Hyper h;
    if (model == "gcn") {
        h = {0.01, 5e-4, 0.5, 0.0, 200, 10};
    } else if (model == "cheb") {
        h = {0.01, 5e-4, 0.5, 0.0, 200, 10};
    } else if (model == "gat") {
        h = {0.005, 5e-4, 0.6, 0.0, 200, 20};
    } else if (model == "arma") {
        h = {0.01, 5e-4, 0.5, 0.75, 200, 15};
    } else if (model == "appnp") {
        h = {0.01, 5e-4, 0.5, 0.0, 200, 15};
    } else {
        throw std::runtime_error("unknown node model '" + model + "'");
    }
    return h;
}

NodeModel::NodeModel(const std::string& model, int64_t f_in, int n_classes, Rng& rng)
    : kind_(model), hyper_(defaults(model)) {
    if (model == "gcn") {
        gcn1_ = std::make_unique<GcnConv>("gcn1", f_in, 16, Activation::Relu, rng);
        gcn2_ = std::make_unique<GcnConv>("gcn2", 16, n_classes, Activation::Linear, rng);
    } else if (model == "cheb") {
        cheb1_ = std::make_unique<ChebConv>("cheb1", f_in, 16, 3, Activation::Relu, rng);
        cheb2_ = std::make_unique<ChebConv>("cheb2", 16, n_classes, 3, Activation::Linear, rng);
    } else if (model == "gat") {
        gat1_ = std::make_unique<GatConv>("gat1", f_in, 8, 8, true, Activation::Relu, rng);
        gat2_ = std::make_unique<GatConv>("gat2", 64, n_classes, 1, true,
                                          Activation::Linear, rng);
    } else if (model == "arma") {
        arma1_ = std::make_unique<ArmaConv>("arma1", f_in, 16, 2, 1, Activation::Relu, rng);
        arma2_ = std::make_unique<ArmaConv>("arma2", 16, n_classes, 2, 1,
                                            Activation::Linear, rng);
    } else {
        appnp_ = std::make_unique<AppnpConv>("appnp", f_in, 64, n_classes, 0.1, 10,
                                             Activation::Linear, rng);
    }
}

Tensor NodeModel::forward(const SparseMatrix& a, const Tensor& x, bool training,
                          Rng& rng) const {
    double dr = hyper_.dropout;
    if (gcn1_) {
        SparseMatrix a_hat = gcn_filter(a);
        Tensor h = dropout(x, dr, training, rng);
        h = gcn1_->forward(a_hat, h);
        h = dropout(h, dr, training, rng);
        return gcn2_->forward(a_hat, h);
    }
    if (cheb1_) {
        SparseMatrix lt = rescaled_laplacian(a);
        Tensor h = dropout(x, dr, training, rng);
        h = cheb1_->forward(lt, h);
        h = dropout(h, dr, training, rng);
        return cheb2_->forward(lt, h);
    }
    if (gat1_) {
        Tensor h = dropout(x, dr, training, rng);
        h = gat1_->forward(a, h, dr, training, &rng);
        h = dropout(h, dr, training, rng);
        return gat2_->forward(a, h, dr, training, &rng);
    }
    if (arma1_) {
        SparseMatrix l_hat = sym_normalized_adjacency(a);
        SparseMatrix prop = l_hat;
        if (training && hyper_.edge_dropout > 0) {
            std::uniform_real_distribution<double> dist(0.0, 1.0);
            std::vector<double> vals = l_hat.values();
            for (auto& v : vals)
                v = dist(rng) >= hyper_.edge_dropout ? v / (1.0 - hyper_.edge_dropout)
                                                     : 0.0;
            prop = l_hat.with_values(std::move(vals));
        }
        Tensor h = dropout(x, dr, training, rng);
        h = arma1_->forward(prop, h);
        h = dropout(h, dr, training, rng);
        return arma2_->forward(prop, h);
    }
    SparseMatrix a_hat = gcn_filter(a);
    return appnp_->forward(a_hat, x, dr, 0.0, training, &rng);
}

std::vector<Param> NodeModel::params() const {
    std::vector<Param> p;
    auto app = [&](const std::vector<Param>& q) { p.insert(p.end(), q.begin(), q.end()); };
    if (gcn1_) {
        app(gcn1_->params());
        app(gcn2_->params());
    } else if (cheb1_) {
        app(cheb1_->params());
        app(cheb2_->params());
    } else if (gat1_) {
        app(gat1_->params());
        app(gat2_->params());
    } else if (arma1_) {
        app(arma1_->params());
        app(arma2_->params());
    } else {
        app(appnp_->params());
    }
    return p;
}

// L2 is applied to first-layer weights only, matching the original
// citation-network setups.
std::vector<Param> NodeModel::l2_params() const {
    if (gcn1_) return gcn1_->params();
    if (cheb1_) return cheb1_->params();
    if (gat1_) return gat1_->params();
    if (arma1_) return arma1_->params();
    auto p = appnp_->params();
    return {p.begin(), p.begin() + 2};  // first MLP layer
}

// ---- GraphClassModel ----

GraphClassModel::GraphClassModel(const std::string& pooling, int64_t f_in, int n_classes,
                                 int64_t k1, int64_t k2, Rng& rng, int64_t channels)
    : pooling_(pooling), channels_(channels) {
    bool diff = pooling == "diffpool";
    if (!diff) {
        gcs1_ = std::make_unique<GcsConv>("gcs1", f_in, channels, Activation::Relu, rng);
        gcs2_ = std::make_unique<GcsConv>("gcs2", channels, channels, Activation::Relu, rng);
    }
    gcs3_ = std::make_unique<GcsConv>("gcs3", diff ? channels : channels, channels,
                                      Activation::Relu, rng);
    if (pooling == "topk") {
        topk1_ = std::make_unique<TopKPool>("pool1", channels, 0.5, rng);
        topk2_ = std::make_unique<TopKPool>("pool2", channels, 0.5, rng);
    } else if (pooling == "sagpool") {
        sag1_ = std::make_unique<SagPool>("pool1", channels, 0.5, rng);
        sag2_ = std::make_unique<SagPool>("pool2", channels, 0.5, rng);
    } else if (pooling == "mincut") {
        mincut1_ = std::make_unique<MinCutPool>("pool1", channels, 16, k1, rng);
        mincut2_ = std::make_unique<MinCutPool>("pool2", channels, 16, k2, rng);
    } else if (pooling == "diffpool") {
        diff1_ = std::make_unique<DiffPool>("pool1", f_in, channels, k1, rng);
        diff2_ = std::make_unique<DiffPool>("pool2", channels, channels, k2, rng);
    } else if (pooling != "flat") {
        throw std::runtime_error("unknown pooling '" + pooling + "'");
    }
    out_ = DenseLayer("out", channels, n_classes, Activation::Linear, rng);
}

Tensor GraphClassModel::forward_disjoint(const DisjointBatch& batch,
                                         std::map<std::string, Tensor>* aux) const {
    if (dense_mode())
        throw UnsupportedMode(pooling_ + " pooling runs in dense-batch mode only; "
                              "disjoint input is not supported");
    SparseMatrix a = batch.a;
    std::vector<int> seg = batch.segment_ids;
    Tensor h = gcs1_->forward(sym_normalized_adjacency(a), batch.x);

    auto pool = [&](int which) {
        PoolResult r;
        if (topk1_) {
            r = (which == 0 ? topk1_ : topk2_)->forward(a, h, seg, batch.n_graphs);
        } else if (sag1_) {
            r = (which == 0 ? sag1_ : sag2_)->forward(a, h, seg, batch.n_graphs);
        } else {
            return;  // flat
        }
        h = r.x;
        a = *r.a_sparse;
        seg = r.segment_ids;
        if (aux)
            for (auto& [k, v] : r.auxiliary_losses)
                (*aux)["pool" + std::to_string(which + 1) + "." + k] = v;
    };

    pool(0);
    h = gcs2_->forward(sym_normalized_adjacency(a), h);
    pool(1);
    h = gcs3_->forward(sym_normalized_adjacency(a), h);
    Tensor pooled = global_pool(h, seg, batch.n_graphs, GlobalPoolKind::Sum);
    return out_.forward(pooled);
}

Tensor GraphClassModel::forward_dense(const DenseBatch& batch,
                                      std::map<std::string, Tensor>* aux) const {
    if (!dense_mode())
        throw UnsupportedMode(pooling_ + " pooling runs in single/disjoint mode only; "
                              "dense input is not supported");
    int64_t B = batch.x.extent(0);
    auto take_aux = [&](const PoolResult& r, int which) {
        if (aux)
            for (auto& [k, v] : r.auxiliary_losses)
                (*aux)["pool" + std::to_string(which) + "." + k] = v;
    };

    Tensor h, a;
    if (diff1_) {
        PoolResult r1 = diff1_->forward(batch.a, batch.x, batch.mask);
        take_aux(r1, 1);
        std::vector<uint8_t> full((size_t)(B * diff1_->k_out()), 1);
        PoolResult r2 = diff2_->forward(*r1.a_dense, r1.x, full);
        take_aux(r2, 2);
        h = r2.x;
        a = *r2.a_dense;
    } else {
        h = gcs1_->forward_dense(sym_normalized_adjacency_dense(batch.a), batch.x);
        PoolResult r1 = mincut1_->forward(batch.a, h, batch.mask);
        take_aux(r1, 1);
        h = gcs2_->forward_dense(*r1.a_dense, r1.x);
        std::vector<uint8_t> full((size_t)(B * mincut1_->k_out()), 1);
        PoolResult r2 = mincut2_->forward(*r1.a_dense, h, full);
        take_aux(r2, 2);
        h = r2.x;
        a = *r2.a_dense;
    }
    h = gcs3_->forward_dense(a, h);
    Tensor pooled = reduce_sum(h, 1);  // every cluster is real: plain sum
    return out_.forward(pooled);
}

std::vector<Param> GraphClassModel::params() const {
    std::vector<Param> p;
    auto app = [&](const std::vector<Param>& q) { p.insert(p.end(), q.begin(), q.end()); };
    if (gcs1_) app(gcs1_->params());
    if (gcs2_) app(gcs2_->params());
    app(gcs3_->params());
    if (topk1_) {
        app(topk1_->params());
        app(topk2_->params());
    }
    if (sag1_) {
        app(sag1_->params());
        app(sag2_->params());
    }
    if (mincut1_) {
        app(mincut1_->params());
        app(mincut2_->params());
    }
    if (diff1_) {
        app(diff1_->params());
        app(diff2_->params());
    }
    app(out_.params());
    return p;
}

std::vector<Param> GraphClassModel::l2_params() const { return params(); }

// ---- GraphRegModel ----

GraphRegModel::GraphRegModel(const std::string& global_pool, int64_t f_in,
                             int64_t edge_dim, int n_targets, Rng& rng, int64_t channels)
    : pool_(global_pool) {
    ecc1_ = std::make_unique<EccConv>("ecc1", f_in, channels, edge_dim, 32,
                                      Activation::Relu, rng);
    ecc2_ = std::make_unique<EccConv>("ecc2", channels, channels, edge_dim, 32,
                                      Activation::Relu, rng);
    int64_t pooled_width = channels;
    if (pool_ == "gap") {
        gap_ = std::make_unique<GapGlobalPool>("gap", channels, 32, rng);
        pooled_width = 32;
    } else if (pool_ == "awsp") {
        awsp_ = std::make_unique<AwspGlobalPool>("awsp", channels, rng);
    } else if (pool_ != "sum" && pool_ != "average" && pool_ != "max") {
        throw std::runtime_error("unknown global pooling '" + pool_ + "'");
    }
    out_ = DenseLayer("out", pooled_width, n_targets, Activation::Linear, rng);
}

Tensor GraphRegModel::forward(const DisjointBatch& batch) const {
    if (!batch.e)
        throw std::runtime_error("graph regression model requires edge attributes");
    Tensor h = ecc1_->forward(batch.a, batch.x, *batch.e);
    h = ecc2_->forward(batch.a, h, *batch.e);
    Tensor pooled;
    if (gap_)
        pooled = gap_->forward(h, batch.segment_ids, batch.n_graphs);
    else if (awsp_)
        pooled = awsp_->forward(h, batch.segment_ids, batch.n_graphs);
    else if (pool_ == "sum")
        pooled = global_pool(h, batch.segment_ids, batch.n_graphs, GlobalPoolKind::Sum);
    else if (pool_ == "average")
        pooled = global_pool(h, batch.segment_ids, batch.n_graphs, GlobalPoolKind::Average);
    else
        pooled = global_pool(h, batch.segment_ids, batch.n_graphs, GlobalPoolKind::Max);
    return out_.forward(pooled);
}

std::vector<Param> GraphRegModel::params() const {
    std::vector<Param> p = ecc1_->params();
    auto app = [&](const std::vector<Param>& q) { p.insert(p.end(), q.begin(), q.end()); };
    app(ecc2_->params());
    if (gap_) app(gap_->params());
    if (awsp_) app(awsp_->params());
    app(out_.params());
    return p;
}

}  // namespace gnn
