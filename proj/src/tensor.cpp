#include "gnn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

namespace gnn {

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ")";
    return os.str();
}

static int64_t shape_size(const Shape& s) {
    int64_t n = 1;
    for (auto e : s) n *= e;
    return n;
}

Tensor::Tensor(Shape shape, double fill) : d_(std::make_shared<Data>()) {
    d_->shape = std::move(shape);
    d_->values.assign((size_t)shape_size(d_->shape), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values) : d_(std::make_shared<Data>()) {
    if (shape_size(shape) != (int64_t)values.size())
        throw ShapeError("tensor: " + shape_str(shape) + " does not hold " +
                         std::to_string(values.size()) + " values");
    d_->shape = std::move(shape);
    d_->values = std::move(values);
}

int64_t Tensor::extent(int axis) const {
    if (axis < 0) axis += (int)d_->shape.size();
    return d_->shape[(size_t)axis];
}

double Tensor::item() const {
    if (size() != 1) throw ShapeError("item() on non-scalar tensor " + shape_str(shape()));
    return d_->values[0];
}

double& Tensor::at(std::initializer_list<int64_t> idx) {
    int64_t off = 0;
    size_t k = 0;
    for (auto i : idx) {
        off = off * d_->shape[k] + i;
        ++k;
    }
    return d_->values[(size_t)off];
}

double Tensor::at(std::initializer_list<int64_t> idx) const {
    return const_cast<Tensor*>(this)->at(idx);
}

Tensor Tensor::clone() const {
    Tensor t(d_->shape, d_->values);
    t.d_->requires_grad = d_->requires_grad;
    return t;
}

bool Tensor::all_finite() const {
    for (double v : d_->values)
        if (!std::isfinite(v)) return false;
    return true;
}

int Tensor::node_id(const Tape& tape) const {
    if (!d_ || d_->tape_epoch != tape.epoch()) return -1;
    return d_->node_id;
}

void Tensor::bind(const Tape& tape, int id) const {
    d_->tape_epoch = tape.epoch();
    d_->node_id = id;
}

// ---- Tape ----

static thread_local Tape* g_active_tape = nullptr;
// Epochs are globally unique so node ids bound to one tape can never be
// mistaken for ids on another tape instance.
static thread_local uint64_t g_tape_epoch = 0;

Tape::Tape() {
    epoch_ = ++g_tape_epoch;
    prev_active_ = g_active_tape;
    g_active_tape = this;
}

Tape::~Tape() { g_active_tape = prev_active_; }

Tape* Tape::active() { return g_active_tape; }

void Tape::reset() {
    epoch_ = ++g_tape_epoch;
    ops_.clear();
    leaves_.clear();
    leaf_ids_.clear();
    grads_.clear();
    next_id_ = 0;
}

int Tape::track(const Tensor& t) {
    int id = t.node_id(*this);
    if (id >= 0) return id;
    id = next_id_++;
    t.bind(*this, id);
    if (t.requires_grad()) {
        leaves_.push_back(t);
        leaf_ids_.push_back(id);
    }
    return id;
}

bool Tape::is_leaf(int node_id) const {
    return std::find(leaf_ids_.begin(), leaf_ids_.end(), node_id) != leaf_ids_.end();
}

void Tape::record(std::vector<int> input_ids, int output_id, BackwardFn backward) {
    ops_.push_back(Op{std::move(input_ids), output_id, std::move(backward)});
}

void Tape::accumulate(int node_id, const Tensor& grad) {
    if (node_id < 0) return;
    if ((size_t)node_id >= grads_.size()) grads_.resize((size_t)node_id + 1);
    auto& slot = grads_[(size_t)node_id];
    if (!slot) {
        slot = grad.clone();
        slot->set_requires_grad(false);
    } else {
        if (slot->shape() != grad.shape())
            throw ShapeError("gradient accumulation shape mismatch " +
                             shape_str(slot->shape()) + " vs " + shape_str(grad.shape()));
        double* dst = slot->data();
        const double* src = grad.data();
        for (int64_t i = 0; i < grad.size(); ++i) dst[i] += src[i];
    }
}

const Tensor* Tape::grad_of(int node_id) const {
    if (node_id < 0 || (size_t)node_id >= grads_.size() || !grads_[(size_t)node_id])
        return nullptr;
    return &*grads_[(size_t)node_id];
}

std::unordered_map<int, Tensor> Tape::backward(const Tensor& loss) {
    if (loss.size() != 1)
        throw ShapeError("backward: loss must be scalar, got " + shape_str(loss.shape()));
    if (ops_.empty()) throw std::runtime_error("backward: empty tape");
    grads_.clear();
    int loss_id = loss.node_id(*this);
    if (loss_id < 0) throw std::runtime_error("backward: loss not recorded on this tape");
    accumulate(loss_id, Tensor(loss.shape(), 1.0));
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
        const Tensor* g = grad_of(it->output);
        if (!g) continue;
        it->backward(*g, *this);
    }
    std::unordered_map<int, Tensor> out;
    for (size_t i = 0; i < leaf_ids_.size(); ++i) {
        int id = leaf_ids_[i];
        const Tensor* g = grad_of(id);
        out.emplace(id, g ? g->clone() : Tensor::zeros_like(leaves_[i]));
    }
    return out;
}

// ---- op helpers ----

namespace {

struct Recorder {
    Tape* tape;
    std::vector<int> in_ids;
    Recorder(std::initializer_list<const Tensor*> inputs) {
        tape = Tape::active();
        if (!tape) return;
        for (auto* t : inputs) in_ids.push_back(tape->track(*t));
    }
    void done(const Tensor& out, Tape::BackwardFn fn) {
        if (!tape) return;
        int out_id = tape->track(out);
        tape->record(in_ids, out_id, std::move(fn));
    }
};

void check(bool ok, const std::string& msg) {
    if (!ok) throw ShapeError(msg);
}

}  // namespace

// ---- matmul ----

// inner kernel: C(n x m) += A(n x k) * B(k x m), row-major, skips zero A
// entries (graph features are often sparse).
static void mm_acc(const double* A, const double* B, double* C, int64_t n, int64_t k,
                   int64_t m) {
    for (int64_t i = 0; i < n; ++i) {
        const double* a = A + i * k;
        double* c = C + i * m;
        for (int64_t p = 0; p < k; ++p) {
            double av = a[p];
            if (av == 0.0) continue;
            const double* b = B + p * m;
            for (int64_t j = 0; j < m; ++j) c[j] += av * b[j];
        }
    }
}

// C(n x m) += A^T(k x n)^T... i.e. C = A^T * B with A (k x n), B (k x m)
static void mm_at_b(const double* A, const double* B, double* C, int64_t k, int64_t n,
                    int64_t m) {
    for (int64_t p = 0; p < k; ++p) {
        const double* a = A + p * n;
        const double* b = B + p * m;
        for (int64_t i = 0; i < n; ++i) {
            double av = a[i];
            if (av == 0.0) continue;
            double* c = C + i * m;
            for (int64_t j = 0; j < m; ++j) c[j] += av * b[j];
        }
    }
}

// C(n x k) += A(n x m) * B^T with B (k x m)
static void mm_a_bt(const double* A, const double* B, double* C, int64_t n, int64_t m,
                    int64_t k) {
    for (int64_t i = 0; i < n; ++i) {
        const double* a = A + i * m;
        double* c = C + i * k;
        for (int64_t p = 0; p < k; ++p) {
            const double* b = B + p * m;
            double s = 0.0;
            for (int64_t j = 0; j < m; ++j) s += a[j] * b[j];
            c[p] += s;
        }
    }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    check(a.rank() >= 2 && b.rank() >= 2 && a.rank() <= 3 && b.rank() <= 3,
          "matmul: ranks must be 2 or 3, got " + shape_str(a.shape()) + " x " +
              shape_str(b.shape()));
    int64_t ak = a.extent(-1), bk = b.extent(-2);
    check(ak == bk, "matmul: inner extents differ " + shape_str(a.shape()) + " x " +
                        shape_str(b.shape()));
    if (b.rank() == 3) check(a.rank() == 3 && a.extent(0) == b.extent(0),
                             "matmul: batch extents differ " + shape_str(a.shape()) +
                                 " x " + shape_str(b.shape()));

    int64_t B = a.rank() == 3 ? a.extent(0) : 1;
    int64_t n = a.extent(-2), k = ak, m = b.extent(-1);
    Shape out_shape = a.rank() == 3 ? Shape{B, n, m} : Shape{n, m};
    Tensor out(out_shape);
    bool b_batched = b.rank() == 3;
    for (int64_t s = 0; s < B; ++s)
        mm_acc(a.data() + s * n * k, b.data() + (b_batched ? s * k * m : 0),
               out.data() + s * n * m, n, k, m);

    Recorder rec{&a, &b};
    rec.done(out, [=](const Tensor& g, Tape& t) {
        // dA = g * B^T ; dB = A^T * g
        Tensor da(a.shape()), db(b.shape());
        for (int64_t s = 0; s < B; ++s) {
            const double* gp = g.data() + s * n * m;
            mm_a_bt(gp, b.data() + (b_batched ? s * k * m : 0), da.data() + s * n * k, n,
                    m, k);
            mm_at_b(a.data() + s * n * k, gp, db.data() + (b_batched ? s * k * m : 0), n,
                    k, m);
        }
        t.accumulate(rec.in_ids[0], da);
        t.accumulate(rec.in_ids[1], db);
    });
    return out;
}

// ---- add / sub / mul ----

// b broadcast: either same shape, or b's shape equals a trailing suffix
// of a's shape (leading-axis expansion; covers bias rows).
static bool suffix_broadcast(const Shape& a, const Shape& b) {
    if (b.size() > a.size()) return false;
    size_t off = a.size() - b.size();
    for (size_t i = 0; i < b.size(); ++i) {
        int64_t be = b[i];
        if (be != a[off + i] && !(i == 0 && be == 1)) return false;
    }
    return true;
}

Tensor add(const Tensor& a, const Tensor& b) {
    check(suffix_broadcast(a.shape(), b.shape()),
          "add: cannot broadcast " + shape_str(b.shape()) + " onto " + shape_str(a.shape()));
    int64_t nb = b.size();
    Tensor out(a.shape());
    const double* ap = a.data();
    const double* bp = b.data();
    double* op = out.data();
    for (int64_t i = 0; i < a.size(); ++i) op[i] = ap[i] + bp[i % nb];

    Recorder rec{&a, &b};
    rec.done(out, [=](const Tensor& g, Tape& t) {
        t.accumulate(rec.in_ids[0], g);
        Tensor db(b.shape());
        double* dbp = db.data();
        const double* gp = g.data();
        for (int64_t i = 0; i < g.size(); ++i) dbp[i % nb] += gp[i];
        t.accumulate(rec.in_ids[1], db);
    });
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) { return add(a, scale(b, -1.0)); }

Tensor mul(const Tensor& a, const Tensor& b) {
    // same shape, scalar b, or per-row scaling b = (N,1) against (N,F)
    enum Mode { SAME, SCALAR, ROW } mode;
    if (a.shape() == b.shape())
        mode = SAME;
    else if (b.size() == 1)
        mode = SCALAR;
    else if (a.rank() == 2 && b.rank() == 2 && b.extent(1) == 1 && b.extent(0) == a.extent(0))
        mode = ROW;
    else
        throw ShapeError("mul: incompatible shapes " + shape_str(a.shape()) + " * " +
                         shape_str(b.shape()));

    int64_t F = a.rank() >= 1 ? a.extent(-1) : 1;
    Tensor out(a.shape());
    const double* ap = a.data();
    const double* bp = b.data();
    double* op = out.data();
    auto bval = [bp, mode, F](int64_t i) {
        if (mode == SAME) return bp[i];
        if (mode == SCALAR) return bp[0];
        return bp[i / F];
    };
    for (int64_t i = 0; i < a.size(); ++i) op[i] = ap[i] * bval(i);

    Recorder rec{&a, &b};
    rec.done(out, [=](const Tensor& g, Tape& t) {
        Tensor da(a.shape());
        Tensor db(b.shape());
        const double* gp = g.data();
        double* dap = da.data();
        double* dbp = db.data();
        for (int64_t i = 0; i < g.size(); ++i) {
            dap[i] = gp[i] * bval(i);
            int64_t bi = mode == SAME ? i : (mode == SCALAR ? 0 : i / F);
            dbp[bi] += gp[i] * ap[i];
        }
        t.accumulate(rec.in_ids[0], da);
        t.accumulate(rec.in_ids[1], db);
    });
    return out;
}

Tensor scale(const Tensor& a, double c) {
    Tensor out(a.shape());
    for (int64_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * c;
    Recorder rec{&a};
    rec.done(out, [=](const Tensor& g, Tape& t) {
        Tensor da(a.shape());
        for (int64_t i = 0; i < g.size(); ++i) da.data()[i] = g.data()[i] * c;
        t.accumulate(rec.in_ids[0], da);
    });
    return out;
}

Tensor add_scalar(const Tensor& a, double c) {
    Tensor out(a.shape());
    for (int64_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] + c;
    Recorder rec{&a};
    rec.done(out, [=](const Tensor& g, Tape& t) { t.accumulate(rec.in_ids[0], g); });
    return out;
}

// ---- elementwise nonlinearities ----

template <class F, class DF>
static Tensor unary_op(const Tensor& a, F f, DF df) {
    Tensor out(a.shape());
    for (int64_t i = 0; i < a.size(); ++i) out.data()[i] = f(a.data()[i]);
    Recorder rec{&a};
    rec.done(out, [=](const Tensor& g, Tape& t) {
        Tensor da(a.shape());
        for (int64_t i = 0; i < g.size(); ++i)
            da.data()[i] = g.data()[i] * df(a.data()[i], out.data()[i]);
        t.accumulate(rec.in_ids[0], da);
    });
    return out;
}

Tensor relu(const Tensor& a) {
    return unary_op(
        a, [](double x) { return x > 0 ? x : 0.0; },
        [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& a, double alpha) {
    return unary_op(
        a, [alpha](double x) { return x > 0 ? x : alpha * x; },
        [alpha](double x, double) { return x > 0 ? 1.0 : alpha; });
}

Tensor tanh_op(const Tensor& a) {
    return unary_op(
        a, [](double x) { return std::tanh(x); },
        [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
    return unary_op(
        a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor log_op(const Tensor& a) {
    return unary_op(
        a, [](double x) { return std::log(x); },
        [](double x, double) { return 1.0 / x; });
}

Tensor exp_op(const Tensor& a) {
    return unary_op(
        a, [](double x) { return std::exp(x); },
        [](double, double y) { return y; });
}

Tensor reciprocal(const Tensor& a) {
    return unary_op(
        a, [](double x) { return 1.0 / x; },
        [](double, double y) { return -y * y; });
}

Tensor reshape(const Tensor& a, Shape shape) {
    Tensor out(shape, a.values());
    Recorder rec{&a};
    rec.done(out, [=](const Tensor& g, Tape& t) {
        t.accumulate(rec.in_ids[0], Tensor(a.shape(), g.values()));
    });
    return out;
}

Tensor square(const Tensor& a) {
    return unary_op(
        a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor sqrt_op(const Tensor& a) {
    return unary_op(
        a, [](double x) { return std::sqrt(x); },
        [](double, double y) { return 0.5 / y; });
}

// ---- softmax (last axis) ----

Tensor softmax(const Tensor& a) {
    int64_t m = a.extent(-1);
    int64_t rows = a.size() / m;
    Tensor out(a.shape());
    for (int64_t r = 0; r < rows; ++r) {
        const double* x = a.data() + r * m;
        double* y = out.data() + r * m;
        double mx = x[0];
        for (int64_t j = 1; j < m; ++j) mx = std::max(mx, x[j]);
        double s = 0;
        for (int64_t j = 0; j < m; ++j) s += (y[j] = std::exp(x[j] - mx));
        for (int64_t j = 0; j < m; ++j) y[j] /= s;
    }
    Recorder rec{&a};
    rec.done(out, [=](const Tensor& g, Tape& t) {
        Tensor da(a.shape());
        for (int64_t r = 0; r < rows; ++r) {
            const double* y = out.data() + r * m;
            const double* gp = g.data() + r * m;
            double dot = 0;
            for (int64_t j = 0; j < m; ++j) dot += y[j] * gp[j];
            double* d = da.data() + r * m;
            for (int64_t j = 0; j < m; ++j) d[j] = y[j] * (gp[j] - dot);
        }
        t.accumulate(rec.in_ids[0], da);
    });
    return out;
}

// ---- concat / transpose / gather ----

Tensor concat(const Tensor& a, const Tensor& b, int axis) {
    check(a.rank() == b.rank(), "concat: rank mismatch");
    if (axis < 0) axis += (int)a.rank();
    for (int i = 0; i < a.rank(); ++i)
        if (i != axis)
            check(a.extent(i) == b.extent(i), "concat: extents differ off axis " +
                                                  shape_str(a.shape()) + " | " +
                                                  shape_str(b.shape()));
    Shape os = a.shape();
    os[(size_t)axis] += b.extent(axis);
    Tensor out(os);
    int64_t inner = 1;
    for (int i = axis + 1; i < a.rank(); ++i) inner *= a.extent(i);
    int64_t ca = a.extent(axis) * inner, cb = b.extent(axis) * inner;
    int64_t outer = a.size() / ca;
    for (int64_t o = 0; o < outer; ++o) {
        std::memcpy(out.data() + o * (ca + cb), a.data() + o * ca, (size_t)ca * 8);
        std::memcpy(out.data() + o * (ca + cb) + ca, b.data() + o * cb, (size_t)cb * 8);
    }
    Recorder rec{&a, &b};
    rec.done(out, [=](const Tensor& g, Tape& t) {
        Tensor da(a.shape()), db(b.shape());
        for (int64_t o = 0; o < outer; ++o) {
            std::memcpy(da.data() + o * ca, g.data() + o * (ca + cb), (size_t)ca * 8);
            std::memcpy(db.data() + o * cb, g.data() + o * (ca + cb) + ca, (size_t)cb * 8);
        }
        t.accumulate(rec.in_ids[0], da);
        t.accumulate(rec.in_ids[1], db);
    });
    return out;
}

static void transpose2d(const double* a, double* o, int64_t n, int64_t m) {
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < m; ++j) o[j * n + i] = a[i * m + j];
}

Tensor transpose(const Tensor& a) {
    check(a.rank() == 2 || a.rank() == 3, "transpose: rank must be 2 or 3");
    int64_t B = a.rank() == 3 ? a.extent(0) : 1;
    int64_t n = a.extent(-2), m = a.extent(-1);
    Shape os = a.shape();
    std::swap(os[os.size() - 1], os[os.size() - 2]);
    Tensor out(os);
    for (int64_t s = 0; s < B; ++s)
        transpose2d(a.data() + s * n * m, out.data() + s * n * m, n, m);
    Recorder rec{&a};
    rec.done(out, [=](const Tensor& g, Tape& t) {
        Tensor da(a.shape());
        for (int64_t s = 0; s < B; ++s)
            transpose2d(g.data() + s * n * m, da.data() + s * n * m, m, n);
        t.accumulate(rec.in_ids[0], da);
    });
    return out;
}

Tensor gather(const Tensor& a, const std::vector<int>& rows) {
    check(a.rank() == 2, "gather: rank-2 input required");
    int64_t n = a.extent(0), m = a.extent(1);
    for (int r : rows)
        check(r >= 0 && r < n, "gather: row index " + std::to_string(r) + " out of range");
    Tensor out({(int64_t)rows.size(), m});
    for (size_t i = 0; i < rows.size(); ++i)
        std::memcpy(out.data() + (int64_t)i * m, a.data() + rows[i] * (int64_t)m,
                    (size_t)m * 8);
    Recorder rec{&a};
    rec.done(out, [=](const Tensor& g, Tape& t) {
        Tensor da(a.shape());
        for (size_t i = 0; i < rows.size(); ++i) {
            const double* gp = g.data() + (int64_t)i * m;
            double* dp = da.data() + rows[i] * (int64_t)m;
            for (int64_t j = 0; j < m; ++j) dp[j] += gp[j];
        }
        t.accumulate(rec.in_ids[0], da);
    });
    return out;
}

// ---- reductions ----

Tensor reduce_sum(const Tensor& a) {
    double s = 0;
    for (int64_t i = 0; i < a.size(); ++i) s += a.data()[i];
    Tensor out({1}, {s});
    Recorder rec{&a};
    rec.done(out, [=](const Tensor& g, Tape& t) {
        t.accumulate(rec.in_ids[0], Tensor(a.shape(), g.data()[0]));
    });
    return out;
}

Tensor reduce_mean(const Tensor& a) { return scale(reduce_sum(a), 1.0 / (double)a.size()); }

// axis reduction bookkeeping: outer x axis x inner
struct AxisView {
    int64_t outer, n, inner;
};
static AxisView axis_view(const Tensor& a, int axis) {
    if (axis < 0) axis += (int)a.rank();
    AxisView v{1, a.extent(axis), 1};
    for (int i = 0; i < axis; ++i) v.outer *= a.extent(i);
    for (int i = axis + 1; i < a.rank(); ++i) v.inner *= a.extent(i);
    return v;
}
static Shape drop_axis(const Shape& s, int axis) {
    Shape o;
    if (axis < 0) axis += (int)s.size();
    for (int i = 0; i < (int)s.size(); ++i)
        if (i != axis) o.push_back(s[(size_t)i]);
    if (o.empty()) o.push_back(1);
    return o;
}

Tensor reduce_sum(const Tensor& a, int axis) {
    auto v = axis_view(a, axis);
    Tensor out(drop_axis(a.shape(), axis));
    for (int64_t o = 0; o < v.outer; ++o)
        for (int64_t k = 0; k < v.n; ++k)
            for (int64_t i = 0; i < v.inner; ++i)
                out.data()[o * v.inner + i] += a.data()[(o * v.n + k) * v.inner + i];
    Recorder rec{&a};
    rec.done(out, [=](const Tensor& g, Tape& t) {
        Tensor da(a.shape());
        for (int64_t o = 0; o < v.outer; ++o)
            for (int64_t k = 0; k < v.n; ++k)
                for (int64_t i = 0; i < v.inner; ++i)
                    da.data()[(o * v.n + k) * v.inner + i] = g.data()[o * v.inner + i];
        t.accumulate(rec.in_ids[0], da);
    });
    return out;
}

Tensor reduce_mean(const Tensor& a, int axis) {
    auto v = axis_view(a, axis);
    return scale(reduce_sum(a, axis), 1.0 / (double)v.n);
}

Tensor reduce_max(const Tensor& a, int axis) {
    auto v = axis_view(a, axis);
    Tensor out(drop_axis(a.shape(), axis));
    std::vector<int64_t> arg((size_t)(v.outer * v.inner), 0);
    for (int64_t o = 0; o < v.outer; ++o)
        for (int64_t i = 0; i < v.inner; ++i) {
            double best = a.data()[(o * v.n) * v.inner + i];
            int64_t bk = 0;
            for (int64_t k = 1; k < v.n; ++k) {
                double x = a.data()[(o * v.n + k) * v.inner + i];
                if (x > best) best = x, bk = k;
            }
            out.data()[o * v.inner + i] = best;
            arg[(size_t)(o * v.inner + i)] = bk;
        }
    Recorder rec{&a};
    rec.done(out, [=](const Tensor& g, Tape& t) {
        Tensor da(a.shape());
        for (int64_t o = 0; o < v.outer; ++o)
            for (int64_t i = 0; i < v.inner; ++i) {
                int64_t k = arg[(size_t)(o * v.inner + i)];
                da.data()[(o * v.n + k) * v.inner + i] = g.data()[o * v.inner + i];
            }
        t.accumulate(rec.in_ids[0], da);
    });
    return out;
}

// ---- segment reductions ----

static void check_segments(const std::vector<int>& ids, int64_t n, int n_segments) {
    check((int64_t)ids.size() == n, "segment op: ids length " + std::to_string(ids.size()) +
                                        " != leading extent " + std::to_string(n));
    int prev = 0;
    for (int s : ids) {
        check(s >= prev, "segment op: segment_ids not sorted non-decreasing");
        check(s < n_segments, "segment op: id out of range");
        prev = s;
    }
}

Tensor segment_sum(const Tensor& a, const std::vector<int>& ids, int n_segments) {
    int64_t n = a.extent(0), m = a.size() / std::max<int64_t>(n, 1);
    check_segments(ids, n, n_segments);
    Shape os = a.shape();
    os[0] = n_segments;
    Tensor out(os);
    for (int64_t i = 0; i < n; ++i) {
        double* o = out.data() + (int64_t)ids[(size_t)i] * m;
        const double* x = a.data() + i * m;
        for (int64_t j = 0; j < m; ++j) o[j] += x[j];
    }
    Recorder rec{&a};
    rec.done(out, [=](const Tensor& g, Tape& t) {
        Tensor da(a.shape());
        for (int64_t i = 0; i < n; ++i)
            std::memcpy(da.data() + i * m, g.data() + (int64_t)ids[(size_t)i] * m,
                        (size_t)m * 8);
        t.accumulate(rec.in_ids[0], da);
    });
    return out;
}

Tensor segment_mean(const Tensor& a, const std::vector<int>& ids, int n_segments) {
    int64_t n = a.extent(0), m = a.size() / std::max<int64_t>(n, 1);
    check_segments(ids, n, n_segments);
    std::vector<double> cnt((size_t)n_segments, 0.0);
    for (int s : ids) cnt[(size_t)s] += 1.0;
    Shape os = a.shape();
    os[0] = n_segments;
    Tensor out(os);
    for (int64_t i = 0; i < n; ++i) {
        double* o = out.data() + (int64_t)ids[(size_t)i] * m;
        const double* x = a.data() + i * m;
        for (int64_t j = 0; j < m; ++j) o[j] += x[j];
    }
    for (int s = 0; s < n_segments; ++s)
        if (cnt[(size_t)s] > 0)
            for (int64_t j = 0; j < m; ++j) out.data()[(int64_t)s * m + j] /= cnt[(size_t)s];
    Recorder rec{&a};
    rec.done(out, [=](const Tensor& g, Tape& t) {
        Tensor da(a.shape());
        for (int64_t i = 0; i < n; ++i) {
            int s = ids[(size_t)i];
            const double* gp = g.data() + (int64_t)s * m;
            double* dp = da.data() + i * m;
            for (int64_t j = 0; j < m; ++j) dp[j] = gp[j] / cnt[(size_t)s];
        }
        t.accumulate(rec.in_ids[0], da);
    });
    return out;
}

Tensor segment_max(const Tensor& a, const std::vector<int>& ids, int n_segments) {
    int64_t n = a.extent(0), m = a.size() / std::max<int64_t>(n, 1);
    check_segments(ids, n, n_segments);
    Shape os = a.shape();
    os[0] = n_segments;
    Tensor out(os, 0.0);
    std::vector<int64_t> arg((size_t)(n_segments * m), -1);
    for (int64_t i = 0; i < n; ++i) {
        int s = ids[(size_t)i];
        for (int64_t j = 0; j < m; ++j) {
            double x = a.data()[i * m + j];
            int64_t slot = (int64_t)s * m + j;
            if (arg[(size_t)slot] < 0 || x > out.data()[slot]) {
                out.data()[slot] = x;
                arg[(size_t)slot] = i;
            }
        }
    }
    Recorder rec{&a};
    rec.done(out, [=](const Tensor& g, Tape& t) {
        Tensor da(a.shape());
        for (int s = 0; s < n_segments; ++s)
            for (int64_t j = 0; j < m; ++j) {
                int64_t i = arg[(size_t)((int64_t)s * m + j)];
                if (i >= 0) da.data()[i * m + j] += g.data()[(int64_t)s * m + j];
            }
        t.accumulate(rec.in_ids[0], da);
    });
    return out;
}

std::vector<int> topk_indices(const Tensor& scores, int k) {
    int64_t n = scores.size();
    if (k < 0 || k > n) throw ShapeError("topk: k out of range");
    std::vector<int> idx((size_t)n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
        return scores.data()[a] > scores.data()[b];
    });
    idx.resize((size_t)k);
    return idx;
}

Tensor masked_fill(const Tensor& a, const std::vector<uint8_t>& keep, double value) {
    check((int64_t)keep.size() == a.size(), "masked_fill: mask size mismatch");
    Tensor out(a.shape());
    for (int64_t i = 0; i < a.size(); ++i)
        out.data()[i] = keep[(size_t)i] ? a.data()[i] : value;
    Recorder rec{&a};
    rec.done(out, [=](const Tensor& g, Tape& t) {
        Tensor da(a.shape());
        for (int64_t i = 0; i < g.size(); ++i)
            da.data()[i] = keep[(size_t)i] ? g.data()[i] : 0.0;
        t.accumulate(rec.in_ids[0], da);
    });
    return out;
}

Tensor l2_normalize_rows(const Tensor& a) {
    check(a.rank() == 2, "l2_normalize_rows: rank-2 input required");
    int64_t n = a.extent(0), m = a.extent(1);
    Tensor out(a.shape());
    std::vector<double> norms((size_t)n, 0.0);
    for (int64_t i = 0; i < n; ++i) {
        double s = 0;
        for (int64_t j = 0; j < m; ++j) s += a.data()[i * m + j] * a.data()[i * m + j];
        double nrm = std::sqrt(s);
        norms[(size_t)i] = nrm;
        double inv = nrm > 0 ? 1.0 / nrm : 0.0;
        for (int64_t j = 0; j < m; ++j) out.data()[i * m + j] = a.data()[i * m + j] * inv;
    }
    Recorder rec{&a};
    rec.done(out, [=](const Tensor& g, Tape& t) {
        // d(x/||x||) = (I - y y^T)/||x|| applied to g
        Tensor da(a.shape());
        for (int64_t i = 0; i < n; ++i) {
            double nrm = norms[(size_t)i];
            if (nrm == 0) continue;
            const double* y = out.data() + i * m;
            const double* gp = g.data() + i * m;
            double dot = 0;
            for (int64_t j = 0; j < m; ++j) dot += y[j] * gp[j];
            for (int64_t j = 0; j < m; ++j)
                da.data()[i * m + j] = (gp[j] - y[j] * dot) / nrm;
        }
        t.accumulate(rec.in_ids[0], da);
    });
    return out;
}

// ---- initializers ----

Tensor glorot_uniform(Shape shape, Rng& rng) {
    int64_t fan_in = shape.size() >= 2 ? shape[shape.size() - 2] : shape[0];
    int64_t fan_out = shape[shape.size() - 1];
    double limit = std::sqrt(6.0 / (double)(fan_in + fan_out));
    return uniform(std::move(shape), -limit, limit, rng);
}

Tensor uniform(Shape shape, double lo, double hi, Rng& rng) {
    Tensor t(std::move(shape));
    std::uniform_real_distribution<double> dist(lo, hi);
    for (int64_t i = 0; i < t.size(); ++i) t.data()[i] = dist(rng);
    return t;
}

Tensor normal(Shape shape, double mean, double stddev, Rng& rng) {
    Tensor t(std::move(shape));
    std::normal_distribution<double> dist(mean, stddev);
    for (int64_t i = 0; i < t.size(); ++i) t.data()[i] = dist(rng);
    return t;
}

Tensor dropout(const Tensor& a, double rate, bool training, Rng& rng) {
    if (!training || rate <= 0.0) return a;
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    std::vector<uint8_t> keep((size_t)a.size());
    for (auto& k : keep) k = dist(rng) >= rate ? 1 : 0;
    Tensor kept = masked_fill(a, keep, 0.0);
    return scale(kept, 1.0 / (1.0 - rate));
}

}  // namespace gnn
