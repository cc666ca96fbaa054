#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace gnn {

using Shape = std::vector<int64_t>;

std::string shape_str(const Shape& s);

struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class Tape;

// Dense row-major 64-bit tensor. Copies are shallow (shared storage);
// completed tensors are treated as immutable.
class Tensor {
  public:
    Tensor() = default;
    Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> values);
    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    const Shape& shape() const { return d_->shape; }
    int64_t rank() const { return (int64_t)d_->shape.size(); }
    int64_t size() const { return (int64_t)d_->values.size(); }
    int64_t extent(int axis) const;

    double* data() { return d_->values.data(); }
    const double* data() const { return d_->values.data(); }
    std::vector<double>& values() { return d_->values; }
    const std::vector<double>& values() const { return d_->values; }

    double item() const;
    double& at(std::initializer_list<int64_t> idx);
    double at(std::initializer_list<int64_t> idx) const;

    bool defined() const { return d_ != nullptr; }
    bool requires_grad() const { return d_ && d_->requires_grad; }
    Tensor& set_requires_grad(bool rg) {
        d_->requires_grad = rg;
        return *this;
    }

    // Deep copy with fresh storage.
    Tensor clone() const;

    bool all_finite() const;

    // Tape bookkeeping. A node id is valid only for the epoch it was
    // assigned in; the tape re-registers tensors lazily on first use.
    int node_id(const Tape& tape) const;
    void bind(const Tape& tape, int id) const;

    static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape(), 0.0); }

  private:
    struct Data {
        Shape shape;
        std::vector<double> values;
        bool requires_grad = false;
        mutable uint64_t tape_epoch = 0;
        mutable int node_id = -1;
    };
    std::shared_ptr<Data> d_;
};

// Reverse-mode tape. Rebuilt each forward pass: reset() bumps the epoch,
// invalidating all node ids from previous passes.
class Tape {
  public:
    using BackwardFn = std::function<void(const Tensor& grad_out, Tape&)>;

    Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;
    ~Tape();

    static Tape* active();

    void reset();
    uint64_t epoch() const { return epoch_; }
    size_t num_ops() const { return ops_.size(); }

    // Assigns a node id to `t` for the current epoch (idempotent).
    int track(const Tensor& t);
    bool is_leaf(int node_id) const;

    // record_primitive: appends one op. `inputs` must already be tracked.
    void record(std::vector<int> input_ids, int output_id, BackwardFn backward);

    // Gradients of every requires_grad leaf reachable from `loss`;
    // unreachable leaves get zero tensors. `loss` must be scalar.
    std::unordered_map<int, Tensor> backward(const Tensor& loss);

    void accumulate(int node_id, const Tensor& grad);
    const Tensor* grad_of(int node_id) const;

  private:
    struct Op {
        std::vector<int> inputs;
        int output;
        BackwardFn backward;
    };
    uint64_t epoch_ = 1;
    std::vector<Op> ops_;
    std::vector<Tensor> leaves_;        // tracked requires_grad tensors
    std::vector<int> leaf_ids_;
    std::vector<std::optional<Tensor>> grads_;
    int next_id_ = 0;
    Tape* prev_active_ = nullptr;
};

// ---- primitive ops (recorded on the active tape when one exists) ----

// matmul: (N,K)x(K,M); (B,N,K)x(K,M); (B,N,K)x(B,K,M).
Tensor matmul(const Tensor& a, const Tensor& b);

// add: same shape, or b broadcast over leading axes of a (e.g. bias row
// (M) or (1,M) added to (N,M) / (B,N,M)).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);

// mul: same shape, or b of shape (N,1) against a of shape (N,F)
// (per-row scaling), or b scalar tensor.
Tensor mul(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);

Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double alpha);
Tensor tanh_op(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor log_op(const Tensor& a);
Tensor exp_op(const Tensor& a);
Tensor square(const Tensor& a);
Tensor sqrt_op(const Tensor& a);
Tensor reciprocal(const Tensor& a);

// same storage size, new shape.
Tensor reshape(const Tensor& a, Shape shape);

// softmax over the last axis.
Tensor softmax(const Tensor& a);

Tensor concat(const Tensor& a, const Tensor& b, int axis);

// transpose of the last two axes (rank 2 or 3).
Tensor transpose(const Tensor& a);

// gather rows of a rank-2 tensor.
Tensor gather(const Tensor& a, const std::vector<int>& rows);

Tensor reduce_sum(const Tensor& a);          // all entries -> scalar
Tensor reduce_sum(const Tensor& a, int axis);
Tensor reduce_mean(const Tensor& a);
Tensor reduce_mean(const Tensor& a, int axis);
Tensor reduce_max(const Tensor& a, int axis);

// segment reductions over axis 0; segment_ids sorted non-decreasing.
Tensor segment_sum(const Tensor& a, const std::vector<int>& segment_ids, int n_segments);
Tensor segment_mean(const Tensor& a, const std::vector<int>& segment_ids, int n_segments);
Tensor segment_max(const Tensor& a, const std::vector<int>& segment_ids, int n_segments);

// top_k over a flat score vector: indices of the k largest entries,
// stable (ties keep the lowest index), in descending score order.
std::vector<int> topk_indices(const Tensor& scores, int k);

// masked fill: out[i] = mask[i] ? a[i] : value. Gradient flows only
// through unmasked-out entries.
Tensor masked_fill(const Tensor& a, const std::vector<uint8_t>& keep, double value);

// row-wise L2 normalization (zero rows stay zero).
Tensor l2_normalize_rows(const Tensor& a);

// ---- initializers / RNG ----
// All randomness in the library flows through std::mt19937_64.
using Rng = std::mt19937_64;

Tensor glorot_uniform(Shape shape, Rng& rng);
Tensor uniform(Shape shape, double lo, double hi, Rng& rng);
Tensor normal(Shape shape, double mean, double stddev, Rng& rng);

// inverted dropout; identity when rate == 0 or !training.
Tensor dropout(const Tensor& a, double rate, bool training, Rng& rng);

}  // namespace gnn
