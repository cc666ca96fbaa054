#pragma once

#include <string>
#include <vector>

#include "gnn/tensor.hpp"

namespace gnn {

// Named parameter slot, as registered by layers with the optimizer.
struct Param {
    std::string name;
    Tensor tensor;
};

// Adam with bias correction. Defaults: beta1=0.9, beta2=0.999, eps=1e-7.
class Adam {
  public:
    explicit Adam(double learning_rate = 0.001, double beta1 = 0.9, double beta2 = 0.999,
                  double epsilon = 1e-7)
        : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {}

    void register_params(const std::vector<Param>& params);

    // In-place update. `grads` aligned with the registered parameters.
    // Throws on non-finite gradients, naming the offending parameter.
    void step(const std::vector<Tensor>& grads);

    const std::vector<Param>& params() const { return params_; }
    int64_t step_count() const { return t_; }
    double learning_rate() const { return lr_; }

  private:
    double lr_, beta1_, beta2_, eps_;
    int64_t t_ = 0;
    std::vector<Param> params_;
    std::vector<Tensor> m_, v_;
};

// Central finite differences with step h against tape gradients.
struct GradCheckResult {
    double max_rel_error = 0.0;
    std::string worst_param;
    bool finite = true;
    bool passed(double tol) const { return finite && max_rel_error <= tol; }
};

// f must rebuild the computation from the current parameter values and
// return a scalar loss; it is invoked under a fresh tape per evaluation.
GradCheckResult gradient_check(const std::function<Tensor()>& f, std::vector<Param> params,
                               double h = 1e-5);

}  // namespace gnn
