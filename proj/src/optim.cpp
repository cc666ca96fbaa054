#include "gnn/optim.hpp"

#include <cmath>

namespace gnn {

void Adam::register_params(const std::vector<Param>& params) {
    for (const auto& p : params) {
        params_.push_back(p);
        m_.push_back(Tensor::zeros_like(p.tensor));
        v_.push_back(Tensor::zeros_like(p.tensor));
    }
}

void Adam::step(const std::vector<Tensor>& grads) {
    if (grads.size() != params_.size())
        throw std::runtime_error("adam: got " + std::to_string(grads.size()) +
                                 " gradients for " + std::to_string(params_.size()) +
                                 " parameters");
    for (size_t i = 0; i < grads.size(); ++i)
        if (!grads[i].all_finite())
            throw std::runtime_error("adam: non-finite gradient for parameter '" +
                                     params_[i].name + "'");
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, (double)t_);
    double bc2 = 1.0 - std::pow(beta2_, (double)t_);
    for (size_t i = 0; i < params_.size(); ++i) {
        double* w = params_[i].tensor.data();
        double* m = m_[i].data();
        double* v = v_[i].data();
        const double* g = grads[i].data();
        int64_t n = params_[i].tensor.size();
        for (int64_t j = 0; j < n; ++j) {
            m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
            v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
            double mhat = m[j] / bc1;
            double vhat = v[j] / bc2;
            w[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

GradCheckResult gradient_check(const std::function<Tensor()>& f, std::vector<Param> params,
                               double h) {
    GradCheckResult res;

    // analytic pass
    std::vector<Tensor> analytic;
    {
        Tape tape;
        Tensor loss = f();
        auto grads = tape.backward(loss);
        for (auto& p : params) {
            int id = p.tensor.node_id(tape);
            auto it = id >= 0 ? grads.find(id) : grads.end();
            analytic.push_back(it != grads.end() ? it->second
                                                 : Tensor::zeros_like(p.tensor));
        }
    }

    auto eval = [&]() {
        Tape tape;
        return f().item();
    };

    for (size_t pi = 0; pi < params.size(); ++pi) {
        Tensor& w = params[pi].tensor;
        if (!w.requires_grad()) continue;  // frozen inputs stay out of the report
        for (int64_t j = 0; j < w.size(); ++j) {
            double orig = w.data()[j];
            w.data()[j] = orig + h;
            double fp = eval();
            w.data()[j] = orig - h;
            double fm = eval();
            w.data()[j] = orig;
            if (!std::isfinite(fp) || !std::isfinite(fm)) {
                res.finite = false;
                res.worst_param = params[pi].name;
                return res;
            }
            double fd = (fp - fm) / (2.0 * h);
            double an = analytic[pi].data()[j];
            double denom = std::max({std::fabs(fd), std::fabs(an), 1e-8});
            double rel = std::fabs(fd - an) / denom;
            if (rel > res.max_rel_error) {
                res.max_rel_error = rel;
                res.worst_param = params[pi].name;
            }
        }
    }
    return res;
}

}  // namespace gnn
