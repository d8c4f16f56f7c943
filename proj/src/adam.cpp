#include "subadj/adam.hpp"

#include <cmath>

namespace subadj {

AdamState::AdamState(std::vector<Tensor> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
        m_.emplace_back(p.numel(), 0.0);
        v_.emplace_back(p.numel(), 0.0);
    }
}

bool AdamState::step() {
    // Validate every gradient before touching any parameter, so an aborted
    // step leaves the model untouched.
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
        const auto& p = params_[pi];
        if (!p.has_grad()) continue;
        for (double g : p.grad()) {
            if (!std::isfinite(g)) {
                last_warning_ = "adam: non-finite gradient in parameter " + std::to_string(pi) +
                                " (shape " + shape_str(p.shape()) + "); step " +
                                std::to_string(step_ + 1) + " aborted";
                return false;
            }
        }
    }
    ++step_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
        auto& p = params_[pi];
        auto& m = m_[pi];
        auto& v = v_[pi];
        const std::size_t n = p.numel();
        for (std::size_t i = 0; i < n; ++i) {
            const double g = p.has_grad() ? p.grad()[i] : 0.0;
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p.values()[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
    return true;
}

void AdamState::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

}  // namespace subadj
