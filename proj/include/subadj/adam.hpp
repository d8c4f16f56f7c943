#pragma once

#include <string>
#include <vector>

#include "subadj/tensor.hpp"

namespace subadj {

// Adam with bias correction. Moment buffers are laid out per parameter in
// registration order.
class AdamState {
public:
    AdamState(std::vector<Tensor> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
              double eps = 1e-8);

    // One update from the gradients currently stored on the parameters.
    // A parameter with no grad allocated is treated as zero-gradient.
    // If any gradient entry is non-finite the whole step is aborted and
    // false is returned; last_warning() describes the offending parameter.
    bool step();

    void zero_grad();

    long step_count() const { return step_; }
    double learning_rate() const { return lr_; }
    const std::string& last_warning() const { return last_warning_; }
    const std::vector<Tensor>& params() const { return params_; }

private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    double lr_, beta1_, beta2_, eps_;
    long step_ = 0;
    std::string last_warning_;
};

}  // namespace subadj
