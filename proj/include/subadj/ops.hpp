#pragma once

#include <vector>

#include "subadj/rng.hpp"
#include "subadj/tensor.hpp"

namespace subadj {

// Differentiable operations. Each op computes its forward result and, when
// a tape is active and an input requires grad, records a backward closure.
// Gradients accumulate into inputs with requires_grad set.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);

// [m x n] + [n], broadcast over rows (bias add).
Tensor add_rowvec(const Tensor& a, const Tensor& v);

// 2-D by 2-D, or 3-D by 3-D batched over a shared leading dimension.
Tensor matmul(const Tensor& a, const Tensor& b);

// Swaps the last two axes.
Tensor transpose(const Tensor& a);

// Row-wise softmax along the last axis, stabilized by max subtraction.
Tensor softmax_rows(const Tensor& x);

Tensor relu(const Tensor& x);
// x > 0 ? x + 1 : exp(x)  (the ELU+1 feature map)
Tensor elu_plus_one(const Tensor& x);
// x > 0 ? x^p : 0  (power feature map on the positive part)
Tensor relu_pow(const Tensor& x, double p);
// Negative entries replaced by `value`; gradient passes where x >= 0.
Tensor clamp_negative(const Tensor& x, double value);

// Elementwise x / s where s is a learnable scalar (shape [1]).
Tensor div_scalar(const Tensor& x, const Tensor& s);

// Sum of all entries, shape [1].
Tensor sum(const Tensor& x);

Tensor slice_cols(const Tensor& x, int start, int len);
Tensor concat_cols(const std::vector<Tensor>& parts);

// Normalizes each row over the last axis (population variance), then
// applies elementwise scale and shift.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

// Inverted dropout; identity when rate == 0.
Tensor dropout(const Tensor& x, double rate, Rng& rng);

}  // namespace subadj
