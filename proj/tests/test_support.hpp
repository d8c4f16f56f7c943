#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "subadj/rng.hpp"
#include "subadj/tensor.hpp"

namespace subadj::testing {

inline void fill_uniform(Tensor& t, Rng& rng, double lo = -1.0, double hi = 1.0) {
    for (auto& v : t.values()) v = rng.uniform(lo, hi);
}

// Values bounded away from zero, for ops with a kink at the origin.
inline void fill_away_from_zero(Tensor& t, Rng& rng, double min_abs = 0.05, double max_abs = 1.0) {
    for (auto& v : t.values()) {
        const double mag = rng.uniform(min_abs, max_abs);
        v = rng.uniform01() < 0.5 ? -mag : mag;
    }
}

// Central finite differences against reverse-mode gradients. build_loss
// must construct a fresh graph from the current leaf values each call.
// Relative error uses a floored denominator so exactly-zero gradients
// compare in absolute terms.
inline double max_grad_rel_error(const std::function<Tensor()>& build_loss,
                                 std::vector<Tensor> leaves, double h = 1e-5) {
    for (auto& leaf : leaves) {
        leaf.ensure_grad();
        leaf.zero_grad();
    }
    {
        Tape tape;
        TapeScope scope(tape);
        Tensor loss = build_loss();
        tape.backward(loss);
    }
    std::vector<std::vector<double>> grads;
    for (auto& leaf : leaves) grads.push_back(leaf.has_grad() ? leaf.grad() : std::vector<double>(leaf.numel(), 0.0));

    double worst = 0.0;
    for (std::size_t li = 0; li < leaves.size(); ++li) {
        auto& leaf = leaves[li];
        for (std::size_t i = 0; i < leaf.numel(); ++i) {
            const double v0 = leaf.values()[i];
            leaf.values()[i] = v0 + h;
            const double fp = build_loss().item();
            leaf.values()[i] = v0 - h;
            const double fm = build_loss().item();
            leaf.values()[i] = v0;
            const double fd = (fp - fm) / (2.0 * h);
            const double ad = grads[li][i];
            const double denom = std::max({std::abs(fd), std::abs(ad), 1e-3});
            worst = std::max(worst, std::abs(fd - ad) / denom);
        }
    }
    return worst;
}

// Independent triple-loop product for matmul checks.
inline std::vector<double> matmul_oracle(const std::vector<double>& a, const std::vector<double>& b,
                                         int m, int k, int n) {
    std::vector<double> c(static_cast<std::size_t>(m) * n, 0.0);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int p = 0; p < k; ++p) {
                acc += a[static_cast<std::size_t>(i) * k + p] * b[static_cast<std::size_t>(p) * n + j];
            }
            c[static_cast<std::size_t>(i) * n + j] = acc;
        }
    }
    return c;
}

// Brute-force wrapped-stripe aggregation: for each column i, walk every
// integer j with k1 <= |j - i| <= k2 and wrap it into [0, win).
inline std::vector<double> sacon_oracle(const Tensor& a, int k1, int k2) {
    const int win = a.dim(0);
    std::vector<double> out(static_cast<std::size_t>(win), 0.0);
    for (int i = 0; i < win; ++i) {
        for (int j = i - k2; j <= i + k2; ++j) {
            const int dist = std::abs(j - i);
            if (dist < k1 || dist > k2) continue;
            int jj = j % win;
            if (jj < 0) jj += win;
            out[static_cast<std::size_t>(i)] += a.at(jj, i);
        }
    }
    return out;
}

// 0/1 stripe mask of the wrapped aggregation, cell (row, col).
inline std::vector<int> sacon_mask_oracle(int win, int k1, int k2) {
    std::vector<int> mask(static_cast<std::size_t>(win) * win, 0);
    for (int i = 0; i < win; ++i) {
        for (int j = i - k2; j <= i + k2; ++j) {
            const int dist = std::abs(j - i);
            if (dist < k1 || dist > k2) continue;
            int jj = j % win;
            if (jj < 0) jj += win;
            mask[static_cast<std::size_t>(jj) * win + i] += 1;
        }
    }
    return mask;
}

}  // namespace subadj::testing
