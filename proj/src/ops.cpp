#include "subadj/ops.hpp"

#include <algorithm>
#include <cmath>

namespace subadj {

namespace {

bool wants_record(std::initializer_list<Tensor> inputs) {
    if (!active_tape()) return false;
    for (const auto& t : inputs) {
        if (t.requires_grad()) return true;
    }
    return false;
}

bool any_requires(std::initializer_list<Tensor> inputs) {
    for (const auto& t : inputs) {
        if (t.requires_grad()) return true;
    }
    return false;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
    }
}

// c[m x n] (+)= a[m x k] * b[k x n]
void gemm_nn(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<std::size_t>(i) * k;
        double* crow = c + static_cast<std::size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const double av = arow[p];
            const double* brow = b + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// c[m x n] (+)= a[m x k] * b[n x k]^T
void gemm_nt(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<std::size_t>(i) * k;
        double* crow = c + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* brow = b + static_cast<std::size_t>(j) * k;
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
            crow[j] += acc;
        }
    }
}

// c[m x n] (+)= a[k x m]^T * b[k x n]
void gemm_tn(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int p = 0; p < k; ++p) {
        const double* arow = a + static_cast<std::size_t>(p) * m;
        const double* brow = b + static_cast<std::size_t>(p) * n;
        for (int i = 0; i < m; ++i) {
            const double av = arow[i];
            double* crow = c + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    Tensor out = Tensor::zeros(a.shape(), any_requires({a, b}));
    const std::size_t n = out.numel();
    for (std::size_t i = 0; i < n; ++i) out.values()[i] = a.values()[i] + b.values()[i];
    if (wants_record({a, b})) {
        active_tape()->record(out, [a, b, out]() {
            const std::size_t m = out.numel();
            if (a.requires_grad()) {
                a.ensure_grad();
                for (std::size_t i = 0; i < m; ++i) a.grad()[i] += out.grad()[i];
            }
            if (b.requires_grad()) {
                b.ensure_grad();
                for (std::size_t i = 0; i < m; ++i) b.grad()[i] += out.grad()[i];
            }
        });
    }
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    Tensor out = Tensor::zeros(a.shape(), any_requires({a, b}));
    const std::size_t n = out.numel();
    for (std::size_t i = 0; i < n; ++i) out.values()[i] = a.values()[i] - b.values()[i];
    if (wants_record({a, b})) {
        active_tape()->record(out, [a, b, out]() {
            const std::size_t m = out.numel();
            if (a.requires_grad()) {
                a.ensure_grad();
                for (std::size_t i = 0; i < m; ++i) a.grad()[i] += out.grad()[i];
            }
            if (b.requires_grad()) {
                b.ensure_grad();
                for (std::size_t i = 0; i < m; ++i) b.grad()[i] -= out.grad()[i];
            }
        });
    }
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    Tensor out = Tensor::zeros(a.shape(), any_requires({a, b}));
    const std::size_t n = out.numel();
    for (std::size_t i = 0; i < n; ++i) out.values()[i] = a.values()[i] * b.values()[i];
    if (wants_record({a, b})) {
        active_tape()->record(out, [a, b, out]() {
            const std::size_t m = out.numel();
            if (a.requires_grad()) {
                a.ensure_grad();
                for (std::size_t i = 0; i < m; ++i) a.grad()[i] += out.grad()[i] * b.values()[i];
            }
            if (b.requires_grad()) {
                b.ensure_grad();
                for (std::size_t i = 0; i < m; ++i) b.grad()[i] += out.grad()[i] * a.values()[i];
            }
        });
    }
    return out;
}

Tensor scale(const Tensor& a, double c) {
    Tensor out = Tensor::zeros(a.shape(), a.requires_grad());
    const std::size_t n = out.numel();
    for (std::size_t i = 0; i < n; ++i) out.values()[i] = a.values()[i] * c;
    if (wants_record({a})) {
        active_tape()->record(out, [a, out, c]() {
            a.ensure_grad();
            const std::size_t m = out.numel();
            for (std::size_t i = 0; i < m; ++i) a.grad()[i] += out.grad()[i] * c;
        });
    }
    return out;
}

Tensor add_rowvec(const Tensor& a, const Tensor& v) {
    if (a.rank() != 2 || v.rank() != 1 || a.dim(1) != v.dim(0)) {
        throw DimensionError("add_rowvec: incompatible shapes " + shape_str(a.shape()) + " vs " +
                             shape_str(v.shape()));
    }
    const int m = a.dim(0), n = a.dim(1);
    Tensor out = Tensor::zeros(a.shape(), any_requires({a, v}));
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) out.at(i, j) = a.at(i, j) + v.at(j);
    }
    if (wants_record({a, v})) {
        active_tape()->record(out, [a, v, out, m, n]() {
            if (a.requires_grad()) {
                a.ensure_grad();
                const std::size_t total = a.numel();
                for (std::size_t i = 0; i < total; ++i) a.grad()[i] += out.grad()[i];
            }
            if (v.requires_grad()) {
                v.ensure_grad();
                for (int i = 0; i < m; ++i) {
                    for (int j = 0; j < n; ++j) {
                        v.grad()[static_cast<std::size_t>(j)] += out.grad()[out.flat(i, j)];
                    }
                }
            }
        });
    }
    return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() == 2 && b.rank() == 2) {
        if (a.dim(1) != b.dim(0)) {
            throw DimensionError("matmul: inner dimensions disagree, " + shape_str(a.shape()) +
                                 " vs " + shape_str(b.shape()));
        }
        const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
        Tensor out = Tensor::zeros({m, n}, any_requires({a, b}));
        gemm_nn(a.values().data(), b.values().data(), out.values().data(), m, k, n);
        if (wants_record({a, b})) {
            active_tape()->record(out, [a, b, out, m, k, n]() {
                if (a.requires_grad()) {
                    a.ensure_grad();
                    gemm_nt(out.grad().data(), b.values().data(), a.grad().data(), m, n, k);
                }
                if (b.requires_grad()) {
                    b.ensure_grad();
                    gemm_tn(a.values().data(), out.grad().data(), b.grad().data(), k, m, n);
                }
            });
        }
        return out;
    }
    if (a.rank() == 3 && b.rank() == 3) {
        if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(1)) {
            throw DimensionError("matmul: batched shapes disagree, " + shape_str(a.shape()) +
                                 " vs " + shape_str(b.shape()));
        }
        const int batch = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
        Tensor out = Tensor::zeros({batch, m, n}, any_requires({a, b}));
        const std::size_t astride = static_cast<std::size_t>(m) * k;
        const std::size_t bstride = static_cast<std::size_t>(k) * n;
        const std::size_t ostride = static_cast<std::size_t>(m) * n;
        for (int s = 0; s < batch; ++s) {
            gemm_nn(a.values().data() + s * astride, b.values().data() + s * bstride,
                    out.values().data() + s * ostride, m, k, n);
        }
        if (wants_record({a, b})) {
            active_tape()->record(out, [a, b, out, batch, m, k, n, astride, bstride, ostride]() {
                if (a.requires_grad()) {
                    a.ensure_grad();
                    for (int s = 0; s < batch; ++s) {
                        gemm_nt(out.grad().data() + s * ostride, b.values().data() + s * bstride,
                                a.grad().data() + s * astride, m, n, k);
                    }
                }
                if (b.requires_grad()) {
                    b.ensure_grad();
                    for (int s = 0; s < batch; ++s) {
                        gemm_tn(a.values().data() + s * astride, out.grad().data() + s * ostride,
                                b.grad().data() + s * bstride, k, m, n);
                    }
                }
            });
        }
        return out;
    }
    throw DimensionError("matmul: expects 2-D x 2-D or 3-D x 3-D, got " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
}

Tensor transpose(const Tensor& a) {
    if (a.rank() == 2) {
        const int m = a.dim(0), n = a.dim(1);
        Tensor out = Tensor::zeros({n, m}, a.requires_grad());
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < n; ++j) out.at(j, i) = a.at(i, j);
        }
        if (wants_record({a})) {
            active_tape()->record(out, [a, out, m, n]() {
                a.ensure_grad();
                for (int i = 0; i < m; ++i) {
                    for (int j = 0; j < n; ++j) a.grad()[a.flat(i, j)] += out.grad()[out.flat(j, i)];
                }
            });
        }
        return out;
    }
    if (a.rank() == 3) {
        const int batch = a.dim(0), m = a.dim(1), n = a.dim(2);
        Tensor out = Tensor::zeros({batch, n, m}, a.requires_grad());
        for (int s = 0; s < batch; ++s) {
            for (int i = 0; i < m; ++i) {
                for (int j = 0; j < n; ++j) out.at(s, j, i) = a.at(s, i, j);
            }
        }
        if (wants_record({a})) {
            active_tape()->record(out, [a, out, batch, m, n]() {
                a.ensure_grad();
                for (int s = 0; s < batch; ++s) {
                    for (int i = 0; i < m; ++i) {
                        for (int j = 0; j < n; ++j) {
                            a.grad()[a.flat(s, i, j)] += out.grad()[out.flat(s, j, i)];
                        }
                    }
                }
            });
        }
        return out;
    }
    throw DimensionError("transpose: expects rank 2 or 3, got " + shape_str(a.shape()));
}

Tensor softmax_rows(const Tensor& x) {
    const int cols = x.dim(x.rank() - 1);
    const std::size_t rows = x.numel() / static_cast<std::size_t>(cols);
    Tensor out = Tensor::zeros(x.shape(), x.requires_grad());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* in = x.values().data() + r * cols;
        double* o = out.values().data() + r * cols;
        double mx = in[0];
        for (int j = 1; j < cols; ++j) mx = std::max(mx, in[j]);
        double total = 0.0;
        for (int j = 0; j < cols; ++j) {
            o[j] = std::exp(in[j] - mx);
            total += o[j];
        }
        for (int j = 0; j < cols; ++j) o[j] /= total;
    }
    if (wants_record({x})) {
        active_tape()->record(out, [x, out, rows, cols]() {
            x.ensure_grad();
            for (std::size_t r = 0; r < rows; ++r) {
                const double* y = out.values().data() + r * cols;
                const double* go = out.grad().data() + r * cols;
                double* gx = x.grad().data() + r * cols;
                double dot = 0.0;
                for (int j = 0; j < cols; ++j) dot += go[j] * y[j];
                for (int j = 0; j < cols; ++j) gx[j] += y[j] * (go[j] - dot);
            }
        });
    }
    return out;
}

Tensor relu(const Tensor& x) {
    Tensor out = Tensor::zeros(x.shape(), x.requires_grad());
    const std::size_t n = x.numel();
    for (std::size_t i = 0; i < n; ++i) out.values()[i] = std::max(0.0, x.values()[i]);
    if (wants_record({x})) {
        active_tape()->record(out, [x, out]() {
            x.ensure_grad();
            const std::size_t m = x.numel();
            for (std::size_t i = 0; i < m; ++i) {
                if (x.values()[i] > 0.0) x.grad()[i] += out.grad()[i];
            }
        });
    }
    return out;
}

Tensor elu_plus_one(const Tensor& x) {
    Tensor out = Tensor::zeros(x.shape(), x.requires_grad());
    const std::size_t n = x.numel();
    for (std::size_t i = 0; i < n; ++i) {
        const double v = x.values()[i];
        out.values()[i] = v > 0.0 ? v + 1.0 : std::exp(v);
    }
    if (wants_record({x})) {
        active_tape()->record(out, [x, out]() {
            x.ensure_grad();
            const std::size_t m = x.numel();
            for (std::size_t i = 0; i < m; ++i) {
                const double v = x.values()[i];
                x.grad()[i] += out.grad()[i] * (v > 0.0 ? 1.0 : out.values()[i]);
            }
        });
    }
    return out;
}

Tensor relu_pow(const Tensor& x, double p) {
    Tensor out = Tensor::zeros(x.shape(), x.requires_grad());
    const std::size_t n = x.numel();
    for (std::size_t i = 0; i < n; ++i) {
        const double v = x.values()[i];
        out.values()[i] = v > 0.0 ? std::pow(v, p) : 0.0;
    }
    if (wants_record({x})) {
        active_tape()->record(out, [x, out, p]() {
            x.ensure_grad();
            const std::size_t m = x.numel();
            for (std::size_t i = 0; i < m; ++i) {
                const double v = x.values()[i];
                if (v > 0.0) x.grad()[i] += out.grad()[i] * p * std::pow(v, p - 1.0);
            }
        });
    }
    return out;
}

Tensor clamp_negative(const Tensor& x, double value) {
    Tensor out = Tensor::zeros(x.shape(), x.requires_grad());
    const std::size_t n = x.numel();
    for (std::size_t i = 0; i < n; ++i) {
        const double v = x.values()[i];
        out.values()[i] = v < 0.0 ? value : v;
    }
    if (wants_record({x})) {
        active_tape()->record(out, [x, out]() {
            x.ensure_grad();
            const std::size_t m = x.numel();
            for (std::size_t i = 0; i < m; ++i) {
                if (x.values()[i] >= 0.0) x.grad()[i] += out.grad()[i];
            }
        });
    }
    return out;
}

Tensor div_scalar(const Tensor& x, const Tensor& s) {
    if (s.numel() != 1) {
        throw DimensionError("div_scalar: divisor must be a scalar tensor, got shape " +
                             shape_str(s.shape()));
    }
    const double sv = s.at(0);
    Tensor out = Tensor::zeros(x.shape(), any_requires({x, s}));
    const std::size_t n = x.numel();
    for (std::size_t i = 0; i < n; ++i) out.values()[i] = x.values()[i] / sv;
    if (wants_record({x, s})) {
        active_tape()->record(out, [x, s, out, sv]() {
            const std::size_t m = x.numel();
            if (x.requires_grad()) {
                x.ensure_grad();
                for (std::size_t i = 0; i < m; ++i) x.grad()[i] += out.grad()[i] / sv;
            }
            if (s.requires_grad()) {
                s.ensure_grad();
                double acc = 0.0;
                for (std::size_t i = 0; i < m; ++i) acc += out.grad()[i] * x.values()[i];
                s.grad()[0] += -acc / (sv * sv);
            }
        });
    }
    return out;
}

Tensor sum(const Tensor& x) {
    Tensor out = Tensor::zeros({1}, x.requires_grad());
    double acc = 0.0;
    for (double v : x.values()) acc += v;
    out.at(0) = acc;
    if (wants_record({x})) {
        active_tape()->record(out, [x, out]() {
            x.ensure_grad();
            const double g = out.grad()[0];
            const std::size_t m = x.numel();
            for (std::size_t i = 0; i < m; ++i) x.grad()[i] += g;
        });
    }
    return out;
}

Tensor slice_cols(const Tensor& x, int start, int len) {
    if (x.rank() != 2) throw DimensionError("slice_cols: expects rank 2, got " + shape_str(x.shape()));
    if (start < 0 || len < 1 || start + len > x.dim(1)) {
        throw DimensionError("slice_cols: range [" + std::to_string(start) + ", " +
                             std::to_string(start + len) + ") outside " + shape_str(x.shape()));
    }
    const int m = x.dim(0);
    Tensor out = Tensor::zeros({m, len}, x.requires_grad());
    for (int i = 0; i < m; ++i) {
        for (int c = 0; c < len; ++c) out.at(i, c) = x.at(i, start + c);
    }
    if (wants_record({x})) {
        active_tape()->record(out, [x, out, start, len, m]() {
            x.ensure_grad();
            for (int i = 0; i < m; ++i) {
                for (int c = 0; c < len; ++c) {
                    x.grad()[x.flat(i, start + c)] += out.grad()[out.flat(i, c)];
                }
            }
        });
    }
    return out;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw DimensionError("concat_cols: no inputs");
    const int m = parts.front().dim(0);
    int total = 0;
    bool req = false;
    for (const auto& p : parts) {
        if (p.rank() != 2 || p.dim(0) != m) {
            throw DimensionError("concat_cols: row counts disagree, " +
                                 shape_str(parts.front().shape()) + " vs " + shape_str(p.shape()));
        }
        total += p.dim(1);
        req = req || p.requires_grad();
    }
    Tensor out = Tensor::zeros({m, total}, req);
    int offset = 0;
    for (const auto& p : parts) {
        for (int i = 0; i < m; ++i) {
            for (int c = 0; c < p.dim(1); ++c) out.at(i, offset + c) = p.at(i, c);
        }
        offset += p.dim(1);
    }
    if (active_tape() && req) {
        active_tape()->record(out, [parts, out, m]() {
            int off = 0;
            for (auto& p : parts) {
                if (p.requires_grad()) {
                    p.ensure_grad();
                    for (int i = 0; i < m; ++i) {
                        for (int c = 0; c < p.dim(1); ++c) {
                            p.grad()[p.flat(i, c)] += out.grad()[out.flat(i, off + c)];
                        }
                    }
                }
                off += p.dim(1);
            }
        });
    }
    return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    if (x.rank() != 2) throw DimensionError("layer_norm: expects rank 2, got " + shape_str(x.shape()));
    const int m = x.dim(0), n = x.dim(1);
    if (gamma.rank() != 1 || gamma.dim(0) != n || beta.rank() != 1 || beta.dim(0) != n) {
        throw DimensionError("layer_norm: scale/shift must be [" + std::to_string(n) + "], got " +
                             shape_str(gamma.shape()) + " and " + shape_str(beta.shape()));
    }
    Tensor out = Tensor::zeros(x.shape(), any_requires({x, gamma, beta}));
    // Cached per-row inverse std and normalized values for the backward pass.
    auto inv_std = std::make_shared<std::vector<double>>(static_cast<std::size_t>(m));
    auto xhat = std::make_shared<std::vector<double>>(x.numel());
    for (int i = 0; i < m; ++i) {
        const double* row = x.values().data() + static_cast<std::size_t>(i) * n;
        double mean = 0.0;
        for (int j = 0; j < n; ++j) mean += row[j];
        mean /= n;
        double var = 0.0;
        for (int j = 0; j < n; ++j) {
            const double d = row[j] - mean;
            var += d * d;
        }
        var /= n;
        const double is = 1.0 / std::sqrt(var + eps);
        (*inv_std)[static_cast<std::size_t>(i)] = is;
        for (int j = 0; j < n; ++j) {
            const double xh = (row[j] - mean) * is;
            (*xhat)[static_cast<std::size_t>(i) * n + j] = xh;
            out.at(i, j) = gamma.at(j) * xh + beta.at(j);
        }
    }
    if (wants_record({x, gamma, beta})) {
        active_tape()->record(out, [x, gamma, beta, out, inv_std, xhat, m, n]() {
            for (int i = 0; i < m; ++i) {
                const double* go = out.grad().data() + static_cast<std::size_t>(i) * n;
                const double* xh = xhat->data() + static_cast<std::size_t>(i) * n;
                const double is = (*inv_std)[static_cast<std::size_t>(i)];
                if (gamma.requires_grad()) {
                    gamma.ensure_grad();
                    for (int j = 0; j < n; ++j) gamma.grad()[static_cast<std::size_t>(j)] += go[j] * xh[j];
                }
                if (beta.requires_grad()) {
                    beta.ensure_grad();
                    for (int j = 0; j < n; ++j) beta.grad()[static_cast<std::size_t>(j)] += go[j];
                }
                if (x.requires_grad()) {
                    x.ensure_grad();
                    double mean_g = 0.0, mean_gx = 0.0;
                    for (int j = 0; j < n; ++j) {
                        const double gh = go[j] * gamma.at(j);
                        mean_g += gh;
                        mean_gx += gh * xh[j];
                    }
                    mean_g /= n;
                    mean_gx /= n;
                    double* gx = x.grad().data() + static_cast<std::size_t>(i) * n;
                    for (int j = 0; j < n; ++j) {
                        const double gh = go[j] * gamma.at(j);
                        gx[j] += is * (gh - mean_g - xh[j] * mean_gx);
                    }
                }
            }
        });
    }
    return out;
}

Tensor dropout(const Tensor& x, double rate, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) {
        throw ConfigError("dropout: rate must be in [0, 1), got " + std::to_string(rate));
    }
    if (rate == 0.0) return x;
    const std::size_t n = x.numel();
    auto mask = std::make_shared<std::vector<double>>(n);
    const double keep = 1.0 - rate;
    for (std::size_t i = 0; i < n; ++i) (*mask)[i] = rng.uniform01() < keep ? 1.0 / keep : 0.0;
    Tensor out = Tensor::zeros(x.shape(), x.requires_grad());
    for (std::size_t i = 0; i < n; ++i) out.values()[i] = x.values()[i] * (*mask)[i];
    if (wants_record({x})) {
        active_tape()->record(out, [x, out, mask]() {
            x.ensure_grad();
            const std::size_t m = x.numel();
            for (std::size_t i = 0; i < m; ++i) x.grad()[i] += out.grad()[i] * (*mask)[i];
        });
    }
    return out;
}

}  // namespace subadj
