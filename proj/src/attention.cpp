#include "subadj/attention.hpp"

#include <atomic>
#include <cmath>

namespace subadj {

namespace {
std::atomic<long> g_state_reads{0};
}

void SubAdjacentSpan::validate() const {
    if (win_size < 1) throw ConfigError("span: win_size must be >= 1, got " + std::to_string(win_size));
    if (k1 < 0 || k2 < k1 || k2 >= win_size) {
        throw ConfigError("span: bounds must satisfy 0 <= k1 <= k2 < win_size, got k1=" +
                          std::to_string(k1) + " k2=" + std::to_string(k2) + " win_size=" +
                          std::to_string(win_size));
    }
}

MappingKind mapping_kind_from_string(const std::string& s) {
    if (s == "learnable_row_softmax") return MappingKind::learnable_row_softmax;
    if (s == "column_softmax") return MappingKind::column_softmax;
    if (s == "power") return MappingKind::power;
    if (s == "relu") return MappingKind::relu;
    if (s == "elu_plus_one") return MappingKind::elu_plus_one;
    if (s == "vanilla_self_attention") return MappingKind::vanilla_self_attention;
    throw ConfigError("unknown mapping kind \"" + s + "\"");
}

std::string to_string(MappingKind kind) {
    switch (kind) {
        case MappingKind::learnable_row_softmax: return "learnable_row_softmax";
        case MappingKind::column_softmax: return "column_softmax";
        case MappingKind::power: return "power";
        case MappingKind::relu: return "relu";
        case MappingKind::elu_plus_one: return "elu_plus_one";
        case MappingKind::vanilla_self_attention: return "vanilla_self_attention";
    }
    throw ConfigError("unknown mapping kind enum value");
}

void MappingConfig::validate() const {
    if (clamp_value >= 0.0) {
        throw ConfigError("mapping: clamp_value must be negative, got " + std::to_string(clamp_value));
    }
    if (tau_init <= 0.0) {
        throw ConfigError("mapping: tau_init must be positive, got " + std::to_string(tau_init));
    }
}

Tensor map_phi(const Tensor& x, const MappingConfig& cfg, const Tensor& tau) {
    cfg.validate();
    switch (cfg.kind) {
        case MappingKind::learnable_row_softmax: {
            // Negative entries are pinned to the sentinel before the
            // temperature division so their suppression strength does not
            // depend on tau.
            Tensor t = tau.defined() ? tau : Tensor::scalar(cfg.tau_init);
            return softmax_rows(div_scalar(clamp_negative(x, cfg.clamp_value), t));
        }
        case MappingKind::column_softmax:
            return transpose(softmax_rows(transpose(x)));
        case MappingKind::power:
            return relu_pow(x, cfg.power_exponent);
        case MappingKind::relu:
            return relu(x);
        case MappingKind::elu_plus_one:
            return elu_plus_one(x);
        case MappingKind::vanilla_self_attention:
            // No factor mapping exists; the attention path softmaxes the
            // score matrix directly.
            return x;
    }
    throw ConfigError("map_phi: unknown mapping kind");
}

namespace {

// Row normalization used by the optional renormalize switch.
Tensor normalize_rows(const Tensor& a) {
    const int m = a.dim(0), n = a.dim(1);
    Tensor out = Tensor::zeros(a.shape(), a.requires_grad());
    auto sums = std::make_shared<std::vector<double>>(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
        double s = 0.0;
        for (int j = 0; j < n; ++j) s += a.at(i, j);
        if (std::abs(s) < 1e-12) s = s < 0.0 ? -1e-12 : 1e-12;
        (*sums)[static_cast<std::size_t>(i)] = s;
        for (int j = 0; j < n; ++j) out.at(i, j) = a.at(i, j) / s;
    }
    if (active_tape() && a.requires_grad()) {
        active_tape()->record(out, [a, out, sums, m, n]() {
            a.ensure_grad();
            for (int i = 0; i < m; ++i) {
                const double s = (*sums)[static_cast<std::size_t>(i)];
                double dot = 0.0;
                for (int j = 0; j < n; ++j) dot += out.grad()[out.flat(i, j)] * a.at(i, j);
                for (int j = 0; j < n; ++j) {
                    a.grad()[a.flat(i, j)] += out.grad()[out.flat(i, j)] / s - dot / (s * s);
                }
            }
        });
    }
    return out;
}

}  // namespace

LinearAttentionResult linear_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                       const MappingConfig& cfg, const Tensor& tau) {
    if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2) {
        throw DimensionError("linear_attention: q, k, v must be rank 2");
    }
    if (q.dim(0) != k.dim(0) || q.dim(0) != v.dim(0)) {
        throw DimensionError("linear_attention: q, k, v row counts disagree, " +
                             shape_str(q.shape()) + " vs " + shape_str(k.shape()) + " vs " +
                             shape_str(v.shape()));
    }
    if (q.dim(1) != k.dim(1)) {
        throw DimensionError("linear_attention: q and k feature dims disagree, " +
                             shape_str(q.shape()) + " vs " + shape_str(k.shape()));
    }
    LinearAttentionResult res;
    if (cfg.kind == MappingKind::vanilla_self_attention) {
        const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(q.dim(1)));
        res.a = softmax_rows(scale(matmul(q, transpose(k)), inv_sqrt_d));
    } else {
        Tensor pq = map_phi(q, cfg, tau);
        Tensor pk = map_phi(k, cfg, tau);
        res.a = matmul(pq, transpose(pk));
        if (cfg.renormalize) res.a = normalize_rows(res.a);
    }
    res.out = matmul(res.a, v);
    return res;
}

std::vector<int> stripe_offsets(const SubAdjacentSpan& span) {
    span.validate();
    std::vector<int> deltas;
    for (int d = -span.k2; d <= -span.k1; ++d) deltas.push_back(d);
    for (int d = span.k1; d <= span.k2; ++d) {
        if (d == 0 && !deltas.empty() && deltas.back() == 0) continue;  // k1 == 0 counts 0 once
        deltas.push_back(d);
    }
    return deltas;
}

namespace {
inline int wrap_index(int j, int win) {
    if (j < 0) return j + win;
    if (j >= win) return j - win;
    return j;
}
}  // namespace

Tensor sacon(const Tensor& a, const SubAdjacentSpan& span) {
    span.validate();
    if (a.rank() != 2 || a.dim(0) != a.dim(1)) {
        throw DimensionError("sacon: expects a square matrix, got " + shape_str(a.shape()));
    }
    if (a.dim(0) != span.win_size) {
        throw ConfigError("sacon: span win_size " + std::to_string(span.win_size) +
                          " does not match matrix " + shape_str(a.shape()));
    }
    const int win = span.win_size;
    const auto deltas = stripe_offsets(span);
    Tensor out = Tensor::zeros({win}, a.requires_grad());
    for (int i = 0; i < win; ++i) {
        double acc = 0.0;
        for (int d : deltas) acc += a.at(wrap_index(i + d, win), i);
        out.at(i) = acc;
    }
    if (active_tape() && a.requires_grad()) {
        active_tape()->record(out, [a, out, deltas, win]() {
            a.ensure_grad();
            for (int i = 0; i < win; ++i) {
                const double g = out.grad()[static_cast<std::size_t>(i)];
                for (int d : deltas) a.grad()[a.flat(wrap_index(i + d, win), i)] += g;
            }
        });
    }
    return out;
}

std::vector<double> sacon_bounded(const Tensor& a, const SubAdjacentSpan& span) {
    span.validate();
    if (a.rank() != 2 || a.dim(0) != a.dim(1) || a.dim(0) != span.win_size) {
        throw DimensionError("sacon_bounded: expects a win x win matrix, got " + shape_str(a.shape()));
    }
    const int win = span.win_size;
    const auto deltas = stripe_offsets(span);
    std::vector<double> out(static_cast<std::size_t>(win), 0.0);
    for (int i = 0; i < win; ++i) {
        for (int d : deltas) {
            const int j = i + d;
            if (j < 0 || j >= win) continue;
            out[static_cast<std::size_t>(i)] += a.at(j, i);
        }
    }
    return out;
}

Tensor sacon_via_roll(const Tensor& phi_q, const Tensor& phi_k, const SubAdjacentSpan& span) {
    span.validate();
    if (phi_q.rank() != 2 || phi_k.rank() != 2 || phi_q.shape() != phi_k.shape()) {
        throw DimensionError("sacon_via_roll: factor shapes disagree, " + shape_str(phi_q.shape()) +
                             " vs " + shape_str(phi_k.shape()));
    }
    if (phi_q.dim(0) != span.win_size) {
        throw ConfigError("sacon_via_roll: span win_size does not match factors");
    }
    const int win = span.win_size;
    const int d_feat = phi_q.dim(1);
    Tensor out = Tensor::zeros({win});
    // For a fixed offset delta = j - i the shift s = i - j is constant, so
    // each stripe diagonal reuses one cyclically shifted copy of phi_q.
    for (int delta : stripe_offsets(span)) {
        const int shift = -delta;
        Tensor rolled = Tensor::zeros({win, d_feat});
        for (int r = 0; r < win; ++r) {
            int src = (r - shift) % win;
            if (src < 0) src += win;
            for (int c = 0; c < d_feat; ++c) rolled.at(r, c) = phi_q.at(src, c);
        }
        for (int i = 0; i < win; ++i) {
            double dot = 0.0;
            for (int c = 0; c < d_feat; ++c) dot += rolled.at(i, c) * phi_k.at(i, c);
            out.at(i) += dot;
        }
    }
    return out;
}

const Tensor& AttentionState::attn(int layer, int head) const {
    return a[static_cast<std::size_t>(layer * n_heads + head)];
}

const Tensor& AttentionState::sacon_vec(int layer, int head) const {
    return sacon_vecs[static_cast<std::size_t>(layer * n_heads + head)];
}

Tensor AttentionState::aggregated_sacon() const {
    g_state_reads.fetch_add(1, std::memory_order_relaxed);
    return mean_sacon_;
}

AttentionState AttentionStateBuilder::build(int win_size, int n_layers, int n_heads,
                                            std::vector<Tensor> a, std::vector<Tensor> sacon_vecs) {
    AttentionState st;
    st.win_size = win_size;
    st.n_layers = n_layers;
    st.n_heads = n_heads;
    st.a = std::move(a);
    st.sacon_vecs = std::move(sacon_vecs);
    Tensor acc = st.sacon_vecs.front();
    for (std::size_t i = 1; i < st.sacon_vecs.size(); ++i) acc = add(acc, st.sacon_vecs[i]);
    st.mean_sacon_ = scale(acc, 1.0 / static_cast<double>(st.sacon_vecs.size()));
    return st;
}

long attention_state_reads() { return g_state_reads.load(); }

void reset_attention_state_reads() { g_state_reads.store(0); }

}  // namespace subadj
