#pragma once

#include <string>
#include <vector>

#include "subadj/ops.hpp"
#include "subadj/tensor.hpp"

namespace subadj {

// Bounds of the sub-adjacent neighborhood: timesteps whose distance to the
// target lies in [k1, k2]. k1 = k2 = 0 degenerates to the diagonal.
struct SubAdjacentSpan {
    int k1 = 20;
    int k2 = 30;
    int win_size = 100;

    void validate() const;
};

enum class MappingKind {
    learnable_row_softmax,
    column_softmax,
    power,
    relu,
    elu_plus_one,
    vanilla_self_attention,
};

MappingKind mapping_kind_from_string(const std::string& s);
std::string to_string(MappingKind kind);

struct MappingConfig {
    MappingKind kind = MappingKind::learnable_row_softmax;
    double clamp_value = -100.0;  // sentinel for negative Q/K entries
    double tau_init = 1.0;
    double power_exponent = 3.0;
    // Divide attention rows by their sums. Off by default: the row-softmax
    // factors carry the normalization.
    bool renormalize = false;

    void validate() const;
};

// Applies the mapping function to one matrix. tau is the learnable
// temperature used by learnable_row_softmax (defaults to tau_init when
// undefined); other kinds ignore it. vanilla_self_attention has no
// factor mapping, so the identity is returned.
Tensor map_phi(const Tensor& x, const MappingConfig& cfg, const Tensor& tau = {});

struct LinearAttentionResult {
    Tensor out;  // attention applied to values
    Tensor a;    // win x win attention matrix
};

// a = phi(Q) phi(K)^T and out = a V; for vanilla_self_attention,
// a = softmax(Q K^T / sqrt(d)) instead.
LinearAttentionResult linear_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                       const MappingConfig& cfg, const Tensor& tau = {});

// Sub-adjacent attention contribution per column, with wrapped indices:
// sacon[i] = sum over integer j with k1 <= |j - i| <= k2 of a[wrap(j), i].
// Differentiable; the gradient scatters into the stripe cells.
Tensor sacon(const Tensor& a, const SubAdjacentSpan& span);

// Same aggregate without wrapping (j clipped to [0, win)); marginal
// columns aggregate fewer cells. Kept for the stripe-balance checks.
std::vector<double> sacon_bounded(const Tensor& a, const SubAdjacentSpan& span);

// Computes the same vector from the mapped factor matrices by cyclically
// shifting phi_q row-wise. Test oracle for the wrapped form.
Tensor sacon_via_roll(const Tensor& phi_q, const Tensor& phi_k, const SubAdjacentSpan& span);

// Signed offsets delta with k1 <= |delta| <= k2, ascending.
std::vector<int> stripe_offsets(const SubAdjacentSpan& span);

// Per-window attention matrices and contribution vectors, layer-major and
// head-minor, plus their average. Reads of the aggregate are counted so
// the training loop can prove it never touches attention state when the
// attention loss is disabled.
struct AttentionState {
    int win_size = 0;
    int n_layers = 0;
    int n_heads = 0;
    std::vector<Tensor> a;           // n_layers * n_heads matrices
    std::vector<Tensor> sacon_vecs;  // n_layers * n_heads vectors

    const Tensor& attn(int layer, int head) const;
    const Tensor& sacon_vec(int layer, int head) const;

    // Average of sacon_vecs over layers and heads, as a recorded tensor.
    Tensor aggregated_sacon() const;

private:
    friend struct AttentionStateBuilder;
    Tensor mean_sacon_;
};

struct AttentionStateBuilder {
    static AttentionState build(int win_size, int n_layers, int n_heads, std::vector<Tensor> a,
                                std::vector<Tensor> sacon_vecs);
};

long attention_state_reads();
void reset_attention_state_reads();

}  // namespace subadj
