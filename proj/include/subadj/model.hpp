#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "subadj/attention.hpp"
#include "subadj/rng.hpp"
#include "subadj/tensor.hpp"

namespace subadj {

struct ModelConfig {
    int d_model = 512;
    int n_layers = 3;
    int n_heads = 8;
    int d_ff = 0;  // 0 means 4 * d_model
    int win_size = 100;
    int n_channels = 1;
    SubAdjacentSpan span;
    MappingConfig mapping;
    double dropout = 0.0;

    int head_dim() const { return d_model / n_heads; }
    int ffn_dim() const { return d_ff > 0 ? d_ff : 4 * d_model; }

    // Fills derived fields (span window) and checks invariants.
    void finalize();
    void validate() const;
};

struct LayerParams {
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;
    Tensor ln1_gamma, ln1_beta, ln2_gamma, ln2_beta;
    Tensor ffn_w1, ffn_b1, ffn_w2, ffn_b2;
    std::vector<Tensor> tau;  // one learnable temperature per head
};

struct ModelParams {
    Tensor input_w, input_b;  // n_channels -> d_model
    Tensor positional;        // fixed sinusoidal table, win_size x d_model
    std::vector<LayerParams> layers;
    Tensor final_gamma, final_beta;
    Tensor output_w, output_b;  // d_model -> n_channels

    // Learnable tensors in a stable order.
    std::vector<Tensor> all() const;
    std::vector<std::pair<std::string, Tensor>> named() const;

    // Clamp every temperature to at least the floor. Applied after each
    // optimizer step.
    void floor_tau(double floor_value = 1e-3);

    // Deep copy (checkpointing the best validation state).
    ModelParams clone() const;
};

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed);

struct ForwardResult {
    Tensor x_hat;
    AttentionState state;
};

// Runs the encoder on one window (win_size x n_channels). dropout_rng
// enables dropout masks during training; pass nullptr for inference.
ForwardResult forward(const Tensor& x, const ModelParams& params, const ModelConfig& cfg,
                      Rng* dropout_rng = nullptr);

// Text checkpoint of config plus named arrays; exact round-trip.
void save_checkpoint(const std::string& path, const ModelParams& params, const ModelConfig& cfg);
std::pair<ModelParams, ModelConfig> load_checkpoint(const std::string& path);

}  // namespace subadj
