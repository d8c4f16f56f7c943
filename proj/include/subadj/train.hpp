#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "subadj/data.hpp"
#include "subadj/model.hpp"
#include "subadj/tensor.hpp"

namespace subadj {

struct TrainConfig {
    double lambda = 10.0;  // attention-loss weight
    double lr = 1e-4;
    int batch_size = 128;
    int max_epochs = 10;
    int patience = 3;
    double val_fraction = 0.1;
    std::uint64_t seed = 7;
    double subsample_ratio = 1.0;

    void validate() const;
};

enum class WindowMode { training, inference };

// Start offsets of win_size-long windows over a T-step series. Training
// keeps the floor(T/win) disjoint windows and drops the remainder;
// inference appends a final window ending at T when the remainder is
// nonzero (overlapping the previous one).
std::vector<int> make_window_starts(int total_steps, int win_size, WindowMode mode);

// Materialized windows of a series.
std::vector<Tensor> make_windows(const Matrix& series, int win_size, WindowMode mode);

Tensor window_tensor(const Matrix& series, int start, int win_size, bool requires_grad = false);

// Reconstruction and attention parts of the objective. total = rec when
// lambda == 0 (attn is left undefined and the contribution vector is not
// read); otherwise total = rec - lambda * attn.
struct LossParts {
    Tensor total;
    Tensor rec;
    Tensor attn;
};

LossParts loss_total(const Tensor& x, const Tensor& x_hat, const Tensor& sacon_vec, double lambda);

struct EpochLog {
    int epoch = 0;
    double loss_rec = 0.0;
    double loss_attn = 0.0;
    double loss_total = 0.0;
    double val_loss = 0.0;
    double mean_sacon = 0.0;
};

struct TrainingLog {
    std::vector<EpochLog> epochs;
    int best_epoch = 0;
    double best_val_loss = 0.0;
    int n_train_windows = 0;
    int n_val_windows = 0;
};

void write_training_log_csv(const std::string& path, const TrainingLog& log);

struct FitResult {
    ModelParams params;  // best-validation checkpoint
    TrainingLog log;
};

// Full optimization loop: shuffled batches, Adam, tau floor, patience-based
// early stopping on the validation split.
FitResult fit(const TimeSeriesDataset& ds, const ModelConfig& model_cfg, const TrainConfig& cfg);

}  // namespace subadj
