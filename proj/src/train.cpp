#include "subadj/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>

#include "subadj/adam.hpp"
#include "subadj/ops.hpp"

namespace subadj {

void TrainConfig::validate() const {
    if (lambda < 0.0) throw ConfigError("train: lambda must be >= 0, got " + std::to_string(lambda));
    if (lr <= 0.0) throw ConfigError("train: lr must be > 0");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (max_epochs < 1) throw ConfigError("train: max_epochs must be >= 1");
    if (patience < 1) throw ConfigError("train: patience must be >= 1");
    if (val_fraction <= 0.0 || val_fraction >= 1.0) {
        throw ConfigError("train: val_fraction must be in (0, 1)");
    }
    if (subsample_ratio <= 0.0 || subsample_ratio > 1.0) {
        throw ConfigError("train: subsample_ratio must be in (0, 1]");
    }
}

std::vector<int> make_window_starts(int total_steps, int win_size, WindowMode mode) {
    if (win_size < 1) throw ConfigError("make_windows: win_size must be >= 1");
    if (total_steps < win_size) {
        throw InputError("make_windows: series length " + std::to_string(total_steps) +
                         " is shorter than window " + std::to_string(win_size));
    }
    std::vector<int> starts;
    const int full = total_steps / win_size;
    for (int i = 0; i < full; ++i) starts.push_back(i * win_size);
    if (mode == WindowMode::inference && total_steps % win_size != 0) {
        starts.push_back(total_steps - win_size);
    }
    return starts;
}

Tensor window_tensor(const Matrix& series, int start, int win_size, bool requires_grad) {
    Tensor w = Tensor::zeros({win_size, series.cols}, requires_grad);
    for (int r = 0; r < win_size; ++r) {
        for (int c = 0; c < series.cols; ++c) w.at(r, c) = series.at(start + r, c);
    }
    return w;
}

std::vector<Tensor> make_windows(const Matrix& series, int win_size, WindowMode mode) {
    std::vector<Tensor> out;
    for (int s : make_window_starts(series.rows, win_size, mode)) {
        out.push_back(window_tensor(series, s, win_size));
    }
    return out;
}

LossParts loss_total(const Tensor& x, const Tensor& x_hat, const Tensor& sacon_vec, double lambda) {
    if (lambda < 0.0) throw ConfigError("loss_total: lambda must be >= 0");
    if (x.shape() != x_hat.shape()) {
        throw DimensionError("loss_total: x " + shape_str(x.shape()) + " vs x_hat " +
                             shape_str(x_hat.shape()));
    }
    if (sacon_vec.rank() != 1 || sacon_vec.dim(0) != x.dim(0)) {
        throw DimensionError("loss_total: contribution vector " + shape_str(sacon_vec.shape()) +
                             " does not match window length " + std::to_string(x.dim(0)));
    }
    LossParts parts;
    Tensor diff = sub(x, x_hat);
    parts.rec = sum(mul(diff, diff));
    if (lambda > 0.0) {
        parts.attn = sum(sacon_vec);
        parts.total = sub(parts.rec, scale(parts.attn, lambda));
    } else {
        parts.total = parts.rec;
    }
    return parts;
}

void write_training_log_csv(const std::string& path, const TrainingLog& log) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open training log for writing: " + path);
    out << "epoch,loss_rec,loss_attn,loss_total,val_loss,mean_sacon\n";
    char buf[128];
    for (const auto& e : log.epochs) {
        std::snprintf(buf, sizeof(buf), "%d,%.10g,%.10g,%.10g,%.10g,%.10g\n", e.epoch, e.loss_rec,
                      e.loss_attn, e.loss_total, e.val_loss, e.mean_sacon);
        out << buf;
    }
    if (!out) throw IoError("failed writing training log: " + path);
}

namespace {

struct ValStats {
    double loss = 0.0;
    double mean_sacon = 0.0;
};

ValStats validation_stats(const std::vector<Tensor>& val_windows, const ModelParams& params,
                          const ModelConfig& model_cfg, double lambda) {
    ValStats stats;
    for (const auto& w : val_windows) {
        auto res = forward(w, params, model_cfg);
        double rec = 0.0;
        const auto& xv = w.values();
        const auto& rv = res.x_hat.values();
        for (std::size_t i = 0; i < xv.size(); ++i) {
            const double d = xv[i] - rv[i];
            rec += d * d;
        }
        double total = rec;
        if (lambda > 0.0) {
            const Tensor sv = res.state.aggregated_sacon();
            double attn = 0.0;
            for (double v : sv.values()) attn += v;
            total = rec - lambda * attn;
            stats.mean_sacon += attn / static_cast<double>(sv.numel());
        }
        stats.loss += total;
    }
    stats.loss /= static_cast<double>(val_windows.size());
    stats.mean_sacon /= static_cast<double>(val_windows.size());
    return stats;
}

}  // namespace

FitResult fit(const TimeSeriesDataset& ds, const ModelConfig& model_cfg, const TrainConfig& cfg) {
    cfg.validate();
    model_cfg.validate();
    if (!ds.normalized) throw ContractError("fit: training data must be normalized first");
    if (ds.train.cols != model_cfg.n_channels) {
        throw DimensionError("fit: dataset has " + std::to_string(ds.train.cols) +
                             " channels, model expects " + std::to_string(model_cfg.n_channels));
    }

    const int usable = static_cast<int>(std::floor(ds.train.rows * cfg.subsample_ratio));
    if (usable < model_cfg.win_size) {
        throw InputError("fit: subsampled training series (" + std::to_string(usable) +
                         " steps) is shorter than one window");
    }
    auto starts = make_window_starts(usable, model_cfg.win_size, WindowMode::training);

    Rng rng(cfg.seed);
    std::vector<Tensor> windows;
    windows.reserve(starts.size());
    for (int s : starts) windows.push_back(window_tensor(ds.train, s, model_cfg.win_size));
    rng.shuffle(windows);

    const int n = static_cast<int>(windows.size());
    int n_val = std::max(1, static_cast<int>(std::floor(n * cfg.val_fraction)));
    if (n_val >= n) {
        throw InputError("fit: not enough windows (" + std::to_string(n) +
                         ") for a validation split");
    }
    std::vector<Tensor> val_windows(windows.end() - n_val, windows.end());
    std::vector<Tensor> train_windows(windows.begin(), windows.end() - n_val);

    ModelParams params = init_params(model_cfg, cfg.seed);
    AdamState adam(params.all(), cfg.lr);

    FitResult result;
    result.params = params.clone();
    result.log.best_val_loss = std::numeric_limits<double>::infinity();
    result.log.n_train_windows = static_cast<int>(train_windows.size());
    result.log.n_val_windows = n_val;
    int stale_epochs = 0;

    Rng dropout_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        rng.shuffle(train_windows);
        double epoch_rec = 0.0, epoch_attn = 0.0, epoch_total = 0.0;
        const int n_train = static_cast<int>(train_windows.size());
        for (int batch_start = 0; batch_start < n_train; batch_start += cfg.batch_size) {
            const int batch_end = std::min(batch_start + cfg.batch_size, n_train);
            const int batch_n = batch_end - batch_start;
            Tape tape;
            TapeScope scope(tape);
            Tensor batch_total;
            for (int i = batch_start; i < batch_end; ++i) {
                const Tensor& w = train_windows[static_cast<std::size_t>(i)];
                auto res = forward(w, params, model_cfg,
                                   model_cfg.dropout > 0.0 ? &dropout_rng : nullptr);
                LossParts parts =
                    cfg.lambda > 0.0
                        ? loss_total(w, res.x_hat, res.state.aggregated_sacon(), cfg.lambda)
                        : loss_total(w, res.x_hat, Tensor::zeros({model_cfg.win_size}), cfg.lambda);
                epoch_rec += parts.rec.item();
                epoch_attn += parts.attn.defined() ? parts.attn.item() : 0.0;
                epoch_total += parts.total.item();
                batch_total = batch_total.defined() ? add(batch_total, parts.total) : parts.total;
            }
            Tensor batch_loss = scale(batch_total, 1.0 / batch_n);
            const double loss_value = batch_loss.item();
            if (!std::isfinite(loss_value)) {
                throw NumericalError(
                    "fit: non-finite loss at epoch " + std::to_string(epoch) + ", batch starting " +
                    std::to_string(batch_start) + " (windows " + std::to_string(batch_n) +
                    ", last epoch mean rec " + std::to_string(epoch_rec / std::max(1, batch_end)) +
                    ")");
            }
            adam.zero_grad();
            tape.backward(batch_loss);
            if (!adam.step()) {
                std::cerr << "warning: " << adam.last_warning() << "\n";
            }
            params.floor_tau();
        }

        ValStats val = validation_stats(val_windows, params, model_cfg, cfg.lambda);

        EpochLog entry;
        entry.epoch = epoch;
        entry.loss_rec = epoch_rec / n_train;
        entry.loss_attn = epoch_attn / n_train;
        entry.loss_total = epoch_total / n_train;
        entry.val_loss = val.loss;
        entry.mean_sacon = val.mean_sacon;
        result.log.epochs.push_back(entry);

        if (val.loss < result.log.best_val_loss) {
            result.log.best_val_loss = val.loss;
            result.log.best_epoch = epoch;
            result.params = params.clone();
            stale_epochs = 0;
        } else {
            ++stale_epochs;
            if (stale_epochs >= cfg.patience) break;
        }
    }
    return result;
}

}  // namespace subadj
