#include "subadj/score.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "subadj/train.hpp"

namespace subadj {

ScoreMode score_mode_from_string(const std::string& s) {
    if (s == "full") return ScoreMode::full;
    if (s == "raw" || s == "raw_reconstruction") return ScoreMode::raw_reconstruction;
    throw ConfigError("unknown score mode \"" + s + "\" (expected full or raw)");
}

std::string to_string(ScoreMode mode) {
    return mode == ScoreMode::full ? "full" : "raw_reconstruction";
}

void ScoreConfig::validate() const {
    if (gauss_window < 2) throw ConfigError("score: gauss_window must be >= 2");
    if (sigma_floor <= 0.0) throw ConfigError("score: sigma_floor must be > 0");
}

const std::vector<double>& ScoreSeries::eval_scores() const {
    return mode == ScoreMode::full ? dyn_score : rec_error;
}

std::vector<double> anomaly_score(const Tensor& window_x, const Tensor& window_x_hat,
                                  const std::vector<double>& sacon_vec) {
    if (window_x.shape() != window_x_hat.shape()) {
        throw DimensionError("anomaly_score: x " + shape_str(window_x.shape()) + " vs x_hat " +
                             shape_str(window_x_hat.shape()));
    }
    const int win = window_x.dim(0);
    const int d = window_x.dim(1);
    if (static_cast<int>(sacon_vec.size()) != win) {
        throw DimensionError("anomaly_score: contribution vector length " +
                             std::to_string(sacon_vec.size()) + " does not match window " +
                             std::to_string(win));
    }
    // softmax(-sacon) over the window's time axis
    double mx = -sacon_vec[0];
    for (int t = 1; t < win; ++t) mx = std::max(mx, -sacon_vec[static_cast<std::size_t>(t)]);
    std::vector<double> weights(static_cast<std::size_t>(win));
    double total = 0.0;
    for (int t = 0; t < win; ++t) {
        weights[static_cast<std::size_t>(t)] = std::exp(-sacon_vec[static_cast<std::size_t>(t)] - mx);
        total += weights[static_cast<std::size_t>(t)];
    }
    std::vector<double> out(static_cast<std::size_t>(win));
    for (int t = 0; t < win; ++t) {
        double rec = 0.0;
        for (int c = 0; c < d; ++c) {
            const double diff = window_x.at(t, c) - window_x_hat.at(t, c);
            rec += diff * diff;
        }
        out[static_cast<std::size_t>(t)] = weights[static_cast<std::size_t>(t)] / total * rec;
    }
    return out;
}

double normal_tail(double z) {
    double tail = 0.5 * std::erfc(z / std::sqrt(2.0));
    if (tail < 1e-300) tail = 1e-300;
    if (tail > 1.0) tail = 1.0;
    return tail;
}

double neg_log_normal_tail(double z) {
    const double x = z / std::sqrt(2.0);
    if (x < 25.0) {
        // erfc is far from underflow here; std::erfc is correctly rounded.
        return -std::log(0.5 * std::erfc(x));
    }
    // Underflow regime: log erfc(x) via the asymptotic expansion
    // erfc(x) = exp(-x^2) / (x sqrt(pi)) * (1 - 1/(2x^2) + 3/(4x^4) - ...),
    // keeping -log(1 - cdf(z)) strictly increasing instead of saturating.
    const double inv2 = 1.0 / (2.0 * x * x);
    const double series = std::log1p(-inv2 + 3.0 * inv2 * inv2);
    const double log_erfc = -x * x - std::log(x * std::sqrt(M_PI)) + series;
    return std::log(2.0) - log_erfc;
}

std::vector<double> dynamic_gaussian(const std::vector<double>& scores, const ScoreConfig& cfg) {
    cfg.validate();
    const int t_len = static_cast<int>(scores.size());
    std::vector<double> out(scores.size());
    // Prefix sums give O(1) trailing-window moments.
    std::vector<double> ps(scores.size() + 1, 0.0), ps2(scores.size() + 1, 0.0);
    for (int t = 0; t < t_len; ++t) {
        ps[static_cast<std::size_t>(t) + 1] = ps[static_cast<std::size_t>(t)] + scores[static_cast<std::size_t>(t)];
        ps2[static_cast<std::size_t>(t) + 1] =
            ps2[static_cast<std::size_t>(t)] + scores[static_cast<std::size_t>(t)] * scores[static_cast<std::size_t>(t)];
    }
    for (int t = 0; t < t_len; ++t) {
        const int lo = std::max(0, t - cfg.gauss_window + 1);
        const int count = t - lo + 1;
        const double s1 = ps[static_cast<std::size_t>(t) + 1] - ps[static_cast<std::size_t>(lo)];
        const double s2 = ps2[static_cast<std::size_t>(t) + 1] - ps2[static_cast<std::size_t>(lo)];
        const double mu = s1 / count;
        double var = s2 / count - mu * mu;
        if (var < 0.0) var = 0.0;
        const double sigma = std::max(std::sqrt(var), cfg.sigma_floor);
        const double denom = cfg.use_sigma_squared ? sigma * sigma : sigma;
        const double z = (scores[static_cast<std::size_t>(t)] - mu) / denom;
        out[static_cast<std::size_t>(t)] = neg_log_normal_tail(z);
    }
    return out;
}

ScoreSeries score_series(const TimeSeriesDataset& ds, const ModelParams& params,
                         const ModelConfig& model_cfg, const ScoreConfig& cfg) {
    cfg.validate();
    model_cfg.validate();
    if (!ds.normalized) throw ContractError("score_series: test data must be normalized first");
    if (ds.test.cols != model_cfg.n_channels) {
        throw DimensionError("score_series: dataset has " + std::to_string(ds.test.cols) +
                             " channels, model expects " + std::to_string(model_cfg.n_channels));
    }
    const int t_len = ds.test.rows;
    const int win = model_cfg.win_size;
    auto starts = make_window_starts(t_len, win, WindowMode::inference);

    ScoreSeries series;
    series.mode = cfg.mode;
    series.rec_error.assign(static_cast<std::size_t>(t_len), 0.0);
    series.sacon_value.assign(static_cast<std::size_t>(t_len), 0.0);
    if (cfg.mode == ScoreMode::full) {
        series.anomaly_score.assign(static_cast<std::size_t>(t_len), 0.0);
    }
    series.labels = ds.test_labels;

    for (int start : starts) {
        Tensor x = window_tensor(ds.test, start, win);
        auto res = forward(x, params, model_cfg);
        const Tensor sacon_vec = res.state.aggregated_sacon();
        const auto& sv = sacon_vec.values();
        std::vector<double> sacon_copy(sv.begin(), sv.end());
        std::vector<double> window_scores;
        if (cfg.mode == ScoreMode::full) {
            window_scores = anomaly_score(x, res.x_hat, sacon_copy);
        }
        for (int t = 0; t < win; ++t) {
            double rec = 0.0;
            for (int c = 0; c < model_cfg.n_channels; ++c) {
                const double diff = x.at(t, c) - res.x_hat.at(t, c);
                rec += diff * diff;
            }
            const std::size_t idx = static_cast<std::size_t>(start + t);
            series.rec_error[idx] = rec;
            series.sacon_value[idx] = sacon_copy[static_cast<std::size_t>(t)];
            if (cfg.mode == ScoreMode::full) {
                series.anomaly_score[idx] = window_scores[static_cast<std::size_t>(t)];
            }
        }
    }
    if (cfg.mode == ScoreMode::full) {
        series.dyn_score = dynamic_gaussian(series.anomaly_score, cfg);
    }
    return series;
}

void write_score_csv(const std::string& path, const ScoreSeries& series) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open score CSV for writing: " + path);
    const bool full = series.mode == ScoreMode::full;
    const bool labeled = !series.labels.empty();
    out << "t,rec_error,sacon";
    if (full) out << ",anomaly_score,dyn_score";
    if (labeled) out << ",label";
    out << "\n";
    char buf[160];
    for (std::size_t t = 0; t < series.rec_error.size(); ++t) {
        if (full) {
            std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g", t, series.rec_error[t],
                          series.sacon_value[t], series.anomaly_score[t], series.dyn_score[t]);
        } else {
            std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g", t, series.rec_error[t],
                          series.sacon_value[t]);
        }
        out << buf;
        if (labeled) out << "," << series.labels[t];
        out << "\n";
    }
    if (!out) throw IoError("failed writing score CSV: " + path);
}

}  // namespace subadj
