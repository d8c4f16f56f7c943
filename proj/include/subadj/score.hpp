#pragma once

#include <string>
#include <vector>

#include "subadj/data.hpp"
#include "subadj/model.hpp"

namespace subadj {

enum class ScoreMode { full, raw_reconstruction };

ScoreMode score_mode_from_string(const std::string& s);
std::string to_string(ScoreMode mode);

struct ScoreConfig {
    ScoreMode mode = ScoreMode::full;
    int gauss_window = 500;  // causal window for the dynamic Gaussian fit
    double sigma_floor = 1e-4;
    // true divides the deviation by sigma^2 instead of the conventional
    // z-score sigma. The sigma^2 form is scale sensitive and measurably
    // degrades detection, so it is off by default and kept as a switch.
    bool use_sigma_squared = false;

    void validate() const;
};

// Per-timestep columns over the full test series. anomaly_score and
// dyn_score stay empty in raw_reconstruction mode.
struct ScoreSeries {
    ScoreMode mode = ScoreMode::full;
    std::vector<double> rec_error;
    std::vector<double> sacon_value;
    std::vector<double> anomaly_score;
    std::vector<double> dyn_score;
    std::vector<int> labels;  // copied from the dataset when present

    // The column that feeds evaluation: dyn_score in full mode,
    // rec_error in raw mode.
    const std::vector<double>& eval_scores() const;
};

// Window-local score: softmax(-sacon) over the window's time axis times
// the per-timestep squared reconstruction error summed over channels.
std::vector<double> anomaly_score(const Tensor& window_x, const Tensor& window_x_hat,
                                  const std::vector<double>& sacon_vec);

// -log(1 - cdf(z_t)) with z_t = (s_t - mu_t) / sigma_t^2 (or / sigma_t),
// mu and sigma fitted over the trailing gauss_window scores, expanding at
// the series start, sigma floored.
std::vector<double> dynamic_gaussian(const std::vector<double>& scores, const ScoreConfig& cfg);

// Standard normal upper tail probability via erfc, floored so the log
// stays finite.
double normal_tail(double z);

// -log of the upper tail, continued through the erfc underflow regime by
// the asymptotic expansion so it stays strictly increasing and finite.
double neg_log_normal_tail(double z);

// Windows the test split, reconstructs, and stitches per-window vectors
// into series; a trailing overlapping window overwrites earlier values.
ScoreSeries score_series(const TimeSeriesDataset& ds, const ModelParams& params,
                         const ModelConfig& model_cfg, const ScoreConfig& cfg);

void write_score_csv(const std::string& path, const ScoreSeries& series);

}  // namespace subadj
