#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "subadj/errors.hpp"

namespace subadj {

// Plain row-major series storage: rows are timesteps, columns channels.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

    double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
};

struct TimeSeriesDataset {
    std::string name;
    Matrix train;
    Matrix test;
    std::vector<int> test_labels;  // empty when the test set is unlabeled
    std::vector<std::string> channels;
    // Per-channel statistics of the raw training split; filled by normalize().
    std::vector<double> mean;
    std::vector<double> stddev;
    bool normalized = false;
};

// Loads train/test CSVs (header row of channel names, one row per step).
// label_column, when non-empty, must exist in the test file and is parsed
// as binary labels; it is dropped from the channel set if the train file
// carries it too.
TimeSeriesDataset load_csv(const std::string& train_path, const std::string& test_path,
                           const std::string& label_column);

// Per-channel standardization with statistics from the training split
// only; stddev floored at 1e-8. Calling twice is a contract error.
TimeSeriesDataset normalize(TimeSeriesDataset ds);

// Inverse transform, for round-trip checks.
TimeSeriesDataset denormalize(TimeSeriesDataset ds);

enum class AnomalyKind { global, contextual, shapelet, seasonal, trend };

AnomalyKind anomaly_kind_from_string(const std::string& s);
std::string to_string(AnomalyKind kind);

struct SyntheticAnomaly {
    AnomalyKind kind = AnomalyKind::global;
    int position = 0;
    int span = 1;
    double magnitude = 1.0;
};

// Univariate sinusoid with Gaussian noise; anomalies are injected into the
// test split only and labeled exactly.
struct SyntheticSpec {
    int train_length = 20000;
    int test_length = 20000;
    double amplitude = 1.0;
    double period = 50.0;
    double noise_std = 0.3;
    std::uint64_t seed = 7;
    std::vector<SyntheticAnomaly> anomalies;

    void validate() const;
};

// Counts used when building a default anomaly mix. The defaults land the
// label rate at 4488 / 20000 test points.
struct SyntheticMix {
    int n_global = 44;
    int n_contextual = 44;
    int n_shapelet = 20;
    int span_shapelet = 80;
    int n_seasonal = 20;
    int span_seasonal = 70;
    int n_trend = 10;
    int span_trend = 140;
};

// Places the mix at seeded non-overlapping positions and returns the fully
// explicit spec.
SyntheticSpec make_default_spec(std::uint64_t seed, int train_length = 20000,
                                int test_length = 20000, const SyntheticMix& mix = {});

TimeSeriesDataset generate_synthetic(const SyntheticSpec& spec);

// CSV writers for generated datasets (decimal floats, comma-delimited).
void write_series_csv(const std::string& path, const Matrix& series,
                      const std::vector<std::string>& channels,
                      const std::vector<int>* labels = nullptr);

}  // namespace subadj
