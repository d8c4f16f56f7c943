#include "subadj/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "subadj/rng.hpp"

namespace subadj {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

struct CsvTable {
    std::vector<std::string> header;
    Matrix values;  // all columns, numeric
};

CsvTable read_csv_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open CSV file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw InputError("empty CSV file: " + path);
    CsvTable table;
    for (auto& h : split_csv_line(line)) table.header.push_back(trim(h));
    const int cols = static_cast<int>(table.header.size());
    if (cols == 0) throw InputError("CSV header has no columns: " + path);
    std::vector<double> cells;
    int row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        const auto fields = split_csv_line(line);
        if (static_cast<int>(fields.size()) != cols) {
            throw InputError(path + ": row " + std::to_string(row) + " has " +
                             std::to_string(fields.size()) + " fields, header has " +
                             std::to_string(cols));
        }
        for (int c = 0; c < cols; ++c) {
            const std::string f = trim(fields[static_cast<std::size_t>(c)]);
            try {
                std::size_t used = 0;
                const double v = std::stod(f, &used);
                if (used != f.size()) throw std::invalid_argument(f);
                cells.push_back(v);
            } catch (const std::exception&) {
                throw InputError(path + ": row " + std::to_string(row) + ", column \"" +
                                 table.header[static_cast<std::size_t>(c)] +
                                 "\": cannot parse \"" + f + "\" as a number");
            }
        }
    }
    table.values.rows = row ? static_cast<int>(cells.size()) / cols : 0;
    table.values.cols = cols;
    table.values.data = std::move(cells);
    if (table.values.rows == 0) throw InputError("CSV file has no data rows: " + path);
    return table;
}

int find_column(const std::vector<std::string>& header, const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return static_cast<int>(i);
    }
    return -1;
}

Matrix drop_column(const Matrix& m, int col) {
    if (col < 0) return m;
    Matrix out(m.rows, m.cols - 1);
    for (int r = 0; r < m.rows; ++r) {
        int oc = 0;
        for (int c = 0; c < m.cols; ++c) {
            if (c == col) continue;
            out.at(r, oc++) = m.at(r, c);
        }
    }
    return out;
}

}  // namespace

TimeSeriesDataset load_csv(const std::string& train_path, const std::string& test_path,
                           const std::string& label_column) {
    CsvTable train = read_csv_table(train_path);
    CsvTable test = read_csv_table(test_path);

    const int train_label_col = label_column.empty() ? -1 : find_column(train.header, label_column);
    const int test_label_col = label_column.empty() ? -1 : find_column(test.header, label_column);
    if (!label_column.empty() && test_label_col < 0) {
        throw InputError(test_path + ": label column \"" + label_column + "\" not found");
    }

    TimeSeriesDataset ds;
    ds.name = train_path;
    for (std::size_t i = 0; i < train.header.size(); ++i) {
        if (static_cast<int>(i) != train_label_col) ds.channels.push_back(train.header[i]);
    }
    std::vector<std::string> test_channels;
    for (std::size_t i = 0; i < test.header.size(); ++i) {
        if (static_cast<int>(i) != test_label_col) test_channels.push_back(test.header[i]);
    }
    if (ds.channels != test_channels) {
        throw InputError("train and test channel sets disagree between " + train_path + " and " +
                         test_path);
    }

    ds.train = drop_column(train.values, train_label_col);
    ds.test = drop_column(test.values, test_label_col);

    if (test_label_col >= 0) {
        ds.test_labels.reserve(static_cast<std::size_t>(test.values.rows));
        for (int r = 0; r < test.values.rows; ++r) {
            const double v = test.values.at(r, test_label_col);
            if (v != 0.0 && v != 1.0) {
                throw InputError(test_path + ": row " + std::to_string(r + 1) + ", column \"" +
                                 label_column + "\": label must be 0 or 1, got " +
                                 std::to_string(v));
            }
            ds.test_labels.push_back(v == 1.0 ? 1 : 0);
        }
    }
    return ds;
}

TimeSeriesDataset normalize(TimeSeriesDataset ds) {
    if (ds.normalized) throw ContractError("normalize: dataset is already normalized");
    const int d = ds.train.cols;
    ds.mean.assign(static_cast<std::size_t>(d), 0.0);
    ds.stddev.assign(static_cast<std::size_t>(d), 0.0);
    for (int c = 0; c < d; ++c) {
        double m = 0.0;
        for (int r = 0; r < ds.train.rows; ++r) m += ds.train.at(r, c);
        m /= ds.train.rows;
        double var = 0.0;
        for (int r = 0; r < ds.train.rows; ++r) {
            const double dv = ds.train.at(r, c) - m;
            var += dv * dv;
        }
        var /= ds.train.rows;
        ds.mean[static_cast<std::size_t>(c)] = m;
        ds.stddev[static_cast<std::size_t>(c)] = std::sqrt(var);
    }
    auto apply = [&](Matrix& mat) {
        for (int c = 0; c < d; ++c) {
            const double m = ds.mean[static_cast<std::size_t>(c)];
            const double s = std::max(ds.stddev[static_cast<std::size_t>(c)], 1e-8);
            for (int r = 0; r < mat.rows; ++r) mat.at(r, c) = (mat.at(r, c) - m) / s;
        }
    };
    apply(ds.train);
    apply(ds.test);
    ds.normalized = true;
    return ds;
}

TimeSeriesDataset denormalize(TimeSeriesDataset ds) {
    if (!ds.normalized) throw ContractError("denormalize: dataset is not normalized");
    const int d = ds.train.cols;
    auto apply = [&](Matrix& mat) {
        for (int c = 0; c < d; ++c) {
            const double m = ds.mean[static_cast<std::size_t>(c)];
            const double s = std::max(ds.stddev[static_cast<std::size_t>(c)], 1e-8);
            for (int r = 0; r < mat.rows; ++r) mat.at(r, c) = mat.at(r, c) * s + m;
        }
    };
    apply(ds.train);
    apply(ds.test);
    ds.normalized = false;
    return ds;
}

AnomalyKind anomaly_kind_from_string(const std::string& s) {
    if (s == "global") return AnomalyKind::global;
    if (s == "contextual") return AnomalyKind::contextual;
    if (s == "shapelet") return AnomalyKind::shapelet;
    if (s == "seasonal") return AnomalyKind::seasonal;
    if (s == "trend") return AnomalyKind::trend;
    throw ConfigError("unknown anomaly kind \"" + s + "\"");
}

std::string to_string(AnomalyKind kind) {
    switch (kind) {
        case AnomalyKind::global: return "global";
        case AnomalyKind::contextual: return "contextual";
        case AnomalyKind::shapelet: return "shapelet";
        case AnomalyKind::seasonal: return "seasonal";
        case AnomalyKind::trend: return "trend";
    }
    throw ConfigError("unknown anomaly kind enum value");
}

void SyntheticSpec::validate() const {
    if (train_length < 1 || test_length < 1) throw ConfigError("synthetic: lengths must be >= 1");
    if (amplitude <= 0.0 || period <= 1.0) {
        throw ConfigError("synthetic: amplitude must be > 0 and period > 1");
    }
    if (noise_std < 0.0) throw ConfigError("synthetic: noise_std must be >= 0");
    std::vector<std::pair<int, int>> segments;
    for (const auto& a : anomalies) {
        if (a.span < 1) throw ConfigError("synthetic: anomaly span must be >= 1");
        if (a.position < 0 || a.position + a.span > test_length) {
            throw ConfigError("synthetic: anomaly at " + std::to_string(a.position) + " span " +
                              std::to_string(a.span) + " exceeds test length " +
                              std::to_string(test_length));
        }
        segments.emplace_back(a.position, a.position + a.span);
    }
    std::sort(segments.begin(), segments.end());
    for (std::size_t i = 1; i < segments.size(); ++i) {
        if (segments[i].first < segments[i - 1].second) {
            throw ConfigError("synthetic: overlapping anomaly segments at position " +
                              std::to_string(segments[i].first));
        }
    }
}

SyntheticSpec make_default_spec(std::uint64_t seed, int train_length, int test_length,
                                const SyntheticMix& mix) {
    SyntheticSpec spec;
    spec.train_length = train_length;
    spec.test_length = test_length;
    spec.seed = seed;
    Rng rng(seed ^ 0x5eedfacedeadbeefULL);

    struct Request {
        AnomalyKind kind;
        int span;
    };
    std::vector<Request> requests;
    for (int i = 0; i < mix.n_shapelet; ++i) requests.push_back({AnomalyKind::shapelet, mix.span_shapelet});
    for (int i = 0; i < mix.n_seasonal; ++i) requests.push_back({AnomalyKind::seasonal, mix.span_seasonal});
    for (int i = 0; i < mix.n_trend; ++i) requests.push_back({AnomalyKind::trend, mix.span_trend});
    for (int i = 0; i < mix.n_global; ++i) requests.push_back({AnomalyKind::global, 1});
    for (int i = 0; i < mix.n_contextual; ++i) requests.push_back({AnomalyKind::contextual, 1});

    // Greedy seeded placement with a guard gap so distinct anomalies never
    // merge into one labeled segment.
    const int gap = 3;
    std::vector<std::pair<int, int>> taken;
    auto fits = [&](int pos, int span) {
        for (const auto& [s, e] : taken) {
            if (pos < e + gap && s < pos + span + gap) return false;
        }
        return true;
    };
    for (const auto& req : requests) {
        const int limit = spec.test_length - req.span;
        if (limit < 1) throw ConfigError("synthetic: test_length too small for requested anomalies");
        bool placed = false;
        for (int attempt = 0; attempt < 10000 && !placed; ++attempt) {
            const int pos = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(limit)));
            if (!fits(pos, req.span)) continue;
            taken.emplace_back(pos, pos + req.span);
            SyntheticAnomaly a;
            a.kind = req.kind;
            a.position = pos;
            a.span = req.span;
            switch (req.kind) {
                case AnomalyKind::global: a.magnitude = rng.uniform(1.8, 3.0); break;
                case AnomalyKind::contextual: a.magnitude = rng.uniform(0.6, 1.0); break;
                case AnomalyKind::shapelet: a.magnitude = rng.uniform(0.8, 1.1); break;
                case AnomalyKind::seasonal: a.magnitude = rng.uniform(2.0, 2.5); break;
                case AnomalyKind::trend: a.magnitude = rng.uniform(0.5, 1.0); break;
            }
            spec.anomalies.push_back(a);
            placed = true;
        }
        if (!placed) {
            throw ConfigError("synthetic: could not place all anomalies; reduce counts or spans");
        }
    }
    std::sort(spec.anomalies.begin(), spec.anomalies.end(),
              [](const SyntheticAnomaly& a, const SyntheticAnomaly& b) {
                  return a.position < b.position;
              });
    spec.validate();
    return spec;
}

TimeSeriesDataset generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    const double two_pi = 2.0 * M_PI;
    auto base = [&](int t) { return spec.amplitude * std::sin(two_pi * t / spec.period); };
    // Standard deviation of the noiseless sinusoid, the magnitude unit.
    const double sig = spec.amplitude / std::sqrt(2.0);

    TimeSeriesDataset ds;
    ds.name = "synthetic";
    ds.channels = {"value"};
    ds.train = Matrix(spec.train_length, 1);
    for (int t = 0; t < spec.train_length; ++t) {
        ds.train.at(t, 0) = base(t) + spec.noise_std * rng.gauss();
    }
    ds.test = Matrix(spec.test_length, 1);
    for (int t = 0; t < spec.test_length; ++t) {
        ds.test.at(t, 0) = base(t) + spec.noise_std * rng.gauss();
    }
    ds.test_labels.assign(static_cast<std::size_t>(spec.test_length), 0);

    for (const auto& a : spec.anomalies) {
        switch (a.kind) {
            case AnomalyKind::global: {
                const double sign = rng.uniform01() < 0.5 ? -1.0 : 1.0;
                ds.test.at(a.position, 0) += sign * a.magnitude * sig;
                break;
            }
            case AnomalyKind::contextual: {
                // Extreme against the local context yet inside the global
                // envelope: jump to the far side of the waveform range.
                const double b = base(a.position);
                const double sign = b >= 0.0 ? -1.0 : 1.0;
                const double target = sign * std::min(0.95 * spec.amplitude, a.magnitude * sig);
                ds.test.at(a.position, 0) = target + spec.noise_std * rng.gauss();
                break;
            }
            case AnomalyKind::shapelet: {
                // Segment replaced by a triangle waveform: same scale and
                // period, different shape.
                for (int t = a.position; t < a.position + a.span; ++t) {
                    const double phase = std::fmod(static_cast<double>(t) / spec.period, 1.0);
                    const double tri = phase < 0.25   ? 4.0 * phase
                                       : phase < 0.75 ? 2.0 - 4.0 * phase
                                                      : 4.0 * phase - 4.0;
                    ds.test.at(t, 0) =
                        a.magnitude * spec.amplitude * tri + spec.noise_std * rng.gauss();
                }
                break;
            }
            case AnomalyKind::seasonal: {
                // Same waveform at a multiplied frequency.
                const double mult = std::max(2.0, std::round(a.magnitude));
                for (int t = a.position; t < a.position + a.span; ++t) {
                    ds.test.at(t, 0) =
                        spec.amplitude * std::sin(two_pi * mult * t / spec.period) +
                        spec.noise_std * rng.gauss();
                }
                break;
            }
            case AnomalyKind::trend: {
                const double sign = rng.uniform01() < 0.5 ? -1.0 : 1.0;
                for (int t = a.position; t < a.position + a.span; ++t) {
                    const double frac = static_cast<double>(t - a.position + 1) / a.span;
                    ds.test.at(t, 0) += sign * a.magnitude * sig * frac;
                }
                break;
            }
        }
        for (int t = a.position; t < a.position + a.span; ++t) {
            ds.test_labels[static_cast<std::size_t>(t)] = 1;
        }
    }
    return ds;
}

void write_series_csv(const std::string& path, const Matrix& series,
                      const std::vector<std::string>& channels, const std::vector<int>* labels) {
    if (static_cast<int>(channels.size()) != series.cols) {
        throw InputError("write_series_csv: channel names do not match series columns");
    }
    if (labels && static_cast<int>(labels->size()) != series.rows) {
        throw InputError("write_series_csv: labels length does not match series rows");
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    for (std::size_t i = 0; i < channels.size(); ++i) {
        if (i) out << ",";
        out << channels[i];
    }
    if (labels) out << ",label";
    out << "\n";
    char buf[32];
    for (int r = 0; r < series.rows; ++r) {
        for (int c = 0; c < series.cols; ++c) {
            if (c) out << ",";
            std::snprintf(buf, sizeof(buf), "%.17g", series.at(r, c));
            out << buf;
        }
        if (labels) out << "," << (*labels)[static_cast<std::size_t>(r)];
        out << "\n";
    }
    if (!out) throw IoError("failed writing " + path);
}

}  // namespace subadj
