#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "subadj/data.hpp"

using namespace subadj;

namespace {

namespace fs = std::filesystem;

// Default mix scaled down for short test series (~22.4% label rate).
SyntheticMix small_mix(int scale_divisor) {
    SyntheticMix mix;
    mix.n_global = std::max(1, 44 / scale_divisor);
    mix.n_contextual = std::max(1, 44 / scale_divisor);
    mix.n_shapelet = std::max(1, 20 / scale_divisor);
    mix.n_seasonal = std::max(1, 20 / scale_divisor);
    mix.n_trend = std::max(1, 10 / scale_divisor);
    return mix;
}

struct TempDir {
    fs::path dir;
    TempDir() {
        dir = fs::temp_directory_path() / ("subadj_data_" + std::to_string(::getpid()));
        fs::create_directories(dir);
    }
    ~TempDir() { fs::remove_all(dir); }
    std::string file(const std::string& name, const std::string& content) const {
        const std::string path = (dir / name).string();
        std::ofstream out(path);
        out << content;
        return path;
    }
    std::string path(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_CASE("load_csv round-trips a small file exactly") {
    TempDir tmp;
    const std::string train = tmp.file("train.csv", "a,b\n1.5,2\n-3,0.25\n10,1e-3\n");
    const std::string test = tmp.file("test.csv", "a,b,label\n0.5,1,0\n0.75,2,1\n1,3,0\n");
    TimeSeriesDataset ds = load_csv(train, test, "label");
    CHECK(ds.channels == std::vector<std::string>{"a", "b"});
    CHECK(ds.train.rows == 3);
    CHECK(ds.train.cols == 2);
    CHECK(ds.train.at(0, 0) == 1.5);
    CHECK(ds.train.at(1, 0) == -3.0);
    CHECK(ds.train.at(2, 1) == 1e-3);
    CHECK(ds.test.rows == 3);
    CHECK(ds.test_labels == std::vector<int>{0, 1, 0});
}

TEST_CASE("load_csv input errors carry row and column locations") {
    TempDir tmp;
    SUBCASE("missing label column names the column") {
        const std::string train = tmp.file("train.csv", "a\n1\n");
        const std::string test = tmp.file("test.csv", "a\n1\n");
        try {
            load_csv(train, test, "label");
            FAIL("expected InputError");
        } catch (const InputError& e) {
            CHECK(std::string(e.what()).find("label") != std::string::npos);
        }
    }
    SUBCASE("ragged row is located") {
        const std::string train = tmp.file("train.csv", "a,b\n1,2\n3\n");
        const std::string test = tmp.file("test.csv", "a,b,label\n1,2,0\n");
        try {
            load_csv(train, test, "label");
            FAIL("expected InputError");
        } catch (const InputError& e) {
            CHECK(std::string(e.what()).find("row 2") != std::string::npos);
        }
    }
    SUBCASE("non-numeric cell is located") {
        const std::string train = tmp.file("train.csv", "a,b\n1,2\n");
        const std::string test = tmp.file("test.csv", "a,b,label\n1,oops,0\n");
        try {
            load_csv(train, test, "label");
            FAIL("expected InputError");
        } catch (const InputError& e) {
            const std::string msg = e.what();
            CHECK(msg.find("row 1") != std::string::npos);
            CHECK(msg.find("\"b\"") != std::string::npos);
            CHECK(msg.find("oops") != std::string::npos);
        }
    }
    SUBCASE("non-binary label is rejected") {
        const std::string train = tmp.file("train.csv", "a\n1\n");
        const std::string test = tmp.file("test.csv", "a,label\n1,2\n");
        CHECK_THROWS_AS(load_csv(train, test, "label"), InputError);
    }
    SUBCASE("label column in the train file is dropped from channels") {
        const std::string train = tmp.file("train.csv", "a,label\n1,0\n2,1\n");
        const std::string test = tmp.file("test.csv", "a,label\n1,0\n");
        TimeSeriesDataset ds = load_csv(train, test, "label");
        CHECK(ds.channels == std::vector<std::string>{"a"});
        CHECK(ds.train.cols == 1);
    }
}

TEST_CASE("constant channels survive loading and normalization") {
    TempDir tmp;
    const std::string train = tmp.file("train.csv", "a,c\n1,5\n3,5\n");
    const std::string test = tmp.file("test.csv", "a,c,label\n2,5,0\n4,5,1\n");
    TimeSeriesDataset ds = normalize(load_csv(train, test, "label"));
    CHECK(ds.train.cols == 2);
    // Constant channel: zero variance floored, normalized values are zero.
    CHECK(ds.train.at(0, 1) == doctest::Approx(0.0));
    CHECK(ds.train.at(1, 1) == doctest::Approx(0.0));
    CHECK(ds.test.at(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("normalize uses train statistics for both splits") {
    TimeSeriesDataset ds;
    ds.channels = {"x"};
    ds.train = Matrix(2, 1);
    ds.train.at(0, 0) = 0.0;
    ds.train.at(1, 0) = 2.0;
    ds.test = Matrix(3, 1);
    ds.test.at(0, 0) = 1.0;  // equals the train mean
    ds.test.at(1, 0) = 0.0;
    ds.test.at(2, 0) = 2.0;
    TimeSeriesDataset norm = normalize(ds);
    // mean 1, std 1 (population): train [0,2] -> [-1,1]
    CHECK(norm.train.at(0, 0) == doctest::Approx(-1.0));
    CHECK(norm.train.at(1, 0) == doctest::Approx(1.0));
    CHECK(norm.test.at(0, 0) == doctest::Approx(0.0));
    CHECK(norm.test.at(1, 0) == doctest::Approx(-1.0));
    CHECK(norm.test.at(2, 0) == doctest::Approx(1.0));
    CHECK_THROWS_AS(normalize(norm), ContractError);
}

TEST_CASE("normalization round-trips on non-floored channels") {
    SyntheticSpec spec = make_default_spec(5, 2000, 2000, small_mix(10));
    TimeSeriesDataset raw = generate_synthetic(spec);
    TimeSeriesDataset norm = normalize(raw);
    TimeSeriesDataset back = denormalize(norm);
    for (int r = 0; r < raw.train.rows; ++r) {
        CHECK(back.train.at(r, 0) == doctest::Approx(raw.train.at(r, 0)).epsilon(1e-10));
    }
    for (int r = 0; r < raw.test.rows; ++r) {
        CHECK(back.test.at(r, 0) == doctest::Approx(raw.test.at(r, 0)).epsilon(1e-10));
    }
}

TEST_CASE("synthetic generator honors the explicit anomaly list") {
    SUBCASE("zero anomalies gives all-zero labels") {
        SyntheticSpec spec;
        spec.train_length = 500;
        spec.test_length = 500;
        TimeSeriesDataset ds = generate_synthetic(spec);
        for (int v : ds.test_labels) CHECK(v == 0);
    }
    SUBCASE("one global anomaly labels exactly its point and sticks out") {
        SyntheticSpec spec;
        spec.train_length = 200;
        spec.test_length = 200;
        spec.anomalies = {{AnomalyKind::global, 50, 1, 8.0}};
        TimeSeriesDataset ds = generate_synthetic(spec);
        int count = 0;
        for (int t = 0; t < 200; ++t) {
            if (ds.test_labels[static_cast<std::size_t>(t)]) {
                ++count;
                CHECK(t == 50);
            }
        }
        CHECK(count == 1);
        CHECK(std::abs(ds.test.at(50, 0)) > spec.amplitude + 3.0 * spec.noise_std);
    }
    SUBCASE("label mass equals the summed segment lengths exactly") {
        SyntheticSpec spec;
        spec.test_length = 3000;
        spec.anomalies = {
            {AnomalyKind::shapelet, 100, 40, 1.0},
            {AnomalyKind::seasonal, 300, 35, 3.0},
            {AnomalyKind::trend, 500, 50, 2.0},
            {AnomalyKind::global, 700, 1, 6.0},
            {AnomalyKind::contextual, 900, 1, 1.5},
        };
        TimeSeriesDataset ds = generate_synthetic(spec);
        long mass = 0;
        for (int v : ds.test_labels) mass += v;
        CHECK(mass == 40 + 35 + 50 + 1 + 1);
    }
    SUBCASE("overlapping segments are a spec error") {
        SyntheticSpec spec;
        spec.anomalies = {{AnomalyKind::shapelet, 100, 50, 1.0},
                          {AnomalyKind::seasonal, 120, 30, 3.0}};
        CHECK_THROWS_AS(generate_synthetic(spec), ConfigError);
    }
    SUBCASE("out-of-bounds segment is a spec error") {
        SyntheticSpec spec;
        spec.test_length = 100;
        spec.anomalies = {{AnomalyKind::trend, 90, 20, 2.0}};
        CHECK_THROWS_AS(generate_synthetic(spec), ConfigError);
    }
}

TEST_CASE("default mix hits the target anomaly rate") {
    SyntheticSpec spec = make_default_spec(11);
    TimeSeriesDataset ds = generate_synthetic(spec);
    long mass = 0;
    for (int v : ds.test_labels) mass += v;
    const double rate = static_cast<double>(mass) / ds.test.rows;
    CHECK(rate == doctest::Approx(0.2244).epsilon(0.01));
    // Exact by construction: 44 + 44 + 20*80 + 20*70 + 10*140.
    CHECK(mass == 4488);
}

TEST_CASE("same seed reproduces the dataset bit-for-bit") {
    SyntheticSpec spec_a = make_default_spec(21, 4000, 4000, small_mix(5));
    SyntheticSpec spec_b = make_default_spec(21, 4000, 4000, small_mix(5));
    TimeSeriesDataset a = generate_synthetic(spec_a);
    TimeSeriesDataset b = generate_synthetic(spec_b);
    CHECK(a.train.data == b.train.data);
    CHECK(a.test.data == b.test.data);
    CHECK(a.test_labels == b.test_labels);
    SyntheticSpec spec_c = make_default_spec(22, 4000, 4000, small_mix(5));
    TimeSeriesDataset c = generate_synthetic(spec_c);
    CHECK(a.test.data != c.test.data);
}

TEST_CASE("csv writer round-trips generated data exactly") {
    TempDir tmp;
    SyntheticSpec spec = make_default_spec(31, 600, 600, small_mix(40));
    TimeSeriesDataset ds = generate_synthetic(spec);
    write_series_csv(tmp.path("train.csv"), ds.train, ds.channels, nullptr);
    write_series_csv(tmp.path("test.csv"), ds.test, ds.channels, &ds.test_labels);
    TimeSeriesDataset loaded = load_csv(tmp.path("train.csv"), tmp.path("test.csv"), "label");
    CHECK(loaded.train.data == ds.train.data);
    CHECK(loaded.test.data == ds.test.data);
    CHECK(loaded.test_labels == ds.test_labels);
}
