#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "subadj/train.hpp"
#include "test_support.hpp"

using namespace subadj;
using namespace subadj::testing;

namespace {

ModelConfig tiny_model(int win = 20, int d_model = 32, int channels = 1) {
    ModelConfig cfg;
    cfg.d_model = d_model;
    cfg.n_layers = 2;
    cfg.n_heads = 2;
    cfg.d_ff = 2 * d_model;
    cfg.win_size = win;
    cfg.n_channels = channels;
    cfg.span = {2, 5, win};
    cfg.finalize();
    return cfg;
}

TimeSeriesDataset constant_zero_dataset(int t_len) {
    TimeSeriesDataset ds;
    ds.name = "zeros";
    ds.channels = {"x"};
    ds.train = Matrix(t_len, 1);
    ds.test = Matrix(t_len, 1);
    return normalize(std::move(ds));
}

TimeSeriesDataset small_synthetic(std::uint64_t seed) {
    SyntheticMix mix;
    mix.n_global = 8;
    mix.n_contextual = 8;
    mix.n_shapelet = 4;
    mix.span_shapelet = 40;
    mix.n_seasonal = 4;
    mix.span_seasonal = 35;
    mix.n_trend = 2;
    mix.span_trend = 70;
    return normalize(generate_synthetic(make_default_spec(seed, 3000, 3000, mix)));
}

}  // namespace

TEST_CASE("make_windows covers exact and remainder cases") {
    SUBCASE("exact division") {
        auto starts = make_window_starts(300, 100, WindowMode::training);
        CHECK(starts == std::vector<int>{0, 100, 200});
        CHECK(make_window_starts(300, 100, WindowMode::inference) == starts);
    }
    SUBCASE("remainder: inference appends an overlapping tail window") {
        CHECK(make_window_starts(250, 100, WindowMode::inference) ==
              std::vector<int>{0, 100, 150});
        CHECK(make_window_starts(250, 100, WindowMode::training) == std::vector<int>{0, 100});
    }
    SUBCASE("series shorter than the window is an input error") {
        CHECK_THROWS_AS(make_window_starts(99, 100, WindowMode::training), InputError);
    }
    SUBCASE("materialized windows copy the right rows") {
        Matrix m(250, 2);
        for (int r = 0; r < 250; ++r) {
            m.at(r, 0) = r;
            m.at(r, 1) = -r;
        }
        auto windows = make_windows(m, 100, WindowMode::inference);
        REQUIRE(windows.size() == 3);
        CHECK(windows[2].at(0, 0) == doctest::Approx(150.0));
        CHECK(windows[2].at(99, 0) == doctest::Approx(249.0));
        CHECK(windows[2].at(99, 1) == doctest::Approx(-249.0));
    }
}

TEST_CASE("loss_total examples and decomposition") {
    SUBCASE("perfect reconstruction with zero contribution is zero loss") {
        Tensor x = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
        Tensor sacon_vec = Tensor::zeros({2});
        LossParts parts = loss_total(x, x, sacon_vec, 10.0);
        CHECK(parts.total.item() == doctest::Approx(0.0));
        CHECK(parts.rec.item() == doctest::Approx(0.0));
    }
    SUBCASE("all-ones residual with lambda 10 gives -4") {
        Tensor x = Tensor::from_data({2, 3}, {1, 1, 1, 1, 1, 1});
        Tensor x_hat = Tensor::zeros({2, 3});
        Tensor sacon_vec = Tensor::from_data({2}, {0.5, 0.5});
        LossParts parts = loss_total(x, x_hat, sacon_vec, 10.0);
        CHECK(parts.rec.item() == doctest::Approx(6.0));
        CHECK(parts.attn.item() == doctest::Approx(1.0));
        CHECK(parts.total.item() == doctest::Approx(-4.0));
    }
    SUBCASE("lambda zero reduces to pure reconstruction") {
        Tensor x = Tensor::from_data({2, 2}, {1, 2, 3, 4});
        Tensor x_hat = Tensor::zeros({2, 2});
        Tensor sacon_vec = Tensor::from_data({2}, {100.0, 100.0});
        LossParts parts = loss_total(x, x_hat, sacon_vec, 0.0);
        CHECK(parts.total.id() == parts.rec.id());
        CHECK(parts.total.item() == doctest::Approx(30.0));
        CHECK_FALSE(parts.attn.defined());
    }
    SUBCASE("negative lambda is a configuration error") {
        Tensor x = Tensor::zeros({2, 2});
        Tensor sv = Tensor::zeros({2});
        CHECK_THROWS_AS(loss_total(x, x, sv, -1.0), ConfigError);
    }
    SUBCASE("shape mismatches are dimension errors") {
        Tensor x = Tensor::zeros({2, 2});
        Tensor y = Tensor::zeros({2, 3});
        Tensor sv = Tensor::zeros({2});
        CHECK_THROWS_AS(loss_total(x, y, sv, 1.0), DimensionError);
        Tensor sv_bad = Tensor::zeros({3});
        CHECK_THROWS_AS(loss_total(x, x, sv_bad, 1.0), DimensionError);
    }
    SUBCASE("total decomposes as rec minus lambda times attn on random data") {
        Rng rng(3);
        Tensor x = Tensor::zeros({4, 3});
        Tensor x_hat = Tensor::zeros({4, 3});
        Tensor sv = Tensor::zeros({4});
        fill_uniform(x, rng);
        fill_uniform(x_hat, rng);
        fill_uniform(sv, rng, 0.0, 1.0);
        LossParts parts = loss_total(x, x_hat, sv, 7.5);
        CHECK(parts.rec.item() >= 0.0);
        CHECK(parts.total.item() ==
              doctest::Approx(parts.rec.item() - 7.5 * parts.attn.item()).epsilon(1e-12));
    }
}

TEST_CASE("loss gradients flow through reconstruction and attention terms") {
    Rng rng(5);
    Tensor x = Tensor::zeros({6, 2});
    Tensor x_hat = Tensor::zeros({6, 2}, true);
    Tensor sv = Tensor::zeros({6}, true);
    fill_uniform(x, rng);
    fill_uniform(x_hat, rng);
    fill_uniform(sv, rng, 0.0, 1.0);
    auto build = [&]() { return loss_total(x, x_hat, sv, 10.0).total; };
    CHECK(max_grad_rel_error(build, {x_hat, sv}) < 1e-4);
}

TEST_CASE("fit learns the constant-zero series quickly") {
    TimeSeriesDataset ds = constant_zero_dataset(2000);
    ModelConfig mcfg = tiny_model();
    TrainConfig tcfg;
    tcfg.lambda = 10.0;
    tcfg.lr = 5e-3;
    tcfg.batch_size = 8;
    tcfg.max_epochs = 10;
    tcfg.patience = 10;
    tcfg.seed = 3;
    FitResult res = fit(ds, mcfg, tcfg);
    REQUIRE(!res.log.epochs.empty());
    CHECK(res.log.epochs.back().loss_rec < 1e-3);
}

TEST_CASE("attention contribution grows under the lambda=10 objective") {
    TimeSeriesDataset ds = small_synthetic(17);
    ModelConfig mcfg = tiny_model(50, 16);
    mcfg.span = {5, 10, 50};
    mcfg.finalize();
    TrainConfig tcfg;
    tcfg.lambda = 10.0;
    tcfg.lr = 1e-3;
    tcfg.batch_size = 16;
    tcfg.max_epochs = 5;
    tcfg.seed = 4;
    FitResult res = fit(ds, mcfg, tcfg);
    REQUIRE(res.log.epochs.size() >= 2);
    // Initial-parameter contribution, measured on the training windows.
    ModelParams init = init_params(mcfg, tcfg.seed);
    auto windows = make_windows(ds.train, mcfg.win_size, WindowMode::training);
    double init_mean = 0.0, trained_mean = 0.0;
    for (const auto& w : windows) {
        auto r0 = forward(w, init, mcfg);
        auto r1 = forward(w, res.params, mcfg);
        const auto& s0 = r0.state.aggregated_sacon().values();
        const auto& s1 = r1.state.aggregated_sacon().values();
        for (std::size_t i = 0; i < s0.size(); ++i) {
            init_mean += s0[i];
            trained_mean += s1[i];
        }
    }
    CHECK(trained_mean > init_mean);
    CHECK(res.log.epochs.back().mean_sacon > res.log.epochs.front().mean_sacon);
}

TEST_CASE("fit is deterministic under a fixed seed") {
    TimeSeriesDataset ds = small_synthetic(23);
    ModelConfig mcfg = tiny_model(25, 16);
    mcfg.span = {3, 6, 25};
    mcfg.finalize();
    TrainConfig tcfg;
    tcfg.lr = 1e-3;
    tcfg.batch_size = 32;
    tcfg.max_epochs = 3;
    tcfg.seed = 11;
    FitResult a = fit(ds, mcfg, tcfg);
    FitResult b = fit(ds, mcfg, tcfg);
    REQUIRE(a.log.epochs.size() == b.log.epochs.size());
    for (std::size_t i = 0; i < a.log.epochs.size(); ++i) {
        CHECK(a.log.epochs[i].loss_rec == b.log.epochs[i].loss_rec);
        CHECK(a.log.epochs[i].loss_attn == b.log.epochs[i].loss_attn);
        CHECK(a.log.epochs[i].loss_total == b.log.epochs[i].loss_total);
        CHECK(a.log.epochs[i].val_loss == b.log.epochs[i].val_loss);
        CHECK(a.log.epochs[i].mean_sacon == b.log.epochs[i].mean_sacon);
    }
    auto pa = a.params.named();
    auto pb = b.params.named();
    for (std::size_t i = 0; i < pa.size(); ++i) {
        CHECK(pa[i].second.values() == pb[i].second.values());
    }
}

TEST_CASE("lambda zero never reads attention state") {
    TimeSeriesDataset ds = constant_zero_dataset(600);
    ModelConfig mcfg = tiny_model(20, 16);
    TrainConfig tcfg;
    tcfg.lambda = 0.0;
    tcfg.max_epochs = 2;
    tcfg.batch_size = 8;
    tcfg.seed = 9;
    reset_attention_state_reads();
    fit(ds, mcfg, tcfg);
    CHECK(attention_state_reads() == 0);

    tcfg.lambda = 10.0;
    fit(ds, mcfg, tcfg);
    CHECK(attention_state_reads() > 0);
}

TEST_CASE("non-finite loss aborts with diagnostics") {
    TimeSeriesDataset ds = constant_zero_dataset(600);
    ds.train.at(100, 0) = std::numeric_limits<double>::quiet_NaN();
    ModelConfig mcfg = tiny_model(20, 16);
    TrainConfig tcfg;
    tcfg.max_epochs = 2;
    tcfg.batch_size = 64;
    tcfg.seed = 10;
    try {
        fit(ds, mcfg, tcfg);
        FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("epoch") != std::string::npos);
    }
}

TEST_CASE("subsample ratio shortens the training series") {
    TimeSeriesDataset ds = constant_zero_dataset(2000);
    ModelConfig mcfg = tiny_model(100, 16);
    mcfg.span = {2, 5, 100};
    mcfg.finalize();
    TrainConfig tcfg;
    tcfg.max_epochs = 1;
    tcfg.seed = 2;
    tcfg.subsample_ratio = 0.5;
    FitResult res = fit(ds, mcfg, tcfg);  // 10 windows instead of 20
    CHECK(res.log.n_train_windows + res.log.n_val_windows == 10);
    tcfg.subsample_ratio = 1.0;
    FitResult full = fit(ds, mcfg, tcfg);
    CHECK(full.log.n_train_windows + full.log.n_val_windows == 20);
    tcfg.subsample_ratio = 0.01;  // 20 steps < one window
    CHECK_THROWS_AS(fit(ds, mcfg, tcfg), InputError);
}

TEST_CASE("early stopping halts after patience non-improving epochs") {
    TimeSeriesDataset ds = constant_zero_dataset(800);
    ModelConfig mcfg = tiny_model(20, 16);
    TrainConfig tcfg;
    tcfg.max_epochs = 10;
    tcfg.patience = 2;
    tcfg.lr = 1e-3;
    tcfg.batch_size = 8;
    tcfg.seed = 12;
    FitResult res = fit(ds, mcfg, tcfg);
    const int ran = static_cast<int>(res.log.epochs.size());
    CHECK(ran <= 10);
    if (ran < 10) {
        // Stopped early: the last `patience` epochs did not improve.
        CHECK(ran - res.log.best_epoch >= tcfg.patience);
    }
}

TEST_CASE("training log CSV has the documented schema") {
    namespace fs = std::filesystem;
    TrainingLog log;
    log.epochs.push_back({1, 0.5, 0.1, 0.4, 0.45, 0.02});
    log.epochs.push_back({2, 0.3, 0.2, 0.1, 0.2, 0.05});
    const std::string path = (fs::temp_directory_path() / "subadj_log_test.csv").string();
    write_training_log_csv(path, log);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "epoch,loss_rec,loss_attn,loss_total,val_loss,mean_sacon");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 2);
    fs::remove(path);
}

TEST_CASE("fit requires normalized data") {
    TimeSeriesDataset ds;
    ds.channels = {"x"};
    ds.train = Matrix(100, 1);
    ds.test = Matrix(100, 1);
    ModelConfig mcfg = tiny_model(20, 16);
    TrainConfig tcfg;
    CHECK_THROWS_AS(fit(ds, mcfg, tcfg), ContractError);
}
