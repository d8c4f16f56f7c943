#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "subadj/adam.hpp"
#include "subadj/ops.hpp"
#include "test_support.hpp"

using namespace subadj;
using namespace subadj::testing;

TEST_CASE("matmul identity and hand cases") {
    Tensor eye = Tensor::from_data({2, 2}, {1, 0, 0, 1});
    Tensor col = Tensor::from_data({2, 1}, {3, 4});
    Tensor r = matmul(eye, col);
    CHECK(r.at(0, 0) == doctest::Approx(3.0));
    CHECK(r.at(1, 0) == doctest::Approx(4.0));

    Tensor row = Tensor::from_data({1, 2}, {1, 2});
    Tensor r2 = matmul(row, col);
    CHECK(r2.numel() == 1);
    CHECK(r2.at(0, 0) == doctest::Approx(11.0));
}

TEST_CASE("matmul agrees with triple-loop oracle on random instances") {
    Rng rng(42);
    for (int trial = 0; trial < 30; ++trial) {
        const int m = 1 + static_cast<int>(rng.below(32));
        const int k = 1 + static_cast<int>(rng.below(32));
        const int n = 1 + static_cast<int>(rng.below(32));
        Tensor a = Tensor::zeros({m, k});
        Tensor b = Tensor::zeros({k, n});
        fill_uniform(a, rng);
        fill_uniform(b, rng);
        Tensor c = matmul(a, b);
        const auto expect = matmul_oracle(a.values(), b.values(), m, k, n);
        for (std::size_t i = 0; i < expect.size(); ++i) {
            CHECK(c.values()[i] == doctest::Approx(expect[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("batched matmul matches per-slice products") {
    Rng rng(1);
    Tensor a = Tensor::zeros({3, 4, 5});
    Tensor b = Tensor::zeros({3, 5, 2});
    fill_uniform(a, rng);
    fill_uniform(b, rng);
    Tensor c = matmul(a, b);
    REQUIRE(c.shape() == std::vector<int>{3, 4, 2});
    for (int s = 0; s < 3; ++s) {
        std::vector<double> as(a.values().begin() + s * 20, a.values().begin() + (s + 1) * 20);
        std::vector<double> bs(b.values().begin() + s * 10, b.values().begin() + (s + 1) * 10);
        const auto expect = matmul_oracle(as, bs, 4, 5, 2);
        for (int i = 0; i < 4; ++i) {
            for (int j = 0; j < 2; ++j) {
                CHECK(c.at(s, i, j) == doctest::Approx(expect[static_cast<std::size_t>(i) * 2 + j]));
            }
        }
    }
}

TEST_CASE("matmul shape mismatch names both shapes") {
    Tensor a = Tensor::zeros({2, 3});
    Tensor b = Tensor::zeros({4, 2});
    try {
        matmul(a, b);
        FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[2x3]") != std::string::npos);
        CHECK(msg.find("[4x2]") != std::string::npos);
    }
}

TEST_CASE("softmax_rows symmetry, stabilization, formula oracle") {
    Tensor z = Tensor::from_data({1, 3}, {0, 0, 0});
    Tensor s = softmax_rows(z);
    for (int j = 0; j < 3; ++j) CHECK(s.at(0, j) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    Tensor big = Tensor::from_data({1, 2}, {1000, 0});
    Tensor sb = softmax_rows(big);
    CHECK(std::isfinite(sb.at(0, 0)));
    CHECK(sb.at(0, 0) == doctest::Approx(1.0));
    CHECK(sb.at(0, 1) == doctest::Approx(0.0));

    Tensor x = Tensor::from_data({1, 3}, {1, 2, 3});
    Tensor sx = softmax_rows(x);
    long double total = 0.0L;
    for (int j = 0; j < 3; ++j) total += std::exp(static_cast<long double>(j + 1));
    for (int j = 0; j < 3; ++j) {
        const double expect = static_cast<double>(std::exp(static_cast<long double>(j + 1)) / total);
        CHECK(sx.at(0, j) == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("softmax_rows rows sum to one and lie in [0,1]") {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor x = Tensor::zeros({5, 8});
        fill_uniform(x, rng, -30.0, 30.0);
        Tensor s = softmax_rows(x);
        for (int i = 0; i < 5; ++i) {
            double row = 0.0;
            for (int j = 0; j < 8; ++j) {
                CHECK(s.at(i, j) >= 0.0);
                CHECK(s.at(i, j) <= 1.0);
                row += s.at(i, j);
            }
            CHECK(row == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
}

TEST_CASE("backward on linear and quadratic losses") {
    Tensor x = Tensor::from_data({3}, {5, -2, 0.5}, true);
    {
        Tape tape;
        TapeScope scope(tape);
        Tensor loss = sum(x);
        tape.backward(loss);
    }
    for (int i = 0; i < 3; ++i) CHECK(x.grad()[static_cast<std::size_t>(i)] == doctest::Approx(1.0));

    Tensor y = Tensor::from_data({2}, {1, 2}, true);
    {
        Tape tape;
        TapeScope scope(tape);
        Tensor loss = sum(mul(y, y));
        tape.backward(loss);
    }
    CHECK(y.grad()[0] == doctest::Approx(2.0));
    CHECK(y.grad()[1] == doctest::Approx(4.0));
}

TEST_CASE("backward contract errors") {
    Tensor x = Tensor::from_data({2}, {1, 2}, true);
    Tape tape;
    TapeScope scope(tape);
    Tensor y = mul(x, x);
    CHECK_THROWS_AS(tape.backward(y), ContractError);        // non-scalar
    CHECK_THROWS_AS(tape.backward(x), ContractError);        // not produced by the tape
}

TEST_CASE("repeated backward accumulates into leaves") {
    Tensor x = Tensor::from_data({2}, {3, 4}, true);
    Tape tape;
    TapeScope scope(tape);
    Tensor loss = sum(x);
    tape.backward(loss);
    tape.backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(2.0));
    CHECK(x.grad()[1] == doctest::Approx(2.0));
}

TEST_CASE("composite graph gradient matches finite differences") {
    Rng rng(11);
    Tensor a = Tensor::zeros({4, 3}, true);
    Tensor b = Tensor::zeros({3, 5}, true);
    Tensor v = Tensor::zeros({5}, true);
    fill_uniform(a, rng);
    fill_uniform(b, rng);
    fill_uniform(v, rng);
    auto build = [&]() {
        Tensor h = softmax_rows(add_rowvec(matmul(a, b), v));
        return sum(mul(h, h));
    };
    CHECK(max_grad_rel_error(build, {a, b, v}) < 1e-4);
}

TEST_CASE("elementwise and structural op gradients match finite differences") {
    Rng rng(13);

    SUBCASE("add/sub/mul/scale") {
        Tensor a = Tensor::zeros({3, 4}, true);
        Tensor b = Tensor::zeros({3, 4}, true);
        fill_uniform(a, rng);
        fill_uniform(b, rng);
        auto build = [&]() { return sum(mul(scale(add(a, b), 0.7), sub(a, b))); };
        CHECK(max_grad_rel_error(build, {a, b}) < 1e-4);
    }
    SUBCASE("transpose 2d and 3d") {
        Tensor a = Tensor::zeros({3, 4}, true);
        fill_uniform(a, rng);
        auto build = [&]() {
            Tensor t = transpose(a);
            return sum(mul(t, t));
        };
        CHECK(max_grad_rel_error(build, {a}) < 1e-4);

        Tensor c = Tensor::zeros({2, 3, 4}, true);
        fill_uniform(c, rng);
        auto build3 = [&]() {
            Tensor t = transpose(c);
            return sum(mul(t, t));
        };
        CHECK(max_grad_rel_error(build3, {c}) < 1e-4);
    }
    SUBCASE("batched matmul") {
        Tensor a = Tensor::zeros({2, 3, 4}, true);
        Tensor b = Tensor::zeros({2, 4, 2}, true);
        fill_uniform(a, rng);
        fill_uniform(b, rng);
        auto build = [&]() {
            Tensor c = matmul(a, b);
            return sum(mul(c, c));
        };
        CHECK(max_grad_rel_error(build, {a, b}) < 1e-4);
    }
    SUBCASE("relu, elu_plus_one, relu_pow, clamp_negative away from the kink") {
        Tensor x = Tensor::zeros({4, 4}, true);
        fill_away_from_zero(x, rng);
        auto build_relu = [&]() { return sum(mul(relu(x), relu(x))); };
        CHECK(max_grad_rel_error(build_relu, {x}) < 1e-4);
        auto build_elu = [&]() { return sum(elu_plus_one(x)); };
        CHECK(max_grad_rel_error(build_elu, {x}) < 1e-4);
        auto build_pow = [&]() { return sum(relu_pow(x, 3.0)); };
        CHECK(max_grad_rel_error(build_pow, {x}) < 1e-4);
        auto build_clamp = [&]() { return sum(mul(clamp_negative(x, -100.0), clamp_negative(x, -100.0))); };
        CHECK(max_grad_rel_error(build_clamp, {x}) < 1e-4);
    }
    SUBCASE("div_scalar propagates to numerator and divisor") {
        Tensor x = Tensor::zeros({3, 3}, true);
        fill_uniform(x, rng);
        Tensor tau = Tensor::scalar(0.7, true);
        auto build = [&]() { return sum(mul(div_scalar(x, tau), div_scalar(x, tau))); };
        CHECK(max_grad_rel_error(build, {x, tau}) < 1e-4);
    }
    SUBCASE("slice and concat") {
        Tensor x = Tensor::zeros({3, 6}, true);
        fill_uniform(x, rng);
        auto build = [&]() {
            Tensor left = slice_cols(x, 0, 3);
            Tensor right = slice_cols(x, 3, 3);
            Tensor joined = concat_cols({right, left});
            return sum(mul(joined, joined));
        };
        CHECK(max_grad_rel_error(build, {x}) < 1e-4);
    }
    SUBCASE("layer_norm") {
        Tensor x = Tensor::zeros({4, 6}, true);
        Tensor gamma = Tensor::zeros({6}, true);
        Tensor beta = Tensor::zeros({6}, true);
        fill_uniform(x, rng);
        fill_uniform(gamma, rng, 0.5, 1.5);
        fill_uniform(beta, rng);
        auto build = [&]() {
            Tensor n = layer_norm(x, gamma, beta);
            return sum(mul(n, n));
        };
        CHECK(max_grad_rel_error(build, {x, gamma, beta}) < 1e-4);
    }
}

TEST_CASE("dropout is identity at rate zero and masks consistently") {
    Rng rng(3);
    Tensor x = Tensor::zeros({4, 4}, true);
    fill_uniform(x, rng);
    Rng drop_rng(5);
    Tensor same = dropout(x, 0.0, drop_rng);
    CHECK(same.id() == x.id());

    // Gradient equals the applied mask.
    Tensor y = Tensor::full({8}, 2.0, true);
    Tape tape;
    TapeScope scope(tape);
    Rng drop_rng2(5);
    Tensor d = dropout(y, 0.5, drop_rng2);
    tape.backward(sum(d));
    for (std::size_t i = 0; i < 8; ++i) {
        CHECK(y.grad()[i] == doctest::Approx(d.values()[i] / 2.0));
    }
}

TEST_CASE("inference without a tape records nothing") {
    Tensor x = Tensor::from_data({2, 2}, {1, 2, 3, 4}, true);
    Tensor y = matmul(x, x);
    CHECK(y.at(0, 0) == doctest::Approx(7.0));
    CHECK(active_tape() == nullptr);
}

TEST_CASE("adam zero gradient leaves parameters unchanged") {
    Tensor p = Tensor::from_data({3}, {1, 2, 3}, true);
    AdamState adam({p}, 0.1);
    p.ensure_grad();
    p.zero_grad();
    CHECK(adam.step());
    CHECK(p.at(0) == doctest::Approx(1.0));
    CHECK(p.at(1) == doctest::Approx(2.0));
    CHECK(p.at(2) == doctest::Approx(3.0));
}

TEST_CASE("adam single step matches the hand-rolled oracle") {
    // One step with g=1: mhat = 1, vhat = 1, so p moves by lr/(1+eps).
    Tensor p = Tensor::scalar(0.0, true);
    AdamState adam({p}, 0.1);
    p.ensure_grad();
    p.grad()[0] = 1.0;
    CHECK(adam.step());
    const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    const double m = (1 - beta1) * 1.0;
    const double v = (1 - beta2) * 1.0;
    const double mhat = m / (1 - beta1);
    const double vhat = v / (1 - beta2);
    const double expect = -0.1 * mhat / (std::sqrt(vhat) + eps);
    CHECK(p.at(0) == doctest::Approx(expect).epsilon(1e-15));
    CHECK(p.at(0) == doctest::Approx(-0.1).epsilon(1e-6));
}

TEST_CASE("adam constant gradient decreases parameter monotonically") {
    Tensor p = Tensor::scalar(0.0, true);
    AdamState adam({p}, 0.01);
    double prev = p.at(0);
    for (int i = 0; i < 100; ++i) {
        p.ensure_grad();
        p.zero_grad();
        p.grad()[0] = 1.0;
        CHECK(adam.step());
        CHECK(p.at(0) < prev);
        prev = p.at(0);
    }
}

TEST_CASE("adam aborts the step on non-finite gradients") {
    Tensor p = Tensor::from_data({2}, {1, 2}, true);
    AdamState adam({p}, 0.1);
    p.ensure_grad();
    p.grad()[0] = std::numeric_limits<double>::quiet_NaN();
    p.grad()[1] = 1.0;
    CHECK_FALSE(adam.step());
    CHECK(!adam.last_warning().empty());
    CHECK(p.at(0) == doctest::Approx(1.0));
    CHECK(p.at(1) == doctest::Approx(2.0));
    CHECK(adam.step_count() == 0);
}

TEST_CASE("allocation counters track tensor buffers") {
    AllocStats::reset();
    {
        Tensor t = Tensor::zeros({64, 64});
        CHECK(AllocStats::current_bytes.load() >= 64 * 64 * sizeof(double));
        CHECK(AllocStats::peak_bytes.load() >= 64 * 64 * sizeof(double));
    }
    CHECK(AllocStats::current_bytes.load() == 0);
    CHECK(AllocStats::total_allocations.load() >= 1);
}
