#include <doctest.h>

#include <cmath>
#include <random>

#include "cinp/gradcheck.hpp"
#include "cinp/tensor.hpp"
#include "oracles.hpp"
#include "primitive_suite.hpp"

using namespace cinp;

TEST_CASE("softmax of equal logits is uniform") {
    const Tensor y = softmax_rows(Tensor::matrix(1, 2, {0, 0}));
    CHECK(y.at(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(y.at(0, 1) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("l2 normalization of a 3-4-5 row") {
    const Tensor y = l2_normalize_rows(Tensor::matrix(1, 2, {3, 4}));
    CHECK(std::fabs(y.at(0, 0) - 0.6) < 1e-15);
    CHECK(std::fabs(y.at(0, 1) - 0.8) < 1e-15);
}

TEST_CASE("matmul of all-ones counts the inner extent") {
    const Tensor y = matmul(Tensor::full({2, 3}, 1.0), Tensor::full({3, 2}, 1.0));
    CHECK(y.shape() == Shape{2, 2});
    for (double v : y.data()) CHECK(v == 3.0);
}

TEST_CASE("tensor_op dispatch agrees with the named functions") {
    const Tensor a = Tensor::matrix(2, 2, {1, 2, 3, 4});
    const Tensor b = Tensor::matrix(2, 2, {0.5, -1, 2, 0.25});
    const Tensor ab[] = {a, b};
    const Tensor only_a[] = {a};
    auto same = [](const Tensor& x, const Tensor& y) {
        REQUIRE(x.shape() == y.shape());
        for (std::size_t i = 0; i < x.numel(); ++i) CHECK(x.data()[i] == y.data()[i]);
    };
    same(tensor_op(OpKind::Add, ab), add(a, b));
    same(tensor_op(OpKind::Sub, ab), sub(a, b));
    same(tensor_op(OpKind::Mul, ab), mul(a, b));
    same(tensor_op(OpKind::Matmul, ab), matmul(a, b));
    same(tensor_op(OpKind::Scale, only_a, -2.5), scale(a, -2.5));
    same(tensor_op(OpKind::Exp, only_a), exp(a));
    same(tensor_op(OpKind::Log, only_a), log(a));
    same(tensor_op(OpKind::Sum, only_a), sum(a));
    same(tensor_op(OpKind::Mean, only_a), mean(a));
    same(tensor_op(OpKind::Abs, only_a), abs(a));
    same(tensor_op(OpKind::ConcatRows, ab), concat_rows(ab));
    same(tensor_op(OpKind::SoftmaxRows, only_a), softmax_rows(a));
    same(tensor_op(OpKind::L2NormalizeRows, only_a), l2_normalize_rows(a));
    same(tensor_op(OpKind::Transpose, only_a), transpose(a));
}

TEST_CASE("shape errors") {
    const Tensor a = Tensor::zeros({2, 3});
    CHECK(error_code_of([&] { add(a, Tensor::zeros({3, 2})); }) == ErrorCode::ShapeMismatch);
    CHECK(error_code_of([&] { matmul(a, a); }) == ErrorCode::ShapeMismatch);
    CHECK(error_code_of([&] { softmax_rows(Tensor::zeros({2, 2, 2})); }) == ErrorCode::ShapeMismatch);
    CHECK(error_code_of([&] { l2_normalize_rows(Tensor::zeros({4})); }) == ErrorCode::ShapeMismatch);
    const Tensor parts[] = {a, Tensor::zeros({1, 2})};
    CHECK(error_code_of([&] { concat_rows(parts); }) == ErrorCode::ShapeMismatch);
    CHECK(error_code_of([&] { Tensor({2, 2}, {1, 2, 3}); }) == ErrorCode::ShapeMismatch);
    CHECK(error_code_of([&] { reshape(a, {4, 2}); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("l2 normalization of an all-zero row is an error") {
    const Tensor x = Tensor::matrix(2, 2, {1, 1, 0, 0});
    CHECK(error_code_of([&] { l2_normalize_rows(x); }) == ErrorCode::ZeroNorm);
}

TEST_CASE("backward examples") {
    SUBCASE("sum of squares") {
        const Tensor x({3}, {1, 2, 3}, true);
        sum(mul(x, x)).backward();
        CHECK(x.grad()[0] == 2.0);
        CHECK(x.grad()[1] == 4.0);
        CHECK(x.grad()[2] == 6.0);
    }
    SUBCASE("mean") {
        const Tensor x({4}, {5, -1, 2, 8}, true);
        mean(x).backward();
        for (double g : x.grad()) CHECK(g == 0.25);
    }
    SUBCASE("batch-mean softmax cross-entropy at equal logits") {
        auto ce = [](const Tensor& logits) {
            // target class 0 in both rows
            return neg(mean(gather(log_softmax_rows(logits), {0, 2}, {2})));
        };
        const Tensor logits = Tensor::matrix(2, 2, {0, 0, 0, 0}, true);
        ce(logits).backward();
        const double expect[] = {-0.25, 0.25, -0.25, 0.25};
        for (std::size_t i = 0; i < 4; ++i) CHECK(std::fabs(logits.grad()[i] - expect[i]) < 1e-12);
        // and the finite-difference view of the same thing
        const auto fd = oracle::fd_grad(
            [&](const std::vector<double>& v) { return ce(Tensor::matrix(2, 2, v)).item(); }, {0, 0, 0, 0});
        for (std::size_t i = 0; i < 4; ++i) CHECK(std::fabs(fd[i] - expect[i]) < 1e-9);
    }
}

TEST_CASE("backward requires a one-element loss") {
    const Tensor x({3}, {1, 2, 3}, true);
    CHECK(error_code_of([&] { mul(x, x).backward(); }) == ErrorCode::NonScalarLoss);
    CHECK(error_code_of([&] { grad_check([](const Tensor& t) { return mul(t, t); }, x); }) ==
          ErrorCode::NonScalarLoss);
}

TEST_CASE("repeated backward overwrites instead of accumulating") {
    const Tensor x({2}, {1.5, -2}, true);
    const Tensor loss = sum(mul(x, x));
    loss.backward();
    loss.backward();
    CHECK(x.grad()[0] == 3.0);
    CHECK(x.grad()[1] == -4.0);
    // A different graph over the same leaf also replaces the grad.
    sum(x).backward();
    CHECK(x.grad()[0] == 1.0);
}

TEST_CASE("a leaf used twice receives the summed gradient") {
    const Tensor x({2}, {2, 3}, true);
    sum(add(mul(x, x), scale(x, 4))).backward();
    CHECK(x.grad()[0] == 8.0);
    CHECK(x.grad()[1] == 10.0);
}

TEST_CASE("grad_check is near-exact on a quadratic") {
    std::mt19937_64 g(11);
    for (int trial = 0; trial < 20; ++trial) {
        const Tensor x = suite::random_tensor(g, {suite::extent(g), suite::extent(g)});
        CHECK(grad_check([](const Tensor& t) { return sum(mul(t, t)); }, x) < 1e-7);
    }
}

TEST_CASE("every primitive matches central differences on 100 random instances") {
    for (const auto& c : suite::primitive_cases()) {
        double worst = 0.0;
        for (std::uint64_t s = 0; s < 100; ++s) {
            std::mt19937_64 g(1000 + s);
            worst = std::max(worst, c.run(g));
        }
        INFO(c.name << " worst relative error " << worst);
        CHECK(worst < 1e-5);
    }
}

TEST_CASE("row normalization and softmax properties over random inputs") {
    std::mt19937_64 g(7);
    std::uniform_real_distribution<double> shift(-50, 50);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = suite::extent(g), d = suite::extent(g, 1, 8);
        const Tensor x = suite::away_from_zero(g, {n, d});

        const Tensor y = l2_normalize_rows(x);
        for (std::size_t i = 0; i < n; ++i) {
            double ss = 0.0;
            for (std::size_t c = 0; c < d; ++c) ss += y.at(i, c) * y.at(i, c);
            CHECK(std::fabs(std::sqrt(ss) - 1.0) < 1e-12);
        }

        const Tensor p = softmax_rows(x);
        std::vector<double> shifted(x.data().begin(), x.data().end());
        for (std::size_t i = 0; i < n; ++i) {
            const double s = shift(g);
            for (std::size_t c = 0; c < d; ++c) shifted[i * d + c] += s;
        }
        const Tensor q = softmax_rows(Tensor({n, d}, shifted));
        for (std::size_t i = 0; i < n; ++i) {
            double total = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                total += p.at(i, c);
                CHECK(std::fabs(p.at(i, c) - q.at(i, c)) < 1e-12);
            }
            CHECK(std::fabs(total - 1.0) < 1e-12);
        }
    }
}

TEST_CASE("softmax stays finite for large logits") {
    const Tensor p = softmax_rows(Tensor::matrix(1, 3, {1000, 999, -1000}));
    CHECK(std::isfinite(p.at(0, 0)));
    CHECK(p.at(0, 0) == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
    CHECK(p.at(0, 2) == 0.0);
}

TEST_CASE("only leaves accept new data") {
    Tensor x({2}, {1, 2}, true);
    const Tensor y = scale(x, 2);
    const double v[] = {3, 4};
    x.set_data(v);
    CHECK(x.data()[0] == 3.0);
    CHECK(y.data()[0] == 2.0);  // results are snapshots, not views
    Tensor z = y;
    CHECK_FALSE(z.is_leaf());
    CHECK(error_code_of([&] { z.set_data(v); }).has_value());
}

TEST_CASE("detach cuts the graph") {
    const Tensor x({2}, {1, 2}, true);
    const Tensor y = x.detach();
    CHECK_FALSE(y.requires_grad());
    const Tensor loss = sum(mul(x, y));
    loss.backward();
    CHECK(x.grad()[0] == 1.0);
    CHECK(x.grad()[1] == 2.0);
}
