#include <doctest.h>

#include <cmath>
#include <random>

#include "cinp/optim.hpp"
#include "oracles.hpp"

using namespace cinp;

namespace {

Tensor param_with_grad(std::vector<double> value, const std::vector<double>& grad) {
    const std::size_t n = value.size();
    Tensor p({n}, std::move(value), true);
    // d/dp sum(p * g) = g
    sum(mul(p, Tensor({grad.size()}, grad))).backward();
    return p;
}

}  // namespace

TEST_CASE("first Adam step moves a scalar by about lr") {
    std::vector<Tensor> params{param_with_grad({1.0}, {1.0})};
    AdamState state = AdamState::for_params(params);
    adam_step(params, state, 0.1);
    CHECK(params[0].data()[0] == doctest::Approx(0.9).epsilon(1e-6));
    CHECK(state.step_count == 1);
}

TEST_CASE("zero gradient leaves only the decoupled decay") {
    std::vector<Tensor> params{param_with_grad({2.0, -3.0, 0.5}, {0, 0, 0})};
    AdamState state = AdamState::for_params(params);
    const double lr = 0.01;
    adam_step(params, state, lr);
    const double shrink = 1.0 - lr * 1e-5;
    CHECK(params[0].data()[0] == 2.0 * shrink);
    CHECK(params[0].data()[1] == -3.0 * shrink);
    CHECK(params[0].data()[2] == 0.5 * shrink);
}

TEST_CASE("identical parameters with identical gradients update identically") {
    std::vector<Tensor> params{param_with_grad({0.3, -0.7}, {0.2, 1.1}), param_with_grad({0.3, -0.7}, {0.2, 1.1})};
    AdamState state = AdamState::for_params(params);
    for (int i = 0; i < 3; ++i) adam_step(params, state, 1e-3);
    CHECK(params[0].data()[0] == params[1].data()[0]);
    CHECK(params[0].data()[1] == params[1].data()[1]);
}

TEST_CASE("Adam matches a scalar hand-rolled recurrence over many steps") {
    std::mt19937_64 g(5);
    std::normal_distribution<double> nd;
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8, wd = 1e-5;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + trial % 4;
        std::vector<double> p = oracle::normals(g, n);
        std::vector<double> m(n, 0.0), v(n, 0.0);
        Tensor leaf({n}, p, true);
        std::vector<Tensor> params{leaf};
        AdamState state = AdamState::for_params(params);
        for (int t = 1; t <= 25; ++t) {
            const double lr = 1e-3 * (1.0 + nd(g) * 0.1);
            const auto grad = oracle::normals(g, n);
            sum(mul(leaf, Tensor({n}, grad))).backward();
            adam_step(params, state, lr);
            for (std::size_t i = 0; i < n; ++i) {
                m[i] = b1 * m[i] + (1 - b1) * grad[i];
                v[i] = b2 * v[i] + (1 - b2) * grad[i] * grad[i];
                const double mh = m[i] / (1 - std::pow(b1, t));
                const double vh = v[i] / (1 - std::pow(b2, t));
                p[i] = p[i] * (1 - lr * wd) - lr * mh / (std::sqrt(vh) + eps);
            }
        }
        for (std::size_t i = 0; i < n; ++i) CHECK(std::fabs(leaf.data()[i] - p[i]) < 1e-14);
        CHECK(state.step_count == 25);
    }
}

TEST_CASE("Adam is bit-deterministic") {
    std::mt19937_64 g(9);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + trial % 5;
        const auto init = oracle::normals(g, n);
        const auto grad = oracle::normals(g, n);
        std::vector<Tensor> a{param_with_grad(init, grad)};
        std::vector<Tensor> b{param_with_grad(init, grad)};
        AdamState sa = AdamState::for_params(a), sb = AdamState::for_params(b);
        adam_step(a, sa, 1e-3);
        adam_step(b, sb, 1e-3);
        for (std::size_t i = 0; i < n; ++i) CHECK(a[0].data()[i] == b[0].data()[i]);
        CHECK(sa.first_moment == sb.first_moment);
        CHECK(sa.second_moment == sb.second_moment);
    }
}

TEST_CASE("Adam refuses parameters without gradients") {
    std::vector<Tensor> params{Tensor({2}, {1, 2}, true)};
    AdamState state = AdamState::for_params(params);
    CHECK(error_code_of([&] { adam_step(params, state, 1e-3); }) == ErrorCode::MissingGradient);
    CHECK(state.step_count == 0);
}

TEST_CASE("cosine schedule endpoints and midpoint") {
    const LrSchedule s{1e-5, 1e-6, 1000};
    CHECK(cosine_lr(0, s) == 1e-5);
    CHECK(cosine_lr(1000, s) == 1e-6);
    CHECK(cosine_lr(500, s) == doctest::Approx(5.5e-6).epsilon(1e-12));
    CHECK(error_code_of([&] { cosine_lr(1001, s); }) == ErrorCode::StepOutOfRange);
}

TEST_CASE("cosine schedule is non-increasing for random schedules") {
    std::mt19937_64 g(3);
    std::uniform_int_distribution<std::uint64_t> steps(1, 5000);
    std::uniform_real_distribution<double> lr(1e-7, 1e-2);
    for (int trial = 0; trial < 1000; ++trial) {
        const double a = lr(g), b = lr(g);
        const LrSchedule s{std::max(a, b), std::min(a, b), steps(g)};
        double prev = cosine_lr(0, s);
        const std::uint64_t stride = std::max<std::uint64_t>(1, s.total_steps / 50);
        for (std::uint64_t t = stride; t <= s.total_steps; t += stride) {
            const double now = cosine_lr(t, s);
            CHECK(now <= prev);
            prev = now;
        }
        CHECK(cosine_lr(s.total_steps, s) == s.lr_min);
    }
}
