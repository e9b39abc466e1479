#include <cmath>
#include <map>
#include <random>

#include "doctest.h"
#include "routecast/nn/adam.hpp"
#include "routecast/nn/autograd.hpp"
#include "routecast/nn/kernels.hpp"
#include "routecast/nn/reference.hpp"
#include "support.hpp"

using namespace routecast::nn;
using rctest::random_tensor;

TEST_CASE("gemm matches the naive triple loop bitwise")
{
    std::mt19937_64 rng(11);
    for (auto [m, n, k] : {std::tuple{1, 1, 1}, {7, 33, 5}, {13, 70, 19}, {64, 64, 64}, {6, 129, 3}}) {
        const auto a = random_tensor<float>({m, k}, rng), b = random_tensor<float>({k, n}, rng);
        Tensor<float> c1({m, n}), c2({m, n});
        kernels::gemm(m, n, k, a.data(), b.data(), c1.data());
        reference::gemm(m, n, k, a.data(), b.data(), c2.data());
        CHECK(c1 == c2);
    }
}

TEST_CASE("blocked convolutions agree with the naive loops")
{
    for (const auto &r : rctest::oracle_suite<double>(5, 20)) {
        INFO(r.op << " " << r.shapes);
        CHECK(r.mismatches == 0);
    }
    for (const auto &r : rctest::oracle_suite<float>(6, 20)) {
        INFO(r.op << " " << r.shapes);
        CHECK(r.mismatches == 0);
    }
}

TEST_CASE("convolution backward agrees with the scatter reference")
{
    std::mt19937_64 rng(3);
    for (int c = 0; c < 10; ++c) {
        const int ci = rctest::rand_int(rng, 1, 3), co = rctest::rand_int(rng, 1, 3), h = rctest::rand_int(rng, 4, 8);
        const int s = rctest::rand_int(rng, 1, 2), k = rctest::rand_int(rng, 2, 4), p = rctest::rand_int(rng, 0, 1);
        for (bool transpose : {false, true}) {
            const auto x = random_tensor<double>({1, ci, h, h}, rng);
            const auto w = random_tensor<double>(transpose ? Shape{ci, co, k, k} : Shape{co, ci, k, k}, rng);
            const Tensor<double> y = transpose ? kernels::conv_transpose2d(x, w, s, p) : kernels::conv2d(x, w, s, p);
            const auto dy = random_tensor<double>(y.shape(), rng);
            Tensor<double> dx(x.shape()), dw(w.shape()), rx(x.shape()), rw(w.shape());
            if (transpose) {
                kernels::conv_transpose2d_backward(x, w, dy, s, p, &dx, &dw);
                reference::conv_transpose2d_backward(x, w, dy, s, p, rx, rw);
            } else {
                kernels::conv2d_backward(x, w, dy, s, p, &dx, &dw);
                reference::conv2d_backward(x, w, dy, s, p, rx, rw);
            }
            for (size_t i = 0; i < dx.size(); ++i)
                REQUIRE(dx[i] == doctest::Approx(rx[i]).epsilon(1e-12));
            for (size_t i = 0; i < dw.size(); ++i)
                REQUIRE(dw[i] == doctest::Approx(rw[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("conv2d examples")
{
    SUBCASE("1x1 identity kernel")
    {
        std::mt19937_64 rng(1);
        const auto x = random_tensor<float>({1, 3, 5, 4}, rng);
        Tensor<float> w({3, 3, 1, 1});
        for (int c = 0; c < 3; ++c)
            w.at(c, c, 0, 0) = 1.0f;
        CHECK(kernels::conv2d(x, w, 1, 0) == x);
    }
    SUBCASE("3x3 ones on ones")
    {
        const Tensor<float> x({1, 1, 3, 3}, 1.0f), w({1, 1, 3, 3}, 1.0f);
        const auto y = kernels::conv2d(x, w, 1, 0);
        CHECK(y.shape() == Shape{1, 1, 1, 1});
        CHECK(y[0] == 9.0f);
    }
    SUBCASE("output size formula")
    {
        for (int h = 1; h < 12; ++h)
            for (int k = 1; k <= 4; ++k)
                for (int s = 1; s <= 3; ++s)
                    for (int p = 0; p <= 2; ++p)
                        if (h + 2 * p >= k)
                            CHECK(kernels::conv_out_dim(h, k, s, p) == (h + 2 * p - k) / s + 1);
    }
    SUBCASE("channel mismatch throws")
    {
        CHECK_THROWS(kernels::conv2d(Tensor<float>({1, 2, 4, 4}), Tensor<float>({1, 3, 2, 2}), 1, 0));
    }
}

TEST_CASE("conv_transpose2d examples")
{
    SUBCASE("stride 2 on 1x1 input scales the kernel")
    {
        const Tensor<float> x({1, 1, 1, 1}, 3.0f);
        Tensor<float> w({1, 1, 2, 2}, std::vector<float>{1, 2, 3, 4});
        const auto y = kernels::conv_transpose2d(x, w, 2, 0);
        CHECK(y.shape() == Shape{1, 1, 2, 2});
        CHECK(y.vec() == std::vector<float>{3, 6, 9, 12});
    }
    SUBCASE("k4 s2 p1 restores the size halved by conv")
    {
        for (int h : {2, 4, 8, 16, 64}) {
            const int down = kernels::conv_out_dim(h, 4, 2, 1);
            CHECK(kernels::conv_transpose_out_dim(down, 4, 2, 1) == h);
        }
    }
}

TEST_CASE("gradient checks in double")
{
    const auto results = rctest::gradient_suite(2024, 5);
    std::map<std::string, int> per_op;
    for (const auto &r : results) {
        INFO(r.op << " " << r.shapes << " rel_err " << r.rel_err);
        CHECK(r.rel_err < 1e-4);
        per_op[r.op.substr(0, r.op.find(' '))]++;
    }
    for (const auto &[op, n] : per_op) {
        INFO(op);
        CHECK(n >= 5);
    }
}

TEST_CASE("batchnorm")
{
    SUBCASE("standardized input passes through")
    {
        std::mt19937_64 rng(4);
        auto x = random_tensor<double>({1, 2, 6, 6}, rng);
        for (int c = 0; c < 2; ++c) {
            double m = 0, v = 0;
            for (int i = 0; i < 36; ++i)
                m += x[c * 36 + i] / 36;
            for (int i = 0; i < 36; ++i)
                v += (x[c * 36 + i] - m) * (x[c * 36 + i] - m) / 36;
            for (int i = 0; i < 36; ++i)
                x[c * 36 + i] = (x[c * 36 + i] - m) / std::sqrt(v);
        }
        BatchNormStats<double> st(2);
        const auto y = batchnorm(Var<double>(x), Var<double>(Tensor<double>({2}, 1.0)),
                                 Var<double>(Tensor<double>({2}, 0.0)), st, true);
        for (size_t i = 0; i < x.size(); ++i)
            CHECK(std::abs(y.value()[i] - x[i]) < 1e-5);
    }
    SUBCASE("constant input gives beta")
    {
        BatchNormStats<float> st(3);
        const auto y = batchnorm(Var<float>(Tensor<float>({1, 3, 4, 4}, 2.5f)), Var<float>(Tensor<float>({3}, 1.3f)),
                                 Var<float>(Tensor<float>({3}, std::vector<float>{0.1f, -0.2f, 0.7f})), st, true);
        for (int c = 0; c < 3; ++c)
            for (int i = 0; i < 16; ++i)
                CHECK(y.value()[c * 16 + i] == doctest::Approx(std::vector<float>{0.1f, -0.2f, 0.7f}[c]));
    }
    SUBCASE("running statistics use momentum 0.9")
    {
        Tensor<double> x({1, 1, 2, 2}, std::vector<double>{1, 2, 3, 6});
        BatchNormStats<double> st(1);
        batchnorm(Var<double>(x), Var<double>(Tensor<double>({1}, 1.0)), Var<double>(Tensor<double>({1}, 0.0)), st,
                  true);
        // mean 3, unbiased variance (4 + 1 + 0 + 9) / 3
        CHECK(st.running_mean[0] == doctest::Approx(0.9 * 0 + 0.1 * 3));
        CHECK(st.running_var[0] == doctest::Approx(0.9 * 1 + 0.1 * 14.0 / 3));
    }
    SUBCASE("infer mode uses running statistics")
    {
        BatchNormStats<double> st(1);
        st.running_mean[0] = 1.0;
        st.running_var[0] = 4.0;
        const auto y = batchnorm(Var<double>(Tensor<double>({1, 1, 1, 2}, std::vector<double>{1, 5})),
                                 Var<double>(Tensor<double>({1}, 2.0)), Var<double>(Tensor<double>({1}, 0.5)), st,
                                 false);
        CHECK(y.value()[0] == doctest::Approx(0.5));
        CHECK(y.value()[1] == doctest::Approx(2.0 * 4 / std::sqrt(4 + 1e-5) + 0.5));
        CHECK(st.running_mean[0] == 1.0);
    }
}

TEST_CASE("activations")
{
    const Var<double> x(Tensor<double>({1, 1, 1, 3}, std::vector<double>{-1, 0, 2}));
    CHECK(sigmoid(x).value()[1] == 0.5);
    CHECK(tanh(x).value()[1] == 0.0);
    CHECK(relu(x).value().vec() == std::vector<double>{0, 0, 2});
    CHECK(leaky_relu(x).value()[0] == doctest::Approx(-0.2));
    CHECK(leaky_relu(x).value()[2] == 2.0);
    CHECK(affine(x, 0.5, 0.5).value().vec() == std::vector<double>{0, 0.5, 1.5});
}

TEST_CASE("dropout")
{
    std::mt19937_64 rng(9);
    const Var<float> x(random_tensor<float>({1, 2, 8, 8}, rng));
    SUBCASE("rate 0 and infer mode are identity")
    {
        CHECK(dropout(x, 0.0f, rng, true).value() == x.value());
        CHECK(dropout(x, 0.5f, rng, false).value() == x.value());
    }
    SUBCASE("fixed seed gives a fixed mask")
    {
        std::mt19937_64 a(5), b(5);
        CHECK(dropout(x, 0.5f, a, true).value() == dropout(x, 0.5f, b, true).value());
    }
    SUBCASE("survivors are scaled so the mean is preserved")
    {
        const Var<double> ones(Tensor<double>({1, 1, 100, 100}, 1.0));
        std::mt19937_64 r(1);
        double mean = 0;
        const int trials = 20;
        for (int t = 0; t < trials; ++t) {
            const auto y = dropout(ones, 0.5, r, true);
            for (double v : y.value().vec()) {
                CHECK((v == 0.0 || v == 2.0));
                mean += v;
            }
        }
        mean /= trials * 10000.0;
        CHECK(std::abs(mean - 1.0) < 0.02);
    }
    SUBCASE("rate 1 is rejected")
    {
        CHECK_THROWS(dropout(x, 1.0f, rng, true));
    }
}

TEST_CASE("losses")
{
    const Var<double> half(Tensor<double>({1, 1}, 0.5));
    CHECK(bce(half, 1.0).value()[0] == doctest::Approx(std::log(2.0)));
    CHECK(bce(half, 0.0).value()[0] == doctest::Approx(std::log(2.0)));
    CHECK(bce(Var<double>(Tensor<double>({1, 1}, 1.0)), 1.0).value()[0] <= 1.7e-6);
    CHECK(bce(Var<double>(Tensor<double>({1, 1}, 0.0)), 0.0).value()[0] <= 1.7e-6);
    CHECK(bce(Var<float>(Tensor<float>({1, 1}, 0.0f)), 1.0f).value()[0] == doctest::Approx(-std::log(1e-7)).epsilon(1e-3));

    const Var<double> a(Tensor<double>({1, 2, 3, 3}, 1.0)), b(Tensor<double>({1, 2, 3, 3}, 0.0));
    CHECK(l1(a, a).value()[0] == 0.0);
    CHECK(l1(a, b).value()[0] == 1.0);
    CHECK_THROWS(l1(a, Var<double>(Tensor<double>({1, 2, 3, 2}))));
}

TEST_CASE("ops without gradient inputs record no graph")
{
    const Var<float> x(Tensor<float>({1, 1, 2, 2}, 1.0f));
    const auto y = relu(x);
    CHECK_FALSE(y.requires_grad());
    CHECK(y.node()->inputs.empty());
}

TEST_CASE("adam")
{
    SUBCASE("first step with unit gradient moves by lr")
    {
        Var<double> p(Tensor<double>({3}, 0.25), true);
        Adam<double> opt({p}, AdamConfig{});
        p.grad().fill(1.0);
        opt.step();
        for (double v : p.value().vec())
            CHECK(v - 0.25 == doctest::Approx(-2e-4).epsilon(1e-6));
        CHECK(opt.t() == 1);
    }
    SUBCASE("zero gradient from zero state does not move")
    {
        Var<double> p(Tensor<double>({4}, 0.7), true);
        Adam<double> opt({p}, AdamConfig{});
        p.grad().fill(0.0);
        opt.step();
        for (double v : p.value().vec())
            CHECK(v == 0.7);
    }
    SUBCASE("bias-corrected recurrence over several steps")
    {
        Var<double> p(Tensor<double>({1}, 0.0), true);
        const AdamConfig cfg{1e-2, 0.9, 0.99, 1e-8};
        Adam<double> opt({p}, cfg);
        double m = 0, v = 0, theta = 0;
        const double gs[] = {0.3, -1.2, 0.8, 2.0};
        for (int t = 1; t <= 4; ++t) {
            p.grad()[0] = gs[t - 1];
            opt.step();
            m = cfg.beta1 * m + (1 - cfg.beta1) * gs[t - 1];
            v = cfg.beta2 * v + (1 - cfg.beta2) * gs[t - 1] * gs[t - 1];
            const double mh = m / (1 - std::pow(cfg.beta1, t)), vh = v / (1 - std::pow(cfg.beta2, t));
            theta -= cfg.lr * mh / (std::sqrt(vh) + cfg.eps);
            CHECK(p.value()[0] == doctest::Approx(theta).epsilon(1e-12));
        }
    }
    SUBCASE("identical state and gradients give identical updates")
    {
        std::mt19937_64 rng(2);
        const auto init = random_tensor<float>({5}, rng), g = random_tensor<float>({5}, rng);
        Var<float> a(init, true), b(init, true);
        Adam<float> oa({a}, AdamConfig{}), ob({b}, AdamConfig{});
        a.grad() = g;
        b.grad() = g;
        oa.step();
        ob.step();
        CHECK(a.value() == b.value());
        CHECK(oa.m()[0] == ob.m()[0]);
    }
}
