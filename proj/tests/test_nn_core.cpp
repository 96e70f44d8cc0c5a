#include <doctest.h>

#include <cmath>
#include <vector>

#include "ccrec/autodiff.hpp"

using namespace ccrec;

namespace
{
    GruCellParams zero_cell(std::size_t input_dim, std::size_t hidden_dim)
    {
        return GruCellParams(input_dim, hidden_dim, "cell");
    }

    GruCellParams random_cell(std::size_t input_dim, std::size_t hidden_dim, std::uint64_t seed)
    {
        GruCellParams cell(input_dim, hidden_dim, "cell");
        Rng rng(seed);
        cell.init(rng);
        return cell;
    }
}

TEST_CASE("gru with zero weights halves the initial state each step")
{
    // sigma(0) = 0.5 and tanh(0) = 0, so h_t = 0.5 * h_{t-1}
    GruCellParams cell = zero_cell(3, 4);
    const std::vector<std::vector<double>> inputs = {{1, 2, 3}, {0.5, -1, 2}};
    const std::vector<double> h0 = {0.8, -0.4, 0.2, 1.0};
    const auto states = gru_forward(cell, inputs, h0);
    REQUIRE(states.size() == 2);
    for (std::size_t i = 0; i < h0.size(); ++i)
    {
        CHECK(states[0][i] == doctest::Approx(0.5 * h0[i]).epsilon(1e-15));
        CHECK(states[1][i] == doctest::Approx(0.25 * h0[i]).epsilon(1e-15));
    }
}

TEST_CASE("gru forward base cases and dimensions")
{
    GruCellParams cell = random_cell(3, 100, 11);
    CHECK(gru_forward(cell, {}, std::vector<double>(100, 0.0)).empty());

    const std::vector<std::vector<double>> inputs = {{1, 0, -1}};
    const auto states = gru_forward(cell, inputs, std::vector<double>(100, 0.0));
    REQUIRE(states.size() == 1);
    CHECK(states[0].size() == 100);
    for (double v : states[0])
    {
        CHECK(v > -1.0);
        CHECK(v < 1.0);
    }

    CHECK_THROWS_AS(gru_forward(cell, inputs, std::vector<double>(7, 0.0)), DimensionError);
    const std::vector<std::vector<double>> bad = {{1, 0}};
    CHECK_THROWS_AS(gru_forward(cell, bad, std::vector<double>(100, 0.0)), DimensionError);
}

TEST_CASE("gru tape step matches the plain step exactly")
{
    GruCellParams cell = random_cell(4, 5, 3);
    Rng rng(17);
    std::vector<double> x(4);
    std::vector<double> h(5);
    for (double& v : x)
    {
        v = rng.uniform(-1, 1);
    }
    for (double& v : h)
    {
        v = rng.uniform(-1, 1);
    }
    Tape tape;
    const auto out = cell.step(tape, tape.constant(x), tape.constant(h));
    const auto plain = gru_step(cell, x, h);
    for (std::size_t i = 0; i < plain.size(); ++i)
    {
        CHECK(tape.value(out)[i] == plain[i]);
    }
}

TEST_CASE("dense forward")
{
    ParamTensor w("w", {2, 2});
    w.values = {1, 0, 0, 1};
    ParamTensor b("b", {2}, false);

    SUBCASE("identity")
    {
        const auto out = dense_forward(w, b, std::vector<double>{3.5, -2});
        CHECK(out[0] == 3.5);
        CHECK(out[1] == -2);
    }
    SUBCASE("zero mask leaves only the bias")
    {
        w.mask = {0, 0, 0, 0};
        b.values = {4, 5};
        const auto out = dense_forward(w, b, std::vector<double>{3.5, -2});
        CHECK(out[0] == 4);
        CHECK(out[1] == 5);
    }
    SUBCASE("hand-computed affine map")
    {
        ParamTensor w1("w1", {1, 2});
        w1.values = {1, 2};
        ParamTensor b1("b1", {1}, false);
        b1.values = {5};
        const auto out = dense_forward(w1, b1, std::vector<double>{3, 4});
        REQUIRE(out.size() == 1);
        CHECK(out[0] == 16);
    }
    SUBCASE("shape mismatch")
    {
        CHECK_THROWS_AS(dense_forward(w, b, std::vector<double>{1, 2, 3}), DimensionError);
    }
}

TEST_CASE("softmax cross entropy")
{
    SUBCASE("uniform scores give ln(n)")
    {
        const std::vector<double> scores(7, 1.25);
        const auto [loss, probs] = softmax_cross_entropy(scores, 3);
        CHECK(loss == doctest::Approx(std::log(7.0)).epsilon(1e-14));
        double sum = 0;
        for (double p : probs)
        {
            CHECK(p >= 0.0);
            CHECK(p <= 1.0);
            sum += p;
        }
        CHECK(std::abs(sum - 1.0) < 1e-12);
    }
    SUBCASE("large scores stay finite")
    {
        const std::vector<double> scores = {1000.0, 0.0};
        const auto [loss, probs] = softmax_cross_entropy(scores, 0);
        CHECK(std::isfinite(loss));
        CHECK(loss == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(probs[0] == doctest::Approx(1.0));
    }
    SUBCASE("frozen value for scores {1,2,3} target 2")
    {
        const std::vector<double> scores = {1, 2, 3};
        const auto [loss, probs] = softmax_cross_entropy(scores, 2);
        CHECK(loss == doctest::Approx(0.40760596444438034).epsilon(1e-14));
    }
    SUBCASE("out-of-range target")
    {
        const std::vector<double> scores = {1, 2, 3};
        CHECK_THROWS_AS(softmax_cross_entropy(scores, 3), std::out_of_range);
    }
}

TEST_CASE("backward on a parameter sum gives masked all-ones")
{
    ParamTensor p("p", {2, 3});
    p.values = {1, 2, 3, 4, 5, 6};
    p.mask = {1, 1, 0, 1, 1, 1};
    p.values[2] = 0.0;
    Tape tape;
    const auto root = tape.param_sum(p);
    CHECK(tape.scalar(root) == 1 + 2 + 4 + 5 + 6);
    tape.backward(root);
    const std::vector<double> expected = {1, 1, 0, 1, 1, 1};
    for (std::size_t i = 0; i < 6; ++i)
    {
        CHECK(p.grad[i] == expected[i]);
    }
}

TEST_CASE("backward before forward is an error")
{
    Tape tape;
    CHECK_THROWS_AS(tape.backward(0), std::logic_error);
}

TEST_CASE("backward requires a scalar root")
{
    Tape tape;
    const auto v = tape.constant({1, 2});
    CHECK_THROWS_AS(tape.backward(v), DimensionError);
}

TEST_CASE("masked coordinates receive exactly zero gradient")
{
    ParamTensor w("w", {2, 2});
    w.values = {1, 2, 3, 4};
    w.mask = {1, 0, 1, 1};
    w.apply_mask();
    ParamTensor b("b", {2}, false);
    Tape tape;
    const auto x = tape.constant({1.0, 1.0});
    const auto y = tape.affine(w, b, x);
    const auto root = tape.cross_entropy(y, 0);
    tape.backward(root);
    CHECK(w.grad[1] == 0.0);
    CHECK(w.grad[0] != 0.0);
}

TEST_CASE("finite differences agree with the tape on every layer")
{
    Rng rng(99);

    SUBCASE("dense + cross entropy")
    {
        ParamTensor w("w", {4, 3});
        ParamTensor b("b", {4}, false);
        init_uniform(w, rng);
        const std::vector<double> x = {0.3, -0.8, 0.5};
        std::vector<ParamTensor*> params = {&w, &b};
        const auto loss = [&] {
            Tape t;
            return t.scalar(t.cross_entropy(t.affine(w, b, t.constant(x)), 2));
        };
        Tape t;
        const auto root = t.cross_entropy(t.affine(w, b, t.constant(x)), 2);
        t.backward(root);
        CHECK(finite_diff_check(loss, params, 1e-5) < 1e-8);
    }

    SUBCASE("gru cell + cross entropy")
    {
        GruCellParams cell = random_cell(3, 4, 5);
        ParamTensor w("w", {5, 4});
        ParamTensor b("b", {5}, false);
        init_uniform(w, rng);
        const std::vector<double> x1 = {0.3, -0.8, 0.5};
        const std::vector<double> x2 = {-0.2, 0.4, 0.9};
        auto params = cell.params();
        params.push_back(&w);
        params.push_back(&b);
        const auto loss = [&] {
            Tape t;
            auto h = t.constant(std::vector<double>(4, 0.0));
            h = cell.step(t, t.constant(x1), h);
            h = cell.step(t, t.constant(x2), h);
            return t.scalar(t.cross_entropy(t.affine(w, b, h), 1));
        };
        Tape t;
        auto h = t.constant(std::vector<double>(4, 0.0));
        h = cell.step(t, t.constant(x1), h);
        h = cell.step(t, t.constant(x2), h);
        t.backward(t.cross_entropy(t.affine(w, b, h), 1));
        CHECK(finite_diff_check(loss, params, 1e-5) < 1e-6);
    }
}

TEST_CASE("finite difference oracle base cases")
{
    ParamTensor p("p", {2, 2});
    p.values = {0.5, -1.5, 2.0, 0.25};

    SUBCASE("quadratic function is exact up to rounding")
    {
        std::vector<ParamTensor*> params = {&p};
        const auto loss = [&] {
            double acc = 0;
            for (std::size_t i = 0; i < p.size(); ++i)
            {
                acc += p.at(i) * p.at(i);
            }
            return acc;
        };
        for (std::size_t i = 0; i < p.size(); ++i)
        {
            p.grad[i] = 2.0 * p.values[i];
        }
        CHECK(finite_diff_check(loss, params, 1e-5) < 1e-8);
    }
    SUBCASE("constant function gives zero error against zero grads")
    {
        std::vector<ParamTensor*> params = {&p};
        p.zero_grad();
        CHECK(finite_diff_check([] { return 42.0; }, params, 1e-5) == 0.0);
    }
}

TEST_CASE("adagrad")
{
    ParamTensor p("p", {1, 3});
    p.values = {1.0, 1.0, 1.0};
    std::vector<ParamTensor*> params = {&p};
    Adagrad opt;
    opt.reset(params);

    SUBCASE("first step moves by about lr in the gradient direction")
    {
        p.grad = {0.3, -0.7, 0.0};
        opt.step(params);
        CHECK(p.values[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
        CHECK(p.values[1] == doctest::Approx(1.0 + 0.01).epsilon(1e-6));
        CHECK(p.values[2] == 1.0); // zero gradient leaves the value alone
        CHECK(opt.accum[0][2] == 0.0);
    }

    SUBCASE("second equal gradient shrinks the step by sqrt(2)")
    {
        p.grad = {0.3, 0.3, 0.3};
        opt.step(params);
        const double after_first = p.values[0];
        p.grad = {0.3, 0.3, 0.3};
        opt.step(params);
        const double second_step = after_first - p.values[0];
        CHECK(second_step == doctest::Approx(0.01 / std::sqrt(2.0)).epsilon(1e-6));
    }

    SUBCASE("masked entries are untouched")
    {
        p.mask[1] = 0;
        p.values[1] = 0.0;
        p.grad = {0.5, 0.5, 0.5};
        opt.step(params);
        CHECK(p.values[1] == 0.0);
        CHECK(opt.accum[0][1] == 0.0);
    }

    SUBCASE("accumulators never decrease")
    {
        Rng rng(7);
        std::vector<double> previous(3, 0.0);
        for (int step = 0; step < 50; ++step)
        {
            for (double& g : p.grad)
            {
                g = rng.uniform(-1, 1);
            }
            opt.step(params);
            for (std::size_t i = 0; i < 3; ++i)
            {
                CHECK(opt.accum[0][i] >= previous[i]);
                previous[i] = opt.accum[0][i];
            }
        }
    }
}

TEST_CASE("mask persistence through forward/backward/step cycles")
{
    Rng rng(21);
    ParamTensor w("w", {3, 3});
    init_uniform(w, rng);
    ParamTensor b("b", {3}, false);
    w.mask = {1, 0, 1, 0, 1, 1, 1, 1, 0};
    w.apply_mask();
    std::vector<ParamTensor*> params = {&w, &b};
    Adagrad opt;
    opt.reset(params);
    for (int cycle = 0; cycle < 20; ++cycle)
    {
        Tape tape;
        const auto x = tape.constant({0.5, -1.0, 0.25});
        const auto root = tape.cross_entropy(tape.affine(w, b, x),
                                             static_cast<std::size_t>(cycle % 3));
        for (auto* pt : params)
        {
            pt->zero_grad();
        }
        tape.backward(root);
        opt.step(params);
    }
    for (std::size_t i = 0; i < w.size(); ++i)
    {
        if (w.mask[i] == 0)
        {
            CHECK(w.values[i] == 0.0);
        }
    }
}

TEST_CASE("seeded initialization is deterministic")
{
    Rng a(123);
    Rng b(123);
    ParamTensor p("p", {8, 8});
    ParamTensor q("q", {8, 8});
    init_uniform(p, a);
    init_uniform(q, b);
    CHECK(p.values == q.values);
}
