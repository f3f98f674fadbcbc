#include <doctest.h>

#include <cmath>
#include <random>

#include "crossview/nn/tensor.hpp"

using namespace crossview::nn;

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, bool requires_grad = true) {
    std::normal_distribution<float> d(0.0f, 1.0f);
    auto t = make_tensor(std::move(shape), requires_grad);
    for (auto& v : t->value) v = d(rng);
    return t;
}

// Central finite difference of a scalar-valued graph w.r.t. one input.
void check_gradient(const std::function<Tensor()>& build, Tensor input, float tol = 2e-2f) {
    Tensor loss = build();
    REQUIRE(loss->numel() == 1);
    input->grad.assign(input->value.size(), 0.0f);  // isolate from earlier sweeps
    backward(loss);
    std::vector<float> analytic = input->grad;
    const float eps = 1e-2f;
    for (std::size_t i = 0; i < input->value.size(); ++i) {
        const float keep = input->value[i];
        input->value[i] = keep + eps;
        const float up = build()->value[0];
        input->value[i] = keep - eps;
        const float dn = build()->value[0];
        input->value[i] = keep;
        const float numeric = (up - dn) / (2.0f * eps);
        CHECK(analytic[i] == doctest::Approx(numeric).epsilon(tol).scale(1.0));
    }
}

}  // namespace

TEST_CASE("broadcast add and backward") {
    auto a = from_values({2, 3}, {1, 2, 3, 4, 5, 6}, true);
    auto b = from_values({3}, {10, 20, 30}, true);
    auto s = sum_all(add(a, b));
    CHECK(s->value[0] == doctest::Approx(21 + 60 + 60));
    backward(s);
    for (float g : a->grad) CHECK(g == doctest::Approx(1.0f));
    for (float g : b->grad) CHECK(g == doctest::Approx(2.0f));  // broadcast over 2 rows
}

TEST_CASE("matmul forward against hand computation") {
    auto a = from_values({2, 3}, {1, 2, 3, 4, 5, 6}, true);
    auto b = from_values({3, 2}, {7, 8, 9, 10, 11, 12}, true);
    auto c = matmul(a, b);
    REQUIRE(c->shape == Shape({2, 2}));
    CHECK(c->value[0] == doctest::Approx(58));
    CHECK(c->value[1] == doctest::Approx(64));
    CHECK(c->value[2] == doctest::Approx(139));
    CHECK(c->value[3] == doctest::Approx(154));
}

TEST_CASE("batched matmul with shared weight accumulates weight grads") {
    std::mt19937_64 rng(1);
    auto a = random_tensor({2, 3, 4}, rng);
    auto w = random_tensor({4, 5}, rng);
    check_gradient([&] { return sum_all(matmul(a, w)); }, w);
    check_gradient([&] { return sum_all(matmul(a, w)); }, a);
}

TEST_CASE("matmul transpose_b gradient") {
    std::mt19937_64 rng(2);
    auto a = random_tensor({3, 4}, rng);
    auto b = random_tensor({5, 4}, rng);
    check_gradient([&] { return sum_all(matmul(a, b, true)); }, a);
    check_gradient([&] { return sum_all(matmul(a, b, true)); }, b);
}

TEST_CASE("softmax rows sum to one and gradient checks") {
    std::mt19937_64 rng(3);
    auto z = random_tensor({4, 6}, rng);
    auto s = softmax_last(z);
    for (int r = 0; r < 4; ++r) {
        float sum = 0.0f;
        for (int c = 0; c < 6; ++c) sum += s->value[static_cast<std::size_t>(r * 6 + c)];
        CHECK(sum == doctest::Approx(1.0f).epsilon(1e-6));
    }
    auto pick = from_values({4, 6}, std::vector<float>(24, 0.0f));
    for (int r = 0; r < 4; ++r) pick->value[static_cast<std::size_t>(r * 6 + r)] = 1.0f;
    check_gradient([&] { return sum_all(mul(softmax_last(z), pick)); }, z);
}

TEST_CASE("layernorm output statistics and gradient") {
    std::mt19937_64 rng(4);
    auto x = random_tensor({3, 8}, rng);
    auto g = from_values({8}, std::vector<float>(8, 1.0f), true);
    auto b = from_values({8}, std::vector<float>(8, 0.0f), true);
    auto y = layernorm(x, g, b);
    for (int r = 0; r < 3; ++r) {
        float mean = 0.0f, var = 0.0f;
        for (int c = 0; c < 8; ++c) mean += y->value[static_cast<std::size_t>(r * 8 + c)];
        mean /= 8.0f;
        for (int c = 0; c < 8; ++c) {
            const float d = y->value[static_cast<std::size_t>(r * 8 + c)] - mean;
            var += d * d;
        }
        CHECK(mean == doctest::Approx(0.0f).scale(1.0).epsilon(1e-5));
        CHECK(var / 8.0f == doctest::Approx(1.0f).epsilon(1e-2));
    }
    auto weight = random_tensor({8}, rng, false);
    check_gradient([&] { return sum_all(mul(layernorm(x, g, b), tile_rows(weight, 3))); }, x,
                   5e-2f);
}

TEST_CASE("permute and reshape round trip") {
    auto a = from_values({2, 3, 4}, [] {
        std::vector<float> v(24);
        for (std::size_t i = 0; i < 24; ++i) v[i] = static_cast<float>(i);
        return v;
    }(), true);
    auto p = permute(a, {1, 0, 2});
    REQUIRE(p->shape == Shape({3, 2, 4}));
    // Element (j, i, k) of p equals element (i, j, k) of a.
    CHECK(p->value[static_cast<std::size_t>((1 * 2 + 1) * 4 + 2)] ==
          doctest::Approx(a->value[static_cast<std::size_t>((1 * 3 + 1) * 4 + 2)]));
    auto back = permute(p, {1, 0, 2});
    for (std::size_t i = 0; i < 24; ++i) CHECK(back->value[i] == a->value[i]);

    auto r = reshape(a, {6, -1});
    REQUIRE(r->shape == Shape({6, 4}));
}

TEST_CASE("gelu and exp/log gradients") {
    std::mt19937_64 rng(6);
    auto x = random_tensor({2, 5}, rng);
    check_gradient([&] { return sum_all(gelu(x)); }, x);
    auto pos = random_tensor({2, 5}, rng);
    for (auto& v : pos->value) v = std::abs(v) + 0.5f;
    check_gradient([&] { return sum_all(log_t(pos)); }, pos);
    check_gradient([&] { return mean_all(exp_t(mul_scalar(x, 0.3f))); }, x);
}

TEST_CASE("concat_last splits gradient between inputs") {
    std::mt19937_64 rng(7);
    auto a = random_tensor({3, 4}, rng);
    auto b = random_tensor({3, 2}, rng);
    auto c = concat_last(a, b);
    REQUIRE(c->shape == Shape({3, 6}));
    check_gradient([&] { return sum_all(mul(concat_last(a, b), concat_last(a, b))); }, a, 5e-2f);
}

TEST_CASE("embedding forward and scatter-add backward") {
    auto table = from_values({3, 2}, {1, 2, 3, 4, 5, 6}, true);
    auto e = embedding(table, {2, 0, 2});
    REQUIRE(e->shape == Shape({3, 2}));
    CHECK(e->value[0] == doctest::Approx(5));
    CHECK(e->value[5] == doctest::Approx(6));
    backward(sum_all(e));
    CHECK(table->grad[0] == doctest::Approx(1.0f));  // row 0 used once
    CHECK(table->grad[4] == doctest::Approx(2.0f));  // row 2 used twice
    CHECK(table->grad[2] == doctest::Approx(0.0f));  // row 1 unused
}

TEST_CASE("repeat_rows and tile_rows") {
    auto a = from_values({2, 3}, {1, 2, 3, 4, 5, 6}, true);
    auto r = repeat_rows(a, 2);
    REQUIRE(r->shape == Shape({4, 3}));
    CHECK(r->value[3] == doctest::Approx(1));  // second copy of row 0
    backward(sum_all(r));
    for (float g : a->grad) CHECK(g == doctest::Approx(2.0f));

    auto v = from_values({3}, {7, 8, 9}, true);
    auto t = tile_rows(v, 4);
    REQUIRE(t->shape == Shape({4, 3}));
    backward(sum_all(t));
    for (float g : v->grad) CHECK(g == doctest::Approx(4.0f));
}

TEST_CASE("mean and sum reductions over axes") {
    auto a = from_values({2, 3}, {1, 2, 3, 4, 5, 6}, true);
    auto m0 = mean_axis(a, 0);
    REQUIRE(m0->shape == Shape({3}));
    CHECK(m0->value[0] == doctest::Approx(2.5));
    auto s1 = sum_axis(a, 1);
    REQUIRE(s1->shape == Shape({2}));
    CHECK(s1->value[1] == doctest::Approx(15));
}
