#include <doctest.h>

#include <cmath>
#include <random>

#include "crossview/model.hpp"

using namespace crossview;
using namespace crossview::model;
using nn::Shape;
using nn::Tensor;
using nn::from_values;

namespace {

GcvitConfig micro_config() {
    GcvitConfig cfg;
    cfg.chip_size = 32;
    cfg.patch_size = 4;  // resolutions 8, 4, 2, 1
    cfg.stage_depths = {1, 1, 1, 1};
    cfg.stage_dims = {8, 8, 16, 16};
    cfg.window_sizes = {2, 2, 1, 1};
    cfg.num_heads = {2, 2, 2, 2};
    cfg.mlp_ratio = 2;
    return cfg;
}

std::vector<float> random_chip_values(int batch, int size, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    std::vector<float> v(static_cast<std::size_t>(batch) * size * size * 3);
    for (auto& x : v) x = u(rng);
    return v;
}

// Direct evaluation of G = Softmax(g_q k^T / sqrt(s) + p) v for a single
// head, written independently of the tensor library.
std::vector<double> direct_attention(const std::vector<double>& gq,
                                     const std::vector<double>& k,
                                     const std::vector<double>& v,
                                     const std::vector<double>& p, int tokens, int dim,
                                     double s) {
    std::vector<double> out(static_cast<std::size_t>(tokens) * dim, 0.0);
    for (int i = 0; i < tokens; ++i) {
        std::vector<double> logits(tokens);
        for (int j = 0; j < tokens; ++j) {
            double dot = 0.0;
            for (int d = 0; d < dim; ++d)
                dot += gq[static_cast<std::size_t>(i * dim + d)] *
                       k[static_cast<std::size_t>(j * dim + d)];
            logits[static_cast<std::size_t>(j)] =
                dot / std::sqrt(s) + p[static_cast<std::size_t>(i * tokens + j)];
        }
        double mx = logits[0];
        for (double l : logits) mx = std::max(mx, l);
        double z = 0.0;
        for (double& l : logits) {
            l = std::exp(l - mx);
            z += l;
        }
        for (int j = 0; j < tokens; ++j)
            for (int d = 0; d < dim; ++d)
                out[static_cast<std::size_t>(i * dim + d)] +=
                    logits[static_cast<std::size_t>(j)] / z *
                    v[static_cast<std::size_t>(j * dim + d)];
    }
    return out;
}

}  // namespace

TEST_CASE("attention: single key/value token returns v regardless of g_q and p") {
    auto gq = from_values({1, 1, 4}, {3.0f, -2.0f, 0.5f, 9.0f});
    auto k = from_values({1, 1, 4}, {1.0f, 1.0f, 1.0f, 1.0f});
    auto v = from_values({1, 1, 4}, {7.0f, 8.0f, 9.0f, 10.0f});
    auto p = from_values({1, 1, 1}, {123.0f});
    auto g = global_token_attention(gq, k, v, p, 4.0f);
    for (int d = 0; d < 4; ++d)
        CHECK(g->value[static_cast<std::size_t>(d)] == doctest::Approx(7.0f + d));
}

TEST_CASE("attention: zero logits average the value rows") {
    auto gq = from_values({1, 2, 2}, std::vector<float>(4, 0.0f));
    auto k = from_values({1, 2, 2}, {1.0f, 2.0f, 3.0f, 4.0f});
    auto v = from_values({1, 2, 2}, {0.0f, 10.0f, 4.0f, 20.0f});
    auto p = from_values({1, 2, 2}, std::vector<float>(4, 0.0f));
    auto g = global_token_attention(gq, k, v, p, 2.0f);
    CHECK(g->value[0] == doctest::Approx(2.0f));
    CHECK(g->value[1] == doctest::Approx(15.0f));
}

TEST_CASE("attention matches the direct formula on random instances") {
    std::mt19937_64 rng(13);
    std::normal_distribution<double> d(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        const int heads = 1 + static_cast<int>(rng() % 4);
        const int tokens = 2 + static_cast<int>(rng() % 7);
        const int dim = 1 + static_cast<int>(rng() % 4);
        const float s = static_cast<float>(dim);

        std::vector<float> gq_v, k_v, v_v, p_v;
        for (int i = 0; i < heads * tokens * dim; ++i) {
            gq_v.push_back(static_cast<float>(d(rng)));
            k_v.push_back(static_cast<float>(d(rng)));
            v_v.push_back(static_cast<float>(d(rng)));
        }
        for (int i = 0; i < heads * tokens * tokens; ++i)
            p_v.push_back(static_cast<float>(d(rng)));

        auto g = global_token_attention(from_values({heads, tokens, dim}, gq_v),
                                        from_values({heads, tokens, dim}, k_v),
                                        from_values({heads, tokens, dim}, v_v),
                                        from_values({heads, tokens, tokens}, p_v), s);
        for (int h = 0; h < heads; ++h) {
            auto slice = [&](const std::vector<float>& src, int count) {
                std::vector<double> out;
                for (int i = 0; i < count; ++i)
                    out.push_back(src[static_cast<std::size_t>(h * count + i)]);
                return out;
            };
            auto expect = direct_attention(slice(gq_v, tokens * dim), slice(k_v, tokens * dim),
                                           slice(v_v, tokens * dim), slice(p_v, tokens * tokens),
                                           tokens, dim, s);
            for (int i = 0; i < tokens * dim; ++i) {
                const double got = g->value[static_cast<std::size_t>(h * tokens * dim + i)];
                CHECK(got == doctest::Approx(expect[static_cast<std::size_t>(i)])
                                 .epsilon(1e-5)
                                 .scale(1.0));
            }
        }
    }
}

TEST_CASE("attention gradient check") {
    std::mt19937_64 rng(19);
    std::normal_distribution<float> d(0.0f, 1.0f);
    for (int trial = 0; trial < 20; ++trial) {
        const int tokens = 3, dim = 2;
        auto mk = [&](Shape s) {
            auto t = nn::make_tensor(std::move(s), true);
            for (auto& v : t->value) v = d(rng);
            return t;
        };
        auto gq = mk({1, tokens, dim});
        auto k = mk({1, tokens, dim});
        auto v = mk({1, tokens, dim});
        auto p = mk({1, tokens, tokens});
        auto weight = mk({1, tokens, dim});
        weight->requires_grad = false;

        auto build = [&] {
            return nn::sum_all(nn::mul(global_token_attention(gq, k, v, p, 2.0f), weight));
        };
        for (Tensor input : {gq, k, v, p}) {
            auto loss = build();
            input->grad.assign(input->value.size(), 0.0f);
            nn::backward(loss);
            const auto analytic = input->grad;
            const float eps = 1e-2f;
            for (std::size_t i = 0; i < input->value.size(); ++i) {
                const float keep = input->value[i];
                input->value[i] = keep + eps;
                const float up = build()->value[0];
                input->value[i] = keep - eps;
                const float dn = build()->value[0];
                input->value[i] = keep;
                CHECK(analytic[i] ==
                      doctest::Approx((up - dn) / (2.0f * eps)).epsilon(1e-2).scale(1.0));
            }
        }
    }
}

TEST_CASE("cross entropy: uniform logits give ln C") {
    for (int c = 2; c <= 6; ++c) {
        auto z = from_values({1, c}, std::vector<float>(static_cast<std::size_t>(c), 0.7f));
        auto loss = softmax_cross_entropy(z, {0});
        CHECK(static_cast<double>(loss->value[0]) ==
              doctest::Approx(std::log(static_cast<double>(c))).epsilon(1e-6));
    }
}

TEST_CASE("cross entropy: saturated correct class") {
    auto z = from_values({1, 3}, {100.0f, 0.0f, 0.0f});
    auto loss = softmax_cross_entropy(z, {0});
    CHECK(loss->value[0] < 1e-10f);
}

TEST_CASE("cross entropy: z = (1,2,3), target class 2") {
    auto z = from_values({1, 3}, {1.0f, 2.0f, 3.0f});
    auto loss = softmax_cross_entropy(z, {2});
    CHECK(static_cast<double>(loss->value[0]) == doctest::Approx(0.407606).epsilon(1e-5));
}

TEST_CASE("focal loss reduces to cross entropy at gamma 0") {
    std::mt19937_64 rng(29);
    std::normal_distribution<float> d(0.0f, 2.0f);
    for (int trial = 0; trial < 100; ++trial) {
        const int C = 2 + static_cast<int>(rng() % 5);
        const int B = 1 + static_cast<int>(rng() % 4);
        std::vector<float> zv(static_cast<std::size_t>(B * C));
        for (auto& v : zv) v = d(rng);
        std::vector<int> targets;
        for (int b = 0; b < B; ++b) targets.push_back(static_cast<int>(rng() % C));
        auto z1 = from_values({B, C}, zv);
        auto z2 = from_values({B, C}, zv);
        const float ce = softmax_cross_entropy(z1, targets)->value[0];
        const float fl = focal_loss(z2, targets, 0.0f)->value[0];
        CHECK(fl == doctest::Approx(ce).epsilon(1e-6));
    }
}

TEST_CASE("focal loss equals CE times (1-p)^gamma on a single example") {
    auto z = from_values({1, 3}, {1.0f, 2.0f, 3.0f});
    const double p2 = std::exp(3.0) / (std::exp(1.0) + std::exp(2.0) + std::exp(3.0));
    const double expect = 0.40760596 * std::pow(1.0 - p2, 2.0);
    auto loss = focal_loss(z, {2}, 2.0f);
    CHECK(static_cast<double>(loss->value[0]) == doctest::Approx(expect).epsilon(1e-5));
}

TEST_CASE("focal loss vanishes faster than CE as confidence grows") {
    double prev_ratio = 1.0;
    for (float logit : {2.0f, 4.0f, 6.0f}) {
        auto z1 = from_values({1, 2}, {logit, 0.0f});
        auto z2 = from_values({1, 2}, {logit, 0.0f});
        const double ce = softmax_cross_entropy(z1, {0})->value[0];
        const double fl = focal_loss(z2, {0}, 2.0f)->value[0];
        const double ratio = fl / ce;
        CHECK(ratio < prev_ratio);
        prev_ratio = ratio;
    }
    CHECK(prev_ratio < 1e-3);
}

TEST_CASE("focal loss alpha weighting") {
    auto z1 = from_values({1, 2}, {1.0f, 0.0f});
    auto z2 = from_values({1, 2}, {1.0f, 0.0f});
    const float base = focal_loss(z1, {0}, 2.0f)->value[0];
    const float weighted = focal_loss(z2, {0}, 2.0f, {0.25f, 0.75f})->value[0];
    CHECK(weighted == doctest::Approx(0.25f * base).epsilon(1e-6));
}

TEST_CASE("loss gradient checks") {
    std::mt19937_64 rng(37);
    std::normal_distribution<float> d(0.0f, 1.5f);
    for (int trial = 0; trial < 20; ++trial) {
        const int C = 3 + static_cast<int>(rng() % 3);
        std::vector<float> zv(static_cast<std::size_t>(2 * C));
        for (auto& v : zv) v = d(rng);
        std::vector<int> targets = {static_cast<int>(rng() % C), static_cast<int>(rng() % C)};
        for (int use_focal = 0; use_focal < 2; ++use_focal) {
            auto z = from_values({2, C}, zv, true);
            auto build = [&] {
                return use_focal ? focal_loss(z, targets, 2.0f)
                                 : softmax_cross_entropy(z, targets);
            };
            auto loss = build();
            nn::backward(loss);
            const auto analytic = z->grad;
            const float eps = 1e-2f;
            for (std::size_t i = 0; i < zv.size(); ++i) {
                const float keep = z->value[i];
                z->value[i] = keep + eps;
                const float up = build()->value[0];
                z->value[i] = keep - eps;
                const float dn = build()->value[0];
                z->value[i] = keep;
                CHECK(analytic[i] ==
                      doctest::Approx((up - dn) / (2.0f * eps)).epsilon(1e-2).scale(0.1));
            }
        }
    }
}

TEST_CASE("relative bias index table symmetry") {
    const int w = 3, T = w * w;
    auto idx = relative_bias_indices(w);
    REQUIRE(static_cast<int>(idx.size()) == T * T);
    // Diagonal pairs share the zero-offset bucket.
    for (int i = 1; i < T; ++i) CHECK(idx[static_cast<std::size_t>(i * T + i)] == idx[0]);
    // All indices stay inside the (2w-1)^2 table.
    for (int v : idx) {
        CHECK(v >= 0);
        CHECK(v < (2 * w - 1) * (2 * w - 1));
    }
    // Same spatial offset, same bucket: tokens (0,1) and (3,4) both differ by
    // one column.
    CHECK(idx[static_cast<std::size_t>(0 * T + 1)] == idx[static_cast<std::size_t>(3 * T + 4)]);
}

TEST_CASE("stream forward: shapes, finiteness, determinism") {
    auto cfg = micro_config();
    Cgcvit net(cfg, 7);
    auto chips = from_values({2, 32, 32, 3}, random_chip_values(2, 32, 99));
    auto f1 = net.stream_forward(chips, 0);
    REQUIRE(f1->shape == Shape({2, cfg.stage_dims[3]}));
    for (float v : f1->value) CHECK(std::isfinite(v));
    auto f2 = net.stream_forward(chips, 0);
    for (std::size_t i = 0; i < f1->value.size(); ++i) CHECK(f1->value[i] == f2->value[i]);

    // Zero image still produces finite features.
    auto zero = from_values({1, 32, 32, 3},
                            std::vector<float>(static_cast<std::size_t>(32 * 32 * 3), 0.0f));
    auto fz = net.stream_forward(zero, 0);
    for (float v : fz->value) CHECK(std::isfinite(v));
}

TEST_CASE("pixels outside the footprint mask still influence the features") {
    // The mask lives in the data, not the model: changing fill pixels changes
    // the output.
    auto cfg = micro_config();
    Cgcvit net(cfg, 7);
    auto a_vals = random_chip_values(1, 32, 5);
    auto b_vals = a_vals;
    b_vals[0] += 0.5f;  // corner pixel, typically fill territory
    auto fa = net.stream_forward(from_values({1, 32, 32, 3}, a_vals), 0);
    auto fb = net.stream_forward(from_values({1, 32, 32, 3}, b_vals), 0);
    double diff = 0.0;
    for (std::size_t i = 0; i < fa->value.size(); ++i)
        diff += std::abs(fa->value[i] - fb->value[i]);
    CHECK(diff > 0.0);
}

TEST_CASE("fuse_and_classify: logit shapes and placeholder ablation") {
    auto cfg = micro_config();
    Cgcvit net(cfg, 7);
    auto chips = from_values({2, 32, 32, 3}, random_chip_values(2, 32, 1));
    auto top = net.stream_forward(chips, 0);
    auto facade = net.stream_forward(chips, 1);

    auto logits = net.fuse_and_classify(top, facade, 2);
    CHECK(logits.at(Task::Vegetation)->shape == Shape({2, 2}));
    CHECK(logits.at(Task::Roof)->shape == Shape({2, 6}));
    CHECK(logits.at(Task::Floors)->shape == Shape({2, 5}));

    // UAV-only: facade slot replaced by the learned placeholder.
    auto uav_only = net.fuse_and_classify(top, nullptr, 2);
    CHECK(uav_only.at(Task::Vegetation)->shape == Shape({2, 2}));

    // Fusion is order-sensitive.
    auto swapped = net.fuse_and_classify(facade, top, 2);
    double diff = 0.0;
    for (std::size_t i = 0; i < logits.at(Task::Wall)->value.size(); ++i)
        diff += std::abs(logits.at(Task::Wall)->value[i] - swapped.at(Task::Wall)->value[i]);
    CHECK(diff > 1e-6);
}

TEST_CASE("modality forward skips the unused stream") {
    auto cfg = micro_config();
    Cgcvit net(cfg, 7);
    auto top = from_values({1, 32, 32, 3}, random_chip_values(1, 32, 2));
    auto facade = from_values({1, 32, 32, 3}, random_chip_values(1, 32, 3));

    auto multi = net.forward(top, facade, Modality::Multi);
    auto sv = net.forward(top, facade, Modality::SvOnly);
    auto uav = net.forward(top, facade, Modality::UavOnly);
    for (const auto& [task, t] : multi) {
        CHECK(t->shape == sv.at(task)->shape);
        CHECK(t->shape == uav.at(task)->shape);
    }

    // SV-only output ignores the top chip entirely.
    auto top2 = from_values({1, 32, 32, 3}, random_chip_values(1, 32, 4));
    auto sv2 = net.forward(top2, facade, Modality::SvOnly);
    for (const auto& [task, t] : sv)
        for (std::size_t i = 0; i < t->value.size(); ++i)
            CHECK(t->value[i] == sv2.at(task)->value[i]);
}

TEST_CASE("parameter registry is complete and seeded deterministically") {
    auto cfg = micro_config();
    Cgcvit a(cfg, 7), b(cfg, 7), c(cfg, 8);
    CHECK(a.parameter_count() > 0);
    REQUIRE(a.parameters().size() == b.parameters().size());
    bool all_equal = true, any_diff_seed = false;
    for (std::size_t i = 0; i < a.parameters().size(); ++i) {
        const auto& pa = a.parameters()[i].tensor->value;
        const auto& pb = b.parameters()[i].tensor->value;
        const auto& pc = c.parameters()[i].tensor->value;
        if (pa != pb) all_equal = false;
        if (pa != pc) any_diff_seed = true;
    }
    CHECK(all_equal);
    CHECK(any_diff_seed);
}

TEST_CASE("config validation") {
    auto cfg = micro_config();
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.fused_dim() == 2 * cfg.stage_dims[3]);
    auto bad = cfg;
    bad.patch_size = 5;  // chip not divisible
    CHECK_THROWS(bad.validate());
    auto bad2 = cfg;
    bad2.num_heads = {3, 3, 3, 3};  // dims not divisible by heads
    CHECK_THROWS(bad2.validate());
    auto bad3 = cfg;
    bad3.patch_size = 16;  // resolution underflows across 4 stages
    CHECK_THROWS(bad3.validate());
}

TEST_CASE("tensor losses match the double-precision evaluators") {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> d(0.0, 2.0);
    for (int trial = 0; trial < 20; ++trial) {
        const int batch = 1 + static_cast<int>(rng() % 4);
        const int classes = 2 + static_cast<int>(rng() % 5);
        std::vector<std::vector<double>> zd(static_cast<std::size_t>(batch));
        std::vector<float> zf;
        std::vector<int> targets;
        for (int b = 0; b < batch; ++b) {
            for (int c = 0; c < classes; ++c) {
                const double v = d(rng);
                zd[static_cast<std::size_t>(b)].push_back(v);
                zf.push_back(static_cast<float>(v));
            }
            targets.push_back(static_cast<int>(rng() % classes));
        }
        auto z = from_values({batch, classes}, zf);
        const double ce = softmax_cross_entropy(z, targets)->value[0];
        CHECK(ce == doctest::Approx(softmax_cross_entropy_value(zd, targets))
                        .epsilon(1e-5)
                        .scale(1.0));
        const double fl = focal_loss(z, targets, 2.0f)->value[0];
        CHECK(fl == doctest::Approx(focal_loss_value(zd, targets, 2.0))
                        .epsilon(1e-5)
                        .scale(1.0));
    }
}
