#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "test_support.hpp"
#include "wss/train/losses.hpp"
#include "wss/train/sgd.hpp"

using namespace wss;

namespace {

// Extended-precision reference for the per-entry logistic loss.
// max(p, 0) - y p is exact for binary y, so the small log term is never absorbed.
long double logistic_oracle(long double p, long double y) {
    return (std::max(p, 0.0L) - y * p) + std::log1p(std::exp(-std::abs(p)));
}

ScoreMap random_logits(int h, int w, int c, Rng& rng, double scale = 2.0) {
    ScoreMap m(h, w, c, ScoreSpace::logits);
    for (auto& v : m.data) v = test::normal(rng) * scale;
    return m;
}

Mask random_mask(int h, int w, int c, Rng& rng, bool allow_ignore) {
    Mask m(h, w, 0);
    for (auto& v : m.labels.data)
        v = allow_ignore && uniform_real(rng) < 0.25 ? kIgnoreLabel : static_cast<std::uint8_t>(uniform_int(rng, 0, c - 1));
    if (std::all_of(m.labels.data.begin(), m.labels.data.end(), [](auto v) { return v == kIgnoreLabel; }))
        m.labels.data[0] = 0;
    return m;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({1e-8, std::abs(a), std::abs(b)}); }

}  // namespace

TEST_CASE("segmentation loss anchors") {
    ScoreMap z(1, 1, 4, ScoreSpace::logits);
    Mask m(1, 1, 2);
    CHECK(softmax_nll_loss(z, m).loss == doctest::Approx(std::log(4.0)).epsilon(1e-12));

    ScoreMap s(1, 1, 2, ScoreSpace::logits);
    s.data = {10.0, -10.0};
    const long double oracle = std::log1p(std::exp(-20.0L));  // -ln sigma(20)
    const double got = softmax_nll_loss(s, Mask(1, 1, 0)).loss;
    CHECK(rel_err(got, static_cast<double>(oracle)) < 1e-9);
    CHECK(got == doctest::Approx(2.06e-9).epsilon(0.01));

    ScoreMap g(1, 1, 2, ScoreSpace::logits);
    const auto r = softmax_nll_loss(g, Mask(1, 1, 0));
    CHECK(r.gradient.data[0] == doctest::Approx(-0.5));
    CHECK(r.gradient.data[1] == doctest::Approx(0.5));
    CHECK(r.valid_pixels == 1);

    CHECK_THROWS_AS(softmax_nll_loss(z, Mask(1, 1, kIgnoreLabel)), std::invalid_argument);
    CHECK_THROWS_AS(softmax_nll_loss(z, Mask(2, 1, 0)), std::invalid_argument);
}

TEST_CASE("uniform predictions give ln C; losses are non-negative") {
    Rng rng(1);
    for (int c = 2; c <= 6; ++c) {
        ScoreMap z(3, 2, c, ScoreSpace::logits, 0.7);
        CHECK(softmax_nll_loss(z, random_mask(3, 2, c, rng, true)).loss == doctest::Approx(std::log(c)).epsilon(1e-12));
        const auto l = random_logits(3, 3, c, rng, 5.0);
        CHECK(softmax_nll_loss(l, random_mask(3, 3, c, rng, true)).loss >= 0.0);
    }
    std::vector<double> p(5, 0.0), y(5, 1.0);
    y[2] = 0.0;
    CHECK(multilabel_bce_loss(p, y).loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("segmentation loss gradient matches finite differences") {
    Rng rng(2);
    for (int t = 0; t < 40; ++t) {
        const int c = static_cast<int>(uniform_int(rng, 2, 5));
        const int h = static_cast<int>(uniform_int(rng, 1, 4)), w = static_cast<int>(uniform_int(rng, 1, 4));
        auto logits = random_logits(h, w, c, rng);
        const auto mask = random_mask(h, w, c, rng, true);
        const auto r = softmax_nll_loss(logits, mask);
        for (std::size_t i = 0; i < logits.data.size(); ++i) {
            const double keep = logits.data[i];
            logits.data[i] = keep + 1e-5;
            const double up = softmax_nll_loss(logits, mask).loss;
            logits.data[i] = keep - 1e-5;
            const double down = softmax_nll_loss(logits, mask).loss;
            logits.data[i] = keep;
            const double fd = (up - down) / 2e-5;
            if (std::abs(fd) < 1e-7 && std::abs(r.gradient.data[i]) < 1e-7) continue;
            CHECK(rel_err(r.gradient.data[i], fd) < 1e-4);
        }
    }
}

TEST_CASE("segmentation loss: shift invariance and ignored pixels") {
    Rng rng(3);
    for (int t = 0; t < 20; ++t) {
        const auto logits = random_logits(4, 4, 5, rng, 3.0);
        const auto mask = random_mask(4, 4, 5, rng, true);
        auto shifted = logits;
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 4; ++x) {
                const double k = test::normal(rng) * 10;
                for (int c = 0; c < 5; ++c) shifted.at(y, x, c) += k;
            }
        CHECK(std::abs(softmax_nll_loss(logits, mask).loss - softmax_nll_loss(shifted, mask).loss) < 1e-9);

        const auto r = softmax_nll_loss(logits, mask);
        std::size_t valid = 0;
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 4; ++x) {
                if (mask.at(y, x) != kIgnoreLabel) {
                    ++valid;
                    continue;
                }
                for (int c = 0; c < 5; ++c) CHECK(r.gradient.at(y, x, c) == 0.0);
            }
        CHECK(r.valid_pixels == valid);
    }
}

TEST_CASE("mask downsampling samples the stride grid") {
    Mask m(17, 9, 0);
    for (int y = 0; y < 17; ++y)
        for (int x = 0; x < 9; ++x) m.at(y, x) = static_cast<std::uint8_t>((y * 9 + x) % 7);
    const auto d = downsample_mask(m, 3, 2);
    for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 2; ++x) CHECK(d.at(y, x) == m.at(8 * y, 8 * x));
}

TEST_CASE("multi-label loss") {
    CHECK(multilabel_bce_loss(std::vector<double>{0, 0}, std::vector<double>{1, 0}).loss ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));

    SUBCASE("large logits against an extended-precision oracle") {
        const auto r = multilabel_bce_loss(std::vector<double>{50.0}, std::vector<double>{0.0});
        CHECK(std::isfinite(r.loss));
        CHECK(rel_err(r.loss, static_cast<double>(logistic_oracle(50.0L, 0.0L))) < 1e-15);
        CHECK(r.loss == doctest::Approx(50.0));
        for (double p : {-1e4, -700.0, -50.0, -1e-3, 0.0, 2.5, 36.0, 710.0, 1e4})
            for (double y : {0.0, 1.0}) {
                const auto v = multilabel_bce_loss(std::vector<double>{p}, std::vector<double>{y});
                CHECK(std::isfinite(v.loss));
                CHECK(std::isfinite(v.gradient[0]));
                const double want = static_cast<double>(logistic_oracle(p, y));
                CHECK(std::abs(v.loss - want) <= 1e-12 * std::max(1.0, want));
            }
        // Confident correct scores: the loss is a tiny positive number, not a cancelled zero.
        for (double p : {20.0, 50.0, 300.0}) {
            const auto v = multilabel_bce_loss(std::vector<double>{p, -p}, std::vector<double>{1.0, 0.0});
            CHECK(v.loss > 0.0);
            const long double want = logistic_oracle(p, 1.0L);
            CHECK(std::abs(static_cast<long double>(v.loss) - want) / want < 1e-12);
            CHECK(v.gradient[0] < 0.0);
        }
    }
    SUBCASE("relaxed targets at sigma(p) are stationary") {
        Rng rng(4);
        std::vector<double> p(6), y(6);
        for (std::size_t i = 0; i < p.size(); ++i) {
            p[i] = test::normal(rng) * 3;
            y[i] = sigmoid(p[i]);
        }
        for (double g : multilabel_bce_loss(p, y).gradient) CHECK(std::abs(g) < 1e-15);
    }
    SUBCASE("gradient matches finite differences") {
        Rng rng(5);
        for (int t = 0; t < 30; ++t) {
            const int c = static_cast<int>(uniform_int(rng, 1, 5));
            std::vector<double> p(static_cast<std::size_t>(c)), y(static_cast<std::size_t>(c));
            for (int i = 0; i < c; ++i) {
                p[static_cast<std::size_t>(i)] = test::normal(rng) * 3;
                y[static_cast<std::size_t>(i)] = static_cast<double>(uniform_int(rng, 0, 1));
            }
            const auto r = multilabel_bce_loss(p, y);
            for (std::size_t i = 0; i < p.size(); ++i) {
                auto up = p, down = p;
                up[i] += 1e-5;
                down[i] -= 1e-5;
                const double fd = (multilabel_bce_loss(up, y).loss - multilabel_bce_loss(down, y).loss) / 2e-5;
                CHECK(rel_err(r.gradient[i], fd) < 1e-4);
                CHECK(r.gradient[i] == doctest::Approx((sigmoid(p[i]) - y[i]) / c).epsilon(1e-12));
            }
        }
    }
    SUBCASE("label vector form keeps background as a positive target") {
        const MultiLabelScores s{{0.3, -1.2, 2.0}};
        const auto lv = LabelVector::from_indices(3, {2});
        CHECK(multilabel_bce_loss(s, lv).loss == multilabel_bce_loss(s.p, std::vector<double>{1, 0, 1}).loss);
    }
    CHECK_THROWS_AS(multilabel_bce_loss(std::vector<double>{0, 0}, std::vector<double>{1}), std::invalid_argument);
    CHECK_THROWS_AS(multilabel_bce_loss(MultiLabelScores{{0, 0}}, LabelVector(3)), std::invalid_argument);
}

TEST_CASE("combined loss") {
    CHECK(combine(0.5, 0.7, 1.0).combined == doctest::Approx(1.2));
    CHECK(combine(0.5, 0.7, 0.0).combined == 0.5);

    Rng rng(6);
    const auto logits = random_logits(3, 3, 4, rng);
    const auto mask = random_mask(3, 3, 4, rng, false);
    const MultiLabelScores p{{0.2, -0.4, 1.1, 0.0}};
    const auto y = LabelVector::from_indices(4, {1, 3});
    const auto zero = combined_loss(logits, mask, p, y, 0.0);
    CHECK(zero.combined == zero.seg_loss);
    CHECK(zero.seg_loss == softmax_nll_loss(logits, mask).loss);
    const auto one = combined_loss(logits, mask, p, y, 0.75);
    const auto two = combined_loss(logits, mask, p, y, 1.5);
    CHECK(two.combined - one.combined == doctest::Approx(0.75 * one.multilabel_loss).epsilon(1e-12));
    CHECK(one.valid_pixel_count == 9);

    const std::vector<LossReport> batch{combine(0.5, 0.7, 1.0, 3), combine(0.25, 0.1, 1.0, 4)};
    const auto sum = sum_reports(batch);
    CHECK(sum.seg_loss == doctest::Approx(0.75));
    CHECK(sum.multilabel_loss == doctest::Approx(0.8));
    CHECK(sum.combined == doctest::Approx(1.55));
    CHECK(sum.valid_pixel_count == 7);
}

TEST_CASE("momentum SGD") {
    SUBCASE("plain gradient step") {
        std::vector<double> p{1.0, -2.0}, g{0.25, 0.5}, v{0.0, 0.0};
        sgd_update<double>(p, g, v, {1.0, 0.0, 0.0});
        CHECK(p == std::vector<double>{0.75, -2.5});
    }
    SUBCASE("velocity decays geometrically without gradient") {
        std::vector<double> p{0.0}, g{0.0}, v{1.0};
        for (int k = 1; k <= 5; ++k) {
            sgd_update<double>(p, g, v, {0.1, 0.9, 0.0});
            CHECK(v[0] == doctest::Approx(std::pow(0.9, k)).epsilon(1e-14));
        }
    }
    SUBCASE("two steps against the unrolled recurrence") {
        const double lr = 0.01, m = 0.9, wd = 5e-4;
        const double p0 = 0.8, g1 = 0.3, g2 = -0.7;
        const double v1 = g1 + wd * p0;
        const double p1 = p0 - lr * v1;
        const double v2 = m * v1 + g2 + wd * p1;
        const double p2 = p1 - lr * v2;
        std::vector<double> p{p0}, v{0.0};
        sgd_update<double>(p, std::vector<double>{g1}, v, {lr, m, wd});
        sgd_update<double>(p, std::vector<double>{g2}, v, {lr, m, wd});
        CHECK(std::abs(p[0] - p2) < 1e-12);
        CHECK(std::abs(v[0] - v2) < 1e-12);
    }
    SUBCASE("tensor-level step validates gradients first") {
        auto params = build_backbone(BackboneKind::toy, 2, false, 0);
        const auto before = params;
        auto grads = zeros_like(params.tensors);
        TensorSet velocity;
        sgd_step(params, grads, velocity, {0.1, 0.9, 0.0});
        CHECK(params == before);
        CHECK(velocity.size() == params.tensors.size());

        grads.at("stem.bias").values[3] = std::nanf("");
        try {
            sgd_step(params, grads, velocity, {0.1, 0.9, 0.0});
            FAIL("expected a non-finite gradient error");
        } catch (const std::runtime_error& e) {
            CHECK(std::string(e.what()).find("stem.bias") != std::string::npos);
        }
        CHECK(params == before);

        auto wrong = zeros_like(params.tensors);
        wrong.at("stem.bias") = Tensor({3});
        CHECK_THROWS_AS(sgd_step(params, wrong, velocity, {}), std::invalid_argument);
    }
    std::vector<double> p(2), v(2);
    CHECK_THROWS_AS(sgd_update<double>(p, std::vector<double>{1.0}, v, {}), std::invalid_argument);
}
