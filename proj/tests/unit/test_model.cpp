#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "test_support.hpp"
#include "wss/core/geometry.hpp"
#include "wss/core/image_io.hpp"
#include "wss/model/checkpoint.hpp"
#include "wss/model/network.hpp"

using namespace wss;

namespace {

// Mirror every k x k kernel left-right and average, so each conv commutes with a horizontal flip.
void symmetrise_kernels(NetworkParams& params) {
    for (auto& [name, t] : params.tensors) {
        if (t.shape.size() != 4) continue;
        const int k = t.shape[3];
        const std::size_t planes = t.numel() / static_cast<std::size_t>(k * k);
        for (std::size_t p = 0; p < planes; ++p) {
            float* w = t.values.data() + p * static_cast<std::size_t>(k * k);
            for (int y = 0; y < k; ++y)
                for (int x = 0; x < k / 2; ++x) {
                    const float m = 0.5f * (w[y * k + x] + w[y * k + (k - 1 - x)]);
                    w[y * k + x] = w[y * k + (k - 1 - x)] = m;
                }
        }
    }
}

RgbImage roll_columns(const RgbImage& img, int shift) {
    RgbImage out(img.height, img.width, 3);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) out.at(y, (x + shift) % img.width, c) = img.at(y, x, c);
    return out;
}

}  // namespace

TEST_CASE("output shape follows the ceil(H/8) law") {
    const auto params = build_backbone(BackboneKind::toy, 21, false, 0);
    Rng rng(1);
    const auto a = forward_segmentation(test::random_image(320, 320, rng), params);
    CHECK(a.height == 40);
    CHECK(a.width == 40);
    CHECK(a.classes == 21);
    const auto b = forward_segmentation(test::random_image(100, 60, rng), params);
    CHECK(b.height == 13);
    CHECK(b.width == 8);

    const auto small = build_backbone(BackboneKind::toy, 4, false, 0);
    CHECK(forward_segmentation(test::random_image(64, 64, rng), small).height == 8);
    for (int t = 0; t < 25; ++t) {
        const int h = static_cast<int>(uniform_int(rng, kMinInputSize, 90));
        const int w = static_cast<int>(uniform_int(rng, kMinInputSize, 90));
        const auto out = forward_segmentation(test::random_image(h, w, rng), small);
        CHECK(out.height == (h + 7) / 8);
        CHECK(out.width == (w + 7) / 8);
        CHECK(out.classes == 4);
    }
    CHECK_THROWS_AS(forward_segmentation(test::random_image(7, 30, rng), small), std::invalid_argument);
}

TEST_CASE("backbone construction") {
    const auto a = build_backbone(BackboneKind::toy, 4, false, 0);
    const auto b = build_backbone(BackboneKind::toy, 4, false, 0);
    CHECK(a == b);
    CHECK(a.parameter_count() == b.parameter_count());
    CHECK(a.parameter_count() <= 500000);
    CHECK(build_backbone(BackboneKind::toy, 21, true, 0, 1).parameter_count() <= 500000);
    CHECK(a != build_backbone(BackboneKind::toy, 4, false, 1));
    CHECK_THROWS_AS(build_backbone(BackboneKind::toy, 1, false, 0), std::invalid_argument);

    for (const auto& [name, shape] : a.architecture().tensor_shapes())
        if (shape.size() == 4) CHECK(shape[0] <= 64);

    // The shared trunk of the dual-branch network is the single-branch network.
    const auto dual = build_backbone(BackboneKind::toy, 4, true, 0);
    for (const auto& [name, t] : a.tensors) CHECK(dual.tensors.at(name) == t);

    const auto contract = build_backbone(BackboneKind::dilated_resnet_contract, 21, false, 0);
    CHECK_FALSE(contract.materialized());
    CHECK(contract.parameter_count() > 20000000);
    Rng rng(0);
    CHECK_THROWS_AS(forward_segmentation(test::random_image(32, 32, rng), contract), std::logic_error);

    ArchitectureSpec spec;
    spec.num_classes = 7;
    spec.dual_branch = true;
    spec.branch_head_convs = 2;
    CHECK(ArchitectureSpec::parse(spec.id()) == spec);
}

TEST_CASE("zero parameters give spatially constant logits") {
    auto params = build_backbone(BackboneKind::toy, 5, false, 3);
    for (auto& [name, t] : params.tensors) std::fill(t.values.begin(), t.values.end(), 0.0f);
    params.tensors.at("classifier.bias").values = {0.5f, -1.0f, 2.0f, 0.0f, 3.0f};
    Rng rng(4);
    const auto out = forward_segmentation(test::random_image(45, 70, rng), params);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x)
            for (int c = 0; c < 5; ++c) CHECK(out.at(y, x, c) == out.at(0, 0, c));
    CHECK(out.at(3, 2, 4) == 3.0);
}

TEST_CASE("inference is bitwise deterministic") {
    const auto params = build_backbone(BackboneKind::toy, 4, true, 9);
    Rng rng(5);
    const auto img = test::make_record("x", test::random_image(57, 41, rng));
    CHECK(forward_segmentation(img, params) == forward_segmentation(img, params));
    CHECK(forward_multilabel(img, params).p == forward_multilabel(img, params).p);
    const auto train = forward_train(img.pixels, params, true);
    CHECK(train.logits == forward_segmentation(img, params));
    CHECK(train.multilabel->p == forward_multilabel(img, params).p);
}

TEST_CASE("multi-label branch") {
    Rng rng(6);
    const auto img = test::make_record("x", test::random_image(40, 40, rng));
    CHECK(forward_multilabel(img, build_backbone(BackboneKind::toy, 6, true, 0)).p.size() == 6);
    CHECK_THROWS_AS(forward_multilabel(img, build_backbone(BackboneKind::toy, 6, false, 0)), std::logic_error);

    SUBCASE("pooling-only head is invariant to a horizontal flip") {
        auto params = build_backbone(BackboneKind::toy, 4, true, 2, 0);
        symmetrise_kernels(params);
        // Width 33 keeps every stride-2 sampling grid symmetric about the centre column.
        for (int t = 0; t < 3; ++t) {
            const auto a = test::make_record("a", test::random_image(29, 33, rng));
            const auto b = test::make_record("b", hflip(a.pixels));
            const auto pa = forward_multilabel(a, params).p, pb = forward_multilabel(b, params).p;
            for (std::size_t c = 0; c < pa.size(); ++c) CHECK(std::abs(pa[c] - pb[c]) <= 1e-5);
        }
    }
}

TEST_CASE("wrap padding: an 8-pixel shift moves the logits by one cell") {
    const auto params = build_backbone(BackboneKind::toy, 3, false, 11);
    Rng rng(7);
    const auto img = test::random_image(64, 64, rng);
    const ForwardOptions wrap{PaddingMode::wrap};
    const auto base = forward_segmentation(img, params, wrap);
    const auto shifted = forward_segmentation(roll_columns(img, 8), params, wrap);
    double worst = 0.0;
    for (int y = 0; y < base.height; ++y)
        for (int x = 0; x < base.width; ++x)
            for (int c = 0; c < 3; ++c)
                worst = std::max(worst, std::abs(shifted.at(y, (x + 1) % base.width, c) - base.at(y, x, c)));
    CHECK(worst <= 1e-4);
}

TEST_CASE("checkpoint round-trip") {
    test::TempDir dir("ckpt");
    auto params = build_backbone(BackboneKind::toy, 4, true, 13, 2);
    params.input_mean = {101.25f, 99.5f, 87.0f};
    save_checkpoint(dir / "m.ckpt", params);
    CHECK(load_checkpoint(dir / "m.ckpt") == params);

    const auto contract = build_backbone(BackboneKind::dilated_resnet_contract, 21, true, 0);
    save_checkpoint(dir / "c.ckpt", contract);
    CHECK(load_checkpoint(dir / "c.ckpt") == contract);

    CHECK_THROWS_AS(load_checkpoint(dir / "absent.ckpt"), std::runtime_error);
    write_text_file(dir / "bad.ckpt", "WSS-CHECKPOINT 1\narchitecture toy\n");
    CHECK_THROWS(load_checkpoint(dir / "bad.ckpt"));
}

TEST_CASE("backward accumulates into a matching gradient set") {
    const auto params = build_backbone(BackboneKind::toy, 3, true, 1);
    Rng rng(8);
    const auto img = test::random_image(24, 24, rng);
    const auto pass = forward_train(img, params, true);
    ScoreMap dl(pass.logits.height, pass.logits.width, 3, ScoreSpace::logits, 0.1);
    const std::vector<double> dml{0.2, -0.1, 0.05};
    TensorSet grads;
    backward(pass, params, dl, &dml, false, grads);
    CHECK(grads.size() == params.tensors.size());
    TensorSet twice = grads;
    backward(pass, params, dl, &dml, false, twice);
    for (const auto& [name, g] : grads)
        for (std::size_t i = 0; i < g.values.size(); ++i)
            CHECK(twice.at(name).values[i] == doctest::Approx(2.0 * g.values[i]).epsilon(1e-5));

    // Detached: trunk gradients are those of the segmentation term alone.
    TensorSet seg_only, detached;
    backward(pass, params, dl, nullptr, false, seg_only);
    backward(pass, params, dl, &dml, true, detached);
    for (const auto& [name, g] : seg_only)
        if (!name.starts_with("branch")) CHECK(detached.at(name) == g);
}

TEST_CASE("finite-difference check on the classifier bias and one stem weight") {
    const auto params = build_backbone(BackboneKind::toy, 3, false, 21);
    Rng rng(9);
    const auto img = test::random_image(16, 16, rng);
    ScoreMap upstream(2, 2, 3, ScoreSpace::logits);
    for (auto& v : upstream.data) v = test::normal(rng);
    auto objective = [&](const NetworkParams& p) {
        const auto out = forward_segmentation(img, p);
        double s = 0;
        for (std::size_t i = 0; i < out.data.size(); ++i) s += out.data[i] * upstream.data[i];
        return s;
    };
    TensorSet grads;
    backward(forward_train(img, params, false), params, upstream, nullptr, false, grads);
    for (const auto& [name, index] : std::vector<std::pair<std::string, std::size_t>>{{"classifier.bias", 1}, {"classifier.weight", 5}}) {
        auto plus = params, minus = params;
        const float h = 1e-2f;
        plus.tensors.at(name).values[index] += h;
        minus.tensors.at(name).values[index] -= h;
        const double fd = (objective(plus) - objective(minus)) / (2.0 * h);
        CHECK(grads.at(name).values[index] == doctest::Approx(fd).epsilon(1e-3));
    }
}
