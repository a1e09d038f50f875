#include <doctest.h>

#include <cmath>
#include <fstream>

#include "test_support.hpp"
#include "wss/core/image_io.hpp"
#include "wss/model/checkpoint.hpp"
#include "wss/synth/synthbench.hpp"
#include "wss/train/trainer.hpp"

using namespace wss;

namespace {

std::vector<TrainingSample> toy_samples(int count, std::uint64_t seed) {
    SynthSpec spec;
    spec.num_images = count;
    spec.canvas = 40;
    spec.rng_seed = seed;
    std::vector<TrainingSample> out;
    for (auto& t : generate_target_set(spec)) out.push_back({std::move(t.record), std::move(t.gt), t.labels});
    return out;
}

PipelineConfig small_config() {
    PipelineConfig c;
    c.batch_size = 4;
    c.crop_size = 32;
    c.learning_rate = 1e-3;
    c.workers = 1;
    return c;
}

}  // namespace

TEST_CASE("learning-rate schedule drops exactly once") {
    PipelineConfig c;
    c.learning_rate = 16e-4;
    for (int total : {1, 5, 10, 123, 5000, 11000}) {
        const int drop = lr_drop_iteration(total, c);
        CHECK(drop == static_cast<int>(std::floor(0.8 * total)));
        int events = 0;
        for (int it = 1; it < total; ++it)
            if (learning_rate_at(it, total, c) != learning_rate_at(it - 1, total, c)) {
                ++events;
                CHECK(it == drop);
                CHECK(learning_rate_at(it, total, c) == doctest::Approx(16e-5));
            }
        CHECK(events == (drop >= 1 && drop < total ? 1 : 0));
    }
    CHECK(lr_drop_iteration(5000, c) == 4000);
}

TEST_CASE("training is reproducible and independent of the worker count") {
    const auto samples = toy_samples(8, 3);
    auto c = small_config();
    const auto a = train_samples(samples, 4, c, TrainStage::final, 42, {.iterations = 50});
    const auto b = train_samples(samples, 4, c, TrainStage::final, 42, {.iterations = 50});
    REQUIRE(a.log.size() == 50);
    CHECK(a.log.back().combined == b.log.back().combined);
    CHECK(a.params == b.params);

    c.workers = 3;
    const auto threaded = train_samples(samples, 4, c, TrainStage::final, 42, {.iterations = 50});
    CHECK(threaded.params == a.params);
    CHECK(threaded.log.back().seg_loss == a.log.back().seg_loss);

    const auto other = train_samples(samples, 4, small_config(), TrainStage::final, 43, {.iterations = 50});
    CHECK_FALSE(other.params == a.params);
}

TEST_CASE("a detached branch with zero weight leaves the segmentation trajectory unchanged") {
    const auto samples = toy_samples(8, 5);
    auto c = small_config();
    const auto initial = train_samples(samples, 4, c, TrainStage::initial, 7, {.iterations = 40});
    c.lambda_balance = 0.0;
    c.detach_branch = true;
    const auto final = train_samples(samples, 4, c, TrainStage::final, 7, {.iterations = 40});
    REQUIRE(initial.log.size() == final.log.size());
    for (std::size_t i = 0; i < initial.log.size(); ++i)
        CHECK(std::abs(initial.log[i].seg_loss - final.log[i].seg_loss) <= 1e-6);
    CHECK(final.params.architecture().dual_branch);
    CHECK_FALSE(initial.params.architecture().dual_branch);
}

TEST_CASE("training loss falls on a small set") {
    const auto samples = toy_samples(6, 9);
    auto c = small_config();
    c.learning_rate = 2e-3;
    c.hflip = false;
    const auto r = train_samples(samples, 4, c, TrainStage::initial, 1, {.iterations = 150});
    double head = 0, tail = 0;
    for (int i = 0; i < 10; ++i) {
        head += r.log[static_cast<std::size_t>(i)].seg_loss;
        tail += r.log[r.log.size() - 1 - static_cast<std::size_t>(i)].seg_loss;
    }
    CHECK(tail < 0.7 * head);
    CHECK(evaluate_seg_loss(samples, r.params) < r.log.front().seg_loss);
    for (const auto& row : r.log) CHECK(row.multilabel_loss == 0.0);
}

TEST_CASE("stage preconditions and outputs") {
    test::TempDir dir("train");
    const auto taxonomy = ClassTaxonomy::synthetic_shapes();
    const auto samples = toy_samples(3, 2);
    DatasetManifest labels_only, full;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto img = dir / ("i" + std::to_string(i) + ".png");
        const auto mask = dir / ("m" + std::to_string(i) + ".png");
        write_image(img, samples[i].image.pixels);
        write_mask(mask, samples[i].mask);
        auto idx = samples[i].labels.indices();
        idx.erase(idx.begin());
        labels_only.entries.push_back({img, std::nullopt, idx});
        full.entries.push_back({img, mask, idx});
    }
    auto c = small_config();
    CHECK_THROWS_AS(train_stage(labels_only, taxonomy, c, TrainStage::initial, 1), std::invalid_argument);
    CHECK_THROWS_AS(train_stage(DatasetManifest{}, taxonomy, c, TrainStage::initial, 1), std::invalid_argument);
    auto masks_only = full;
    for (auto& e : masks_only.entries) e.labels.reset();
    CHECK_NOTHROW(train_stage(masks_only, taxonomy, c, TrainStage::initial, 1, {.iterations = 1}));
    CHECK_THROWS_AS(train_stage(masks_only, taxonomy, c, TrainStage::final, 1, {.iterations = 1}), std::invalid_argument);

    // A single-branch starting point cannot train the branch.
    const auto single = build_backbone(BackboneKind::toy, 4, false, 0);
    CHECK_THROWS_AS(train_stage(full, taxonomy, c, TrainStage::final, 1, {.iterations = 1, .init = single}),
                    std::invalid_argument);

    c.checkpoint_every = 2;
    const auto r = train_stage(full, taxonomy, c, TrainStage::final, 1, {.iterations = 4, .checkpoint_dir = dir.path()});
    CHECK(load_checkpoint(dir / "iter_2.ckpt").architecture_id == r.params.architecture_id);
    CHECK(load_checkpoint(dir / "iter_4.ckpt") == r.params);

    write_training_log(dir / "log.csv", r.log);
    std::ifstream in(dir / "log.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "iteration,seg_loss,multilabel_loss,combined,lr");
    int rows = 0;
    for (std::string line; std::getline(in, line);) ++rows;
    CHECK(rows == 4);
}
