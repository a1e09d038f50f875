#include <doctest.h>

#include <cmath>
#include <set>
#include <stdexcept>

#include "test_support.hpp"
#include "wss/core/config.hpp"
#include "wss/core/geometry.hpp"
#include "wss/core/image_io.hpp"
#include "wss/core/manifest.hpp"
#include "wss/core/parallel.hpp"

using namespace wss;
namespace fs = std::filesystem;

namespace {

std::string error_of(auto&& fn) {
    try {
        fn();
    } catch (const std::exception& e) {
        return e.what();
    }
    return {};
}

ImageRecord gradient_record(int h, int w) {
    RgbImage img(h, w, 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = static_cast<std::uint8_t>((x * 3 + y * 5 + c * 40) % 256);
    return test::make_record("img", std::move(img));
}

}  // namespace

TEST_CASE("taxonomy layout and lookups") {
    const auto voc = ClassTaxonomy::pascal_voc();
    CHECK(voc.size() == 21);
    CHECK(voc.name(ClassTaxonomy::kBackground) == "background");
    CHECK(voc.index_of("cat") == 8);
    CHECK(error_of([&] { voc.index_of("zebra"); }).find("zebra") != std::string::npos);

    CHECK_THROWS_AS(ClassTaxonomy({"background"}), std::invalid_argument);
    CHECK_THROWS_AS(ClassTaxonomy({"cat", "background"}), std::invalid_argument);
    CHECK_THROWS_AS(ClassTaxonomy({"background", "cat", "cat"}), std::invalid_argument);
    CHECK_THROWS_AS(ClassTaxonomy({"background", ""}), std::invalid_argument);
    CHECK(ClassTaxonomy::synthetic_shapes().names() == std::vector<std::string>{"background", "disk", "square", "triangle"});
}

TEST_CASE("image record and mask invariants") {
    auto rec = gradient_record(4, 5);
    CHECK_NOTHROW(validate(rec));
    rec.source = ImageSource::retrieved;
    CHECK_THROWS_AS(validate(rec), std::invalid_argument);
    rec.query_class = 0;
    CHECK_THROWS_AS(validate(rec), std::invalid_argument);
    rec.query_class = 2;
    CHECK_NOTHROW(validate(rec));

    Mask m(2, 2, 0);
    m.at(0, 1) = 3;
    m.at(1, 1) = kIgnoreLabel;
    CHECK_NOTHROW(validate(m, 4));
    CHECK_THROWS_AS(validate(m, 3), std::invalid_argument);
}

TEST_CASE("label vectors keep background present") {
    LabelVector y(5);
    CHECK(y.has(0));
    CHECK(y.indices() == std::vector<int>{0});
    const auto z = LabelVector::from_indices(5, {3, 1});
    CHECK(z.indices() == std::vector<int>{0, 1, 3});
    CHECK(y.subset_of(z));
    CHECK_FALSE(z.subset_of(y));
    CHECK(LabelVector::all(4).indices() == std::vector<int>{0, 1, 2, 3});
    CHECK_THROWS_AS(LabelVector::from_indices(3, {3}), std::invalid_argument);
}

TEST_CASE("softmax produces probability maps") {
    ScoreMap logits(2, 3, 4, ScoreSpace::logits);
    Rng rng(3);
    for (auto& v : logits.data) v = test::normal(rng) * 5;
    const auto p = softmax(logits);
    CHECK(p.space == ScoreSpace::probabilities);
    CHECK(is_probability_map(p));
    ScoreMap bad = p;
    bad.data[0] += 0.01;
    CHECK_FALSE(is_probability_map(bad));
}

TEST_CASE("manifest loading") {
    test::TempDir dir("manifest");
    const auto voc = ClassTaxonomy::pascal_voc();
    Rng rng(1);
    for (const char* name : {"a.png", "b.png", "c.png"}) write_image(dir / name, test::random_image(6, 7, rng));
    write_mask(dir / "a_gt.png", Mask(6, 7, 0));

    SUBCASE("three valid lines") {
        write_text_file(dir / "m.txt", "a.png\ta_gt.png\tcat,dog\nb.png\t-\t-\nc.png\t-\tperson\n");
        const auto m = load_manifest(dir / "m.txt", voc);
        REQUIRE(m.entries.size() == 3);
        CHECK(m.entries[0].image == fs::absolute(dir / "a.png"));
        CHECK(m.entries[0].mask == fs::absolute(dir / "a_gt.png"));
        CHECK(*m.entries[0].labels == std::vector<int>{8, 12});
        CHECK_FALSE(m.entries[1].mask.has_value());
        CHECK_FALSE(m.entries[1].labels.has_value());
        CHECK(entry_labels(m.entries[1], voc.size()) == LabelVector::all(voc.size()));
    }
    SUBCASE("empty file") {
        write_text_file(dir / "m.txt", "");
        CHECK(load_manifest(dir / "m.txt", voc).entries.empty());
    }
    SUBCASE("unknown class is named") {
        write_text_file(dir / "m.txt", "a.png\t-\tzebra\n");
        CHECK(error_of([&] { load_manifest(dir / "m.txt", voc); }).find("\"zebra\"") != std::string::npos);
    }
    SUBCASE("malformed line reports its number") {
        write_text_file(dir / "m.txt", "a.png\t-\tcat\nb.png cat\n");
        CHECK(error_of([&] { load_manifest(dir / "m.txt", voc); }).find("line 2") != std::string::npos);
    }
    SUBCASE("missing files") {
        CHECK_THROWS_AS(load_manifest(dir / "absent.txt", voc), std::runtime_error);
        write_text_file(dir / "m.txt", "nope.png\t-\tcat\n");
        CHECK_THROWS_AS(load_manifest(dir / "m.txt", voc), std::runtime_error);
    }
    SUBCASE("write then load round-trips in order") {
        DatasetManifest m;
        m.entries.push_back({fs::absolute(dir / "c.png"), std::nullopt, std::vector<int>{15, 3}});
        m.entries.push_back({fs::absolute(dir / "a.png"), fs::absolute(dir / "a_gt.png"), std::nullopt});
        m.entries.push_back({fs::absolute(dir / "b.png"), std::nullopt, std::vector<int>{}});
        write_manifest(dir / "out.txt", m, voc);
        const auto text = read_text_file(dir / "out.txt");
        CHECK(text.find(dir.path().string()) == std::string::npos);  // stored relative
        auto back = load_manifest(dir / "out.txt", voc);
        // An empty label list is written as '-', which reads back as absent.
        m.entries[2].labels.reset();
        CHECK(back == m);
        write_manifest(dir / "again.txt", back, voc);
        CHECK(read_text_file(dir / "again.txt") == text);
    }
}

TEST_CASE("config defaults, parsing and round-trip") {
    const PipelineConfig d;
    CHECK(d.lambda_balance == 1.0);
    CHECK(d.batch_size == 16);
    CHECK(d.crop_size == 320);
    CHECK(d.learning_rate == 16e-4);
    CHECK(d.weight_decay == 5e-4);
    CHECK(d.momentum == 0.9);
    CHECK(d.lr_drop_factor == 10.0);
    CHECK(d.inference_scales == std::vector<double>{0.75, 1.0, 1.25});
    CHECK(d.fg_min == 0.2);
    CHECK(d.fg_max == 0.8);
    CHECK(d.retrieved_max_dim == 340);
    CHECK(d.target_max_dim == 500);
    CHECK(d.crf.iterations == 10);

    auto c = parse_config("# comment\nbatch_size = 4\ninference_scales = 0.5, 1.0\nclasses = background,cat\n"
                          "crf_iterations = 3\nhflip = false\nlearning_rate = 0.001 # trailing\n");
    CHECK(c.batch_size == 4);
    CHECK(c.inference_scales == std::vector<double>{0.5, 1.0});
    CHECK(c.classes == std::vector<std::string>{"background", "cat"});
    CHECK(c.crf.iterations == 3);
    CHECK_FALSE(c.hflip);
    CHECK(c.learning_rate == 0.001);

    c.lambda_balance = 0.1 + 0.2;  // not exactly representable in short decimal
    c.seed = 0xFFFFFFFFFFFFFFFFULL;
    CHECK(parse_config(format_config(c)) == c);
    CHECK(format_config(parse_config(format_config(c))) == format_config(c));
    CHECK(config_keys().size() >= 30);

    CHECK(error_of([] { parse_config("batch_size = 4\nbogus_key = 1\n"); }).find("line 2") != std::string::npos);
    CHECK_THROWS_AS(parse_config("batch_size = four\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config("fg_min = 0.9\nfg_max = 0.8\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config("inference_scales = 1.0, 0\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config("lambda_balance = -1\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config("crf_gaussian_weight = 1\ncrf_gaussian_sigma_xy = 0\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config("mask_source = magic\n"), std::invalid_argument);
}

TEST_CASE("max-dimension resize") {
    CHECK(max_dim_size(340, 680, 340) == std::pair{170, 340});
    CHECK(max_dim_size(680, 340, 340) == std::pair{340, 170});
    CHECK(max_dim_size(200, 300, 340) == std::pair{200, 300});
    // round(375 * 340 / 500) = round(255.0) = 255
    CHECK(max_dim_size(375, 500, 340) == std::pair{255, 340});
    CHECK(max_dim_size(750, 1000, 500) == std::pair{375, 500});
    CHECK(max_dim_size(1, 1000, 10) == std::pair{1, 10});
    CHECK(max_dim_size(1, 1, 1) == std::pair{1, 1});
    CHECK_THROWS_AS(max_dim_size(5, 5, 0), std::invalid_argument);

    SUBCASE("rounding matches an integer oracle") {
        Rng rng(11);
        for (int t = 0; t < 2000; ++t) {
            const int h = static_cast<int>(uniform_int(rng, 1, 2000)), w = static_cast<int>(uniform_int(rng, 1, 2000));
            const int m = static_cast<int>(uniform_int(rng, 1, 600));
            const auto [oh, ow] = max_dim_size(h, w, m);
            if (std::max(h, w) <= m) {
                CHECK((oh == h && ow == w));
                continue;
            }
            const int big = std::max(h, w), small = std::min(h, w);
            // nearest integer to small*m/big, halves rounded up, at least 1
            const int expect = std::max(1, static_cast<int>((2LL * small * m + big) / (2LL * big)));
            CHECK(std::max(oh, ow) == m);
            CHECK(std::min(oh, ow) == expect);
        }
    }

    SUBCASE("image and mask stay paired; no upscaling; idempotent") {
        const auto rec = gradient_record(300, 200);
        Mask mask(300, 200, 0);
        for (int y = 0; y < 150; ++y)
            for (int x = 0; x < 200; ++x) mask.at(y, x) = 5;
        const auto same = resize_max_dim(rec, 340, mask);
        CHECK(same.image.pixels == rec.pixels);
        CHECK(*same.mask == mask);

        const auto small = resize_max_dim(rec, 150, mask);
        CHECK(small.image.height() == 150);
        CHECK(small.image.width() == 100);
        CHECK(small.mask->height() == 150);
        CHECK(small.mask->width() == 100);
        std::set<int> values(small.mask->labels.data.begin(), small.mask->labels.data.end());
        CHECK(values == std::set<int>{0, 5});
        const auto twice = resize_max_dim(small.image, 150, small.mask);
        CHECK(twice.image.pixels == small.image.pixels);
        CHECK(*twice.mask == *small.mask);

        Rng rng(5);
        for (int t = 0; t < 20; ++t) {
            const int h = static_cast<int>(uniform_int(rng, 1, 90)), w = static_cast<int>(uniform_int(rng, 1, 90));
            const int m = static_cast<int>(uniform_int(rng, 1, 60));
            const auto once = resize_max_dim(test::make_record("r", test::random_image(h, w, rng)), m);
            const auto again = resize_max_dim(once.image, m);
            CHECK(again.image.pixels == once.image.pixels);
        }
    }

    SUBCASE("halving averages 2x2 blocks and samples mask centres") {
        Rng rng(6);
        const auto img = test::random_image(18, 26, rng);
        Mask mask(18, 26);
        for (auto& v : mask.labels.data) v = static_cast<std::uint8_t>(uniform_int(rng, 0, 20));
        const auto half = resize_bilinear(img, 9, 13);
        const auto half_mask = resize_nearest(mask, 9, 13);
        for (int y = 0; y < 9; ++y)
            for (int x = 0; x < 13; ++x) {
                for (int c = 0; c < 3; ++c) {
                    const double mean = (img.at(2 * y, 2 * x, c) + img.at(2 * y, 2 * x + 1, c) + img.at(2 * y + 1, 2 * x, c) +
                                         img.at(2 * y + 1, 2 * x + 1, c)) / 4.0;
                    CHECK(std::abs(half.at(y, x, c) - mean) <= 0.5);
                }
                // Centre (x + 0.5) * 2 sits on the boundary of pixels 2x and 2x + 1; the lower one wins.
                CHECK(half_mask.at(y, x) == mask.at(2 * y, 2 * x));
            }
    }

    SUBCASE("1x1 passes through") {
        const auto rec = gradient_record(1, 1);
        CHECK(resize_max_dim(rec, 1).image.pixels == rec.pixels);
    }
}

TEST_CASE("random crops") {
    SUBCASE("exact-size input is returned unchanged") {
        const auto rec = gradient_record(320, 320);
        Mask mask(320, 320, 2);
        const auto crop = random_crop_pair(rec, mask, 320, 99);
        CHECK(crop.offset_y == 0);
        CHECK(crop.offset_x == 0);
        CHECK(crop.image.pixels == rec.pixels);
        CHECK(crop.mask == mask);
    }
    SUBCASE("short inputs are padded with the pad value and IGNORE") {
        const auto rec = gradient_record(300, 400);
        Mask mask(300, 400, 1);
        const std::array<std::uint8_t, 3> pad{10, 20, 30};
        const auto crop = random_crop_pair(rec, mask, 320, 4, pad);
        CHECK(crop.image.height() == 320);
        CHECK(crop.image.width() == 320);
        CHECK(crop.offset_y == 0);
        for (int y = 0; y < 320; ++y) {
            CHECK(crop.mask.at(y, 17) == (y >= 300 ? kIgnoreLabel : 1));
            if (y >= 300) CHECK(crop.image.pixels.at(y, 17, 1) == 20);
            else CHECK(crop.image.pixels.at(y, 17, 1) == rec.pixels.at(y, 17 + crop.offset_x, 1));
        }
    }
    SUBCASE("deterministic in the seed; always crop x crop") {
        const auto rec = gradient_record(480, 480);
        Mask mask(480, 480, 0);
        const auto a = random_crop_pair(rec, mask, 320, 1234);
        const auto b = random_crop_pair(rec, mask, 320, 1234);
        CHECK(a.offset_y == b.offset_y);
        CHECK(a.offset_x == b.offset_x);
        CHECK(a.image.pixels == b.image.pixels);
        std::set<std::pair<int, int>> offsets;
        for (std::uint64_t s = 0; s < 20; ++s) {
            const auto c = random_crop_pair(rec, mask, 320, s);
            offsets.insert({c.offset_y, c.offset_x});
        }
        CHECK(offsets.size() > 1);

        Rng rng(8);
        for (int t = 0; t < 50; ++t) {
            const int h = static_cast<int>(uniform_int(rng, 1, 40)), w = static_cast<int>(uniform_int(rng, 1, 40));
            const int crop = static_cast<int>(uniform_int(rng, 1, 40));
            const auto c = random_crop_pair(test::make_record("r", test::random_image(h, w, rng)), Mask(h, w, 0), crop,
                                            static_cast<std::uint64_t>(t));
            CHECK(c.image.height() == crop);
            CHECK(c.image.width() == crop);
            CHECK(c.mask.height() == crop);
            CHECK(c.mask.width() == crop);
        }
    }
    SUBCASE("shape mismatch") {
        CHECK_THROWS_AS(random_crop_pair(gradient_record(10, 10), Mask(10, 9, 0), 5, 1), std::invalid_argument);
    }
}

TEST_CASE("horizontal flips") {
    const auto rec = gradient_record(3, 4);
    const auto f = hflip(rec.pixels);
    CHECK(f.at(1, 0, 2) == rec.pixels.at(1, 3, 2));
    CHECK(hflip(f) == rec.pixels);
    Mask m(2, 3, 0);
    m.at(0, 0) = 4;
    CHECK(hflip(m).at(0, 2) == 4);
}

TEST_CASE("label vectors from masks") {
    const auto voc = ClassTaxonomy::pascal_voc();
    CHECK(label_vector_from_mask(Mask(4, 4, 0), voc).indices() == std::vector<int>{0});
    Mask m(4, 4, 0);
    m.at(0, 0) = 3;
    m.at(2, 1) = 7;
    m.at(3, 3) = kIgnoreLabel;
    CHECK(label_vector_from_mask(m, voc).indices() == std::vector<int>{0, 3, 7});
    CHECK(label_vector_from_mask(Mask(4, 4, kIgnoreLabel), voc).indices() == std::vector<int>{0});
    m.at(1, 1) = 30;
    CHECK_THROWS_AS(label_vector_from_mask(m, voc), std::invalid_argument);
}

TEST_CASE("image files round-trip") {
    test::TempDir dir("io");
    Rng rng(2);
    const auto img = test::random_image(9, 13, rng);
    write_image(dir / "x.png", img);
    CHECK(read_image(dir / "x.png") == img);
    Mask m(5, 6, 0);
    m.at(4, 5) = kIgnoreLabel;
    m.at(0, 0) = 20;
    write_mask(dir / "m.png", m);
    CHECK(read_mask(dir / "m.png") == m);
    CHECK_THROWS_AS(read_image(dir / "none.png"), std::runtime_error);
    write_text_file(dir / "junk.png", "not an image");
    CHECK_THROWS_AS(read_image(dir / "junk.png"), std::runtime_error);

    const auto rec = load_record(dir / "x.png", ImageSource::target);
    CHECK(rec.id == "x");
    CHECK(file_digest(dir / "x.png") == file_digest(dir / "x.png"));
    CHECK(text_digest("abc").size() == 16);
    CHECK(text_digest("abc") != text_digest("abd"));
    // FNV-1a 64 of the empty string is the offset basis.
    CHECK(text_digest("") == "cbf29ce484222325");
}

TEST_CASE("channel mean") {
    RgbImage a(1, 2, 3, 0), b(1, 2, 3, 0);
    a.at(0, 0, 0) = 100;
    b.at(0, 1, 2) = 40;
    const auto m = channel_mean({&a, &b});
    CHECK(m[0] == doctest::Approx(25.0));
    CHECK(m[1] == 0.0);
    CHECK(m[2] == doctest::Approx(10.0));
}

TEST_CASE("seed derivation and parallel_for") {
    CHECK(derive_seed(1, "a") != derive_seed(1, "b"));
    CHECK(derive_seed(1, std::uint64_t{0}) != derive_seed(2, std::uint64_t{0}));
    Rng rng(4);
    for (int i = 0; i < 1000; ++i) {
        const auto v = uniform_int(rng, -3, 5);
        CHECK((v >= -3 && v <= 5));
        const double r = uniform_real(rng);
        CHECK((r >= 0.0 && r < 1.0));
    }

    std::vector<int> hits(1000, 0);
    parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
    CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
    CHECK_THROWS_AS(parallel_for(100, 4,
                                 [](std::size_t i) {
                                     if (i == 37) throw std::runtime_error("boom");
                                 }),
                    std::runtime_error);
}
