#include "wss/synth/synthbench.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "wss/core/geometry.hpp"
#include "wss/core/image_io.hpp"
#include "wss/core/random.hpp"

namespace wss {

namespace fs = std::filesystem;

void SynthSpec::validate() const {
    if (num_images < 1) throw std::invalid_argument("synth spec needs num_images >= 1");
    if (canvas < 32) throw std::invalid_argument("synth canvas must be >= 32");
    if (!(noise_level >= 0 && noise_level <= 1)) throw std::invalid_argument("synth noise_level must be in [0, 1]");
}

namespace {

using Color = std::array<double, 3>;

constexpr std::array<Color, 3> kPalette = {{
    {205, 45, 40},   // disk: red
    {45, 170, 65},   // square: green
    {50, 75, 210},   // triangle: blue
}};

Color class_color(int cls, Rng& rng) {
    Color c = kPalette[static_cast<std::size_t>(cls - 1)];
    for (auto& v : c) v = std::clamp(v + (uniform_real(rng) - 0.5) * 50.0, 0.0, 255.0);
    return c;
}

/// Shape footprint as a predicate on pixel centres.
struct ShapeGeometry {
    Shape kind;
    double cx, cy, size, angle;

    bool contains(double x, double y) const {
        const double dx = x - cx, dy = y - cy;
        switch (kind) {
            case Shape::disk: return dx * dx + dy * dy <= size * size;
            case Shape::square: {
                const double ca = std::cos(angle), sa = std::sin(angle);
                const double u = ca * dx + sa * dy, v = -sa * dx + ca * dy;
                return std::abs(u) <= size && std::abs(v) <= size;
            }
            case Shape::triangle: {
                // Equilateral triangle with circumradius `size`.
                std::array<std::pair<double, double>, 3> p;
                for (int k = 0; k < 3; ++k) {
                    const double a = angle + k * 2.0 * M_PI / 3.0;
                    p[static_cast<std::size_t>(k)] = {cx + size * std::cos(a), cy + size * std::sin(a)};
                }
                auto side = [&](int i, int j) {
                    const auto [x1, y1] = p[static_cast<std::size_t>(i)];
                    const auto [x2, y2] = p[static_cast<std::size_t>(j)];
                    return (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1);
                };
                const double s0 = side(0, 1), s1 = side(1, 2), s2 = side(2, 0);
                return (s0 >= 0 && s1 >= 0 && s2 >= 0) || (s0 <= 0 && s1 <= 0 && s2 <= 0);
            }
        }
        return false;
    }

    /// Half-extent of the bounding box; keeps shapes inside the canvas.
    double extent() const { return kind == Shape::square ? size * std::sqrt(2.0) : size; }
};

/// Area of a shape relative to size^2.
double area_factor(Shape kind) {
    switch (kind) {
        case Shape::disk: return M_PI;
        case Shape::square: return 4.0;
        case Shape::triangle: return 3.0 * std::sqrt(3.0) / 4.0;
    }
    return 1.0;
}

ShapeGeometry random_shape(Shape kind, int canvas, double min_fraction, double max_fraction, Rng& rng) {
    const double fraction = min_fraction + uniform_real(rng) * (max_fraction - min_fraction);
    double size = std::sqrt(fraction * canvas * canvas / area_factor(kind));
    ShapeGeometry g{kind, 0, 0, size, uniform_real(rng) * 2.0 * M_PI};
    const double limit = canvas / 2.0 - 1.0;
    if (g.extent() > limit) g.size *= limit / g.extent();
    const double margin = g.extent() + 0.5;
    g.cx = margin + uniform_real(rng) * std::max(0.0, canvas - 2 * margin);
    g.cy = margin + uniform_real(rng) * std::max(0.0, canvas - 2 * margin);
    return g;
}

/// Smooth grey texture: a few random low-frequency cosine waves.
std::vector<Color> background_texture(int canvas, Rng& rng) {
    struct Wave {
        double fx, fy, phase, amp;
    };
    std::array<Wave, 4> waves{};
    for (auto& w : waves)
        w = {uniform_real(rng) * 0.15, uniform_real(rng) * 0.15, uniform_real(rng) * 2 * M_PI, 10 + uniform_real(rng) * 20};
    const double base = 110 + uniform_real(rng) * 60;
    const Color tint{uniform_real(rng) * 20 - 10, uniform_real(rng) * 20 - 10, uniform_real(rng) * 20 - 10};
    std::vector<Color> out(static_cast<std::size_t>(canvas) * static_cast<std::size_t>(canvas));
    for (int y = 0; y < canvas; ++y)
        for (int x = 0; x < canvas; ++x) {
            double v = base;
            for (const auto& w : waves) v += w.amp * std::cos(w.fx * x + w.fy * y + w.phase);
            auto& px = out[static_cast<std::size_t>(y * canvas + x)];
            for (std::size_t c = 0; c < 3; ++c) px[c] = v + tint[c];
        }
    return out;
}

void draw_clutter(std::vector<Color>& pixels, int canvas, Rng& rng) {
    const int patches = 2 + static_cast<int>(uniform_int(rng, 0, 2));
    for (int k = 0; k < patches; ++k) {
        const int cls = static_cast<int>(uniform_int(rng, 1, kShapeClasses));
        const Color color = class_color(cls, rng);
        const int w = static_cast<int>(uniform_int(rng, canvas / 8, canvas / 4));
        const int h = static_cast<int>(uniform_int(rng, canvas / 8, canvas / 4));
        const int x0 = static_cast<int>(uniform_int(rng, 0, canvas - w));
        const int y0 = static_cast<int>(uniform_int(rng, 0, canvas - h));
        const int cell = static_cast<int>(uniform_int(rng, 2, 3));
        for (int y = y0; y < y0 + h; ++y)
            for (int x = x0; x < x0 + w; ++x)
                if (((x - x0) / cell + (y - y0) / cell) % 2 == 0) pixels[static_cast<std::size_t>(y * canvas + x)] = color;
    }
}

RgbImage finish(const std::vector<Color>& pixels, int canvas, double noise_level, Rng& rng) {
    RgbImage img(canvas, canvas, 3);
    const double amp = noise_level * 40.0;
    for (std::size_t i = 0; i < pixels.size(); ++i)
        for (std::size_t c = 0; c < 3; ++c) {
            const double n = (uniform_real(rng) + uniform_real(rng) - 1.0) * amp;
            img.data[i * 3 + c] = static_cast<std::uint8_t>(std::clamp(std::lround(pixels[i][c] + n), 0L, 255L));
        }
    return img;
}

std::string image_id(const std::string& prefix, int index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s_%05d", prefix.c_str(), index);
    return buf;
}

}  // namespace

std::vector<SynthGroup> generate_retrieved_groups(const SynthSpec& spec) {
    spec.validate();
    std::vector<SynthGroup> groups(kShapeClasses);
    for (int c = 0; c < kShapeClasses; ++c) groups[static_cast<std::size_t>(c)].class_index = c + 1;
    for (int i = 0; i < spec.num_images; ++i) {
        const int cls = 1 + i % kShapeClasses;
        Rng rng(derive_seed(spec.rng_seed, static_cast<std::uint64_t>(i)));
        auto pixels = background_texture(spec.canvas, rng);
        // Fractions straddle the default 20-80% filter band so the filter has work to do.
        const auto shape = random_shape(static_cast<Shape>(cls), spec.canvas, 0.08, 0.60, rng);
        const Color color = class_color(cls, rng);
        Mask binary(spec.canvas, spec.canvas, 0);
        for (int y = 0; y < spec.canvas; ++y)
            for (int x = 0; x < spec.canvas; ++x)
                if (shape.contains(x + 0.5, y + 0.5)) {
                    binary.at(y, x) = 1;
                    pixels[static_cast<std::size_t>(y * spec.canvas + x)] = color;
                }
        SynthGroupImage img;
        img.record.id = image_id(ClassTaxonomy::synthetic_shapes().name(cls), i);
        img.record.pixels = finish(pixels, spec.canvas, spec.noise_level, rng);
        img.record.source = ImageSource::retrieved;
        img.record.query_class = cls;
        img.binary = std::move(binary);
        groups[static_cast<std::size_t>(cls - 1)].images.push_back(std::move(img));
    }
    return groups;
}

std::vector<SynthTargetImage> generate_target_set(const SynthSpec& spec) {
    spec.validate();
    const auto taxonomy = ClassTaxonomy::synthetic_shapes();
    std::vector<SynthTargetImage> out;
    out.reserve(static_cast<std::size_t>(spec.num_images));
    for (int i = 0; i < spec.num_images; ++i) {
        Rng rng(derive_seed(spec.rng_seed, static_cast<std::uint64_t>(i)));
        auto pixels = background_texture(spec.canvas, rng);
        if (spec.clutter) draw_clutter(pixels, spec.canvas, rng);
        std::array<int, 3> classes{1, 2, 3};
        for (std::size_t k = classes.size(); k > 1; --k)
            std::swap(classes[k - 1], classes[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(k) - 1))]);
        const int count = static_cast<int>(uniform_int(rng, 1, 3));
        Mask gt(spec.canvas, spec.canvas, 0);
        for (int k = 0; k < count; ++k) {
            const int cls = classes[static_cast<std::size_t>(k)];
            const auto shape = random_shape(static_cast<Shape>(cls), spec.canvas, 0.06, 0.22, rng);
            const Color color = class_color(cls, rng);
            for (int y = 0; y < spec.canvas; ++y)
                for (int x = 0; x < spec.canvas; ++x)
                    if (shape.contains(x + 0.5, y + 0.5)) {
                        gt.at(y, x) = static_cast<std::uint8_t>(cls);
                        pixels[static_cast<std::size_t>(y * spec.canvas + x)] = color;
                    }
        }
        SynthTargetImage img;
        img.record.id = image_id("target", i);
        img.record.pixels = finish(pixels, spec.canvas, spec.noise_level, rng);
        img.record.source = ImageSource::target;
        img.labels = label_vector_from_mask(gt, taxonomy);
        img.gt = std::move(gt);
        out.push_back(std::move(img));
    }
    return out;
}

void write_retrieved_groups(const fs::path& dir, const std::vector<SynthGroup>& groups, const ClassTaxonomy& taxonomy) {
    for (const auto& g : groups) {
        const auto class_dir = dir / taxonomy.name(g.class_index);
        fs::create_directories(class_dir);
        for (const auto& img : g.images) {
            write_image(class_dir / (img.record.id + ".png"), img.record.pixels);
            Mask sidecar = img.binary;
            for (auto& v : sidecar.labels.data) v = v ? 255 : 0;
            write_mask(class_dir / (img.record.id + ".mask.png"), sidecar);
        }
    }
}

void write_target_set(const fs::path& dir, const std::string& name, const std::vector<SynthTargetImage>& images,
                      const ClassTaxonomy& taxonomy) {
    const auto img_dir = dir / name;
    fs::create_directories(img_dir / "gt");
    DatasetManifest labels_only, with_gt;
    for (const auto& img : images) {
        const auto image_path = fs::absolute(img_dir / (img.record.id + ".png")).lexically_normal();
        const auto mask_path = fs::absolute(img_dir / "gt" / (img.record.id + ".png")).lexically_normal();
        write_image(image_path, img.record.pixels);
        write_mask(mask_path, img.gt);
        std::vector<int> labels;
        for (int c : img.labels.indices())
            if (c != ClassTaxonomy::kBackground) labels.push_back(c);
        labels_only.entries.push_back({image_path, std::nullopt, labels});
        with_gt.entries.push_back({image_path, mask_path, labels});
    }
    write_manifest(dir / (name + "_labels.txt"), labels_only, taxonomy);
    write_manifest(dir / (name + "_gt.txt"), with_gt, taxonomy);
}

SynthBenchPlan parse_synth_plan(const std::string& text) {
    SynthBenchPlan plan;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    auto number = [&](const std::string& v, auto& out) {
        const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
        if (ec != std::errc{} || ptr != v.data() + v.size())
            throw std::invalid_argument("synth spec line " + std::to_string(line_no) + ": bad number \"" + v + "\"");
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto eq = line.find('=');
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        if (eq == std::string::npos)
            throw std::invalid_argument("synth spec line " + std::to_string(line_no) + ": expected key = value");
        auto trim = [](std::string s) {
            s.erase(0, s.find_first_not_of(" \t\r"));
            s.erase(s.find_last_not_of(" \t\r") + 1);
            return s;
        };
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        if (key == "retrieved_images") number(value, plan.retrieved_images);
        else if (key == "target_images") number(value, plan.target_images);
        else if (key == "eval_images") number(value, plan.eval_images);
        else if (key == "canvas") number(value, plan.canvas);
        else if (key == "noise_level") number(value, plan.noise_level);
        else if (key == "seed") number(value, plan.seed);
        else if (key == "clutter") {
            if (value == "true" || value == "on" || value == "1") plan.clutter = true;
            else if (value == "false" || value == "off" || value == "0") plan.clutter = false;
            else throw std::invalid_argument("synth spec line " + std::to_string(line_no) + ": bad boolean");
        } else {
            throw std::invalid_argument("synth spec line " + std::to_string(line_no) + ": unknown key \"" + key + "\"");
        }
    }
    return plan;
}

void write_synth_benchmark(const fs::path& out, const SynthBenchPlan& plan) {
    const auto taxonomy = ClassTaxonomy::synthetic_shapes();
    const SynthSpec base{1, plan.canvas, plan.noise_level, plan.clutter, plan.seed};
    auto spec_for = [&](int n, std::string_view tag) {
        SynthSpec s = base;
        s.num_images = n;
        s.rng_seed = derive_seed(plan.seed, tag);
        return s;
    };
    write_retrieved_groups(out / "retrieved", generate_retrieved_groups(spec_for(plan.retrieved_images, "retrieved")),
                           taxonomy);
    write_target_set(out, "train", generate_target_set(spec_for(plan.target_images, "train")), taxonomy);
    write_target_set(out, "val", generate_target_set(spec_for(plan.eval_images, "val")), taxonomy);
}

}  // namespace wss
