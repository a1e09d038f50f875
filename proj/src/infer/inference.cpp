#include "wss/infer/inference.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "wss/core/geometry.hpp"
#include "wss/core/image_io.hpp"
#include "wss/core/parallel.hpp"
#include "wss/infer/crf.hpp"

namespace wss {

namespace fs = std::filesystem;

Mask constrained_argmax(const ScoreMap& probs, const LabelVector& y) {
    if (probs.space != ScoreSpace::probabilities)
        throw std::invalid_argument("constrained_argmax needs probabilities; apply softmax to logits first");
    if (y.size() != probs.classes)
        throw std::invalid_argument("constrained_argmax: label vector has " + std::to_string(y.size()) +
                                    " classes, scores have " + std::to_string(probs.classes));
    if (!y.has(ClassTaxonomy::kBackground)) throw std::invalid_argument("constrained_argmax: background must be allowed");
    const auto allowed = y.indices();
    Mask out(probs.height, probs.width);
    const auto C = static_cast<std::size_t>(probs.classes);
    for (std::size_t p = 0; p < probs.spatial_size(); ++p) {
        const double* s = probs.data.data() + p * C;
        int best = allowed.front();
        for (int c : allowed) {
            if (s[c] < 0) throw std::invalid_argument("constrained_argmax: negative probability");
            if (s[c] > s[best]) best = c;
        }
        out.labels.data[p] = static_cast<std::uint8_t>(best);
    }
    return out;
}

ScoreMap resample_scores(const ScoreMap& scores, int out_height, int out_width, double scale_y, double offset_y,
                         double scale_x, double offset_x) {
    ScoreMap out(out_height, out_width, scores.classes, scores.space);
    const auto C = static_cast<std::size_t>(scores.classes);
    struct Tap {
        int i0, i1;
        double f;
    };
    auto taps = [](int n_out, int n_in, double scale, double offset) {
        std::vector<Tap> t(static_cast<std::size_t>(n_out));
        for (int i = 0; i < n_out; ++i) {
            const double src = std::clamp(i * scale + offset, 0.0, static_cast<double>(n_in - 1));
            const int i0 = static_cast<int>(std::floor(src));
            t[static_cast<std::size_t>(i)] = {i0, std::min(i0 + 1, n_in - 1), src - i0};
        }
        return t;
    };
    const auto ty = taps(out_height, scores.height, scale_y, offset_y);
    const auto tx = taps(out_width, scores.width, scale_x, offset_x);
    for (int y = 0; y < out_height; ++y) {
        const auto& a = ty[static_cast<std::size_t>(y)];
        for (int x = 0; x < out_width; ++x) {
            const auto& b = tx[static_cast<std::size_t>(x)];
            const double* s00 = scores.data.data() + scores.offset(a.i0, b.i0);
            const double* s01 = scores.data.data() + scores.offset(a.i0, b.i1);
            const double* s10 = scores.data.data() + scores.offset(a.i1, b.i0);
            const double* s11 = scores.data.data() + scores.offset(a.i1, b.i1);
            double* o = out.data.data() + out.offset(y, x);
            for (std::size_t c = 0; c < C; ++c) {
                const double top = s00[c] * (1 - b.f) + s01[c] * b.f;
                const double bottom = s10[c] * (1 - b.f) + s11[c] * b.f;
                o[c] = top * (1 - a.f) + bottom * a.f;
            }
        }
    }
    return out;
}

ScoreMap upsample_network_scores(const ScoreMap& scores, int in_height, int in_width, int out_height, int out_width) {
    // Output pixel p has centre (p + 0.5) * in/out - 0.5 in input pixels; logit cell k sits on
    // input pixel kOutputStride * k.
    const double ry = static_cast<double>(in_height) / out_height;
    const double rx = static_cast<double>(in_width) / out_width;
    return resample_scores(scores, out_height, out_width, ry / kOutputStride, (0.5 * ry - 0.5) / kOutputStride,
                           rx / kOutputStride, (0.5 * rx - 0.5) / kOutputStride);
}

void renormalize(ScoreMap& probs) {
    const auto C = static_cast<std::size_t>(probs.classes);
    for (std::size_t p = 0; p < probs.spatial_size(); ++p) {
        double* s = probs.data.data() + p * C;
        double sum = 0.0;
        for (std::size_t c = 0; c < C; ++c) sum += s[c];
        for (std::size_t c = 0; c < C; ++c) s[c] /= sum;
    }
}

namespace {

/// Upsampled, not yet renormalised, probabilities for one scale.
ScoreMap scale_probs(const RgbImage& image, const NetworkParams& params, int scaled_h, int scaled_w) {
    const RgbImage scaled = resize_bilinear(image, scaled_h, scaled_w);
    const ScoreMap probs = softmax(forward_segmentation(scaled, params));
    return upsample_network_scores(probs, scaled_h, scaled_w, image.height, image.width);
}

}  // namespace

ScoreMap single_scale_probs(const RgbImage& image, const NetworkParams& params) {
    ScoreMap out = scale_probs(image, params, image.height, image.width);
    renormalize(out);
    return out;
}

ScoreMap multiscale_probs(const ImageRecord& image, const NetworkParams& params, std::span<const double> scales,
                          std::vector<std::string>* warnings) {
    if (scales.empty()) throw std::invalid_argument("multiscale_probs: no scales given");
    const int classes = params.architecture().num_classes;
    ScoreMap sum(image.height(), image.width(), classes, ScoreSpace::probabilities, 0.0);
    int used = 0;
    for (double s : scales) {
        if (!(s > 0)) throw std::invalid_argument("multiscale_probs: scales must be > 0");
        const int h = std::max(1, static_cast<int>(std::lround(image.height() * s)));
        const int w = std::max(1, static_cast<int>(std::lround(image.width() * s)));
        if (h < kMinInputSize || w < kMinInputSize) {
            if (warnings)
                warnings->push_back("scale " + std::to_string(s) + " skipped for " + image.id + ": " + std::to_string(h) +
                                    "x" + std::to_string(w) + " below network minimum");
            continue;
        }
        const ScoreMap probs = scale_probs(image.pixels, params, h, w);
        for (std::size_t i = 0; i < sum.data.size(); ++i) sum.data[i] += probs.data[i];
        ++used;
    }
    if (used == 0) throw std::invalid_argument("multiscale_probs: every scale fell below the network minimum for " + image.id);
    for (double& v : sum.data) v /= used;
    renormalize(sum);
    return sum;
}

Mask predict_mask(const ImageRecord& image, const NetworkParams& params, const std::optional<LabelVector>& y,
                  std::span<const double> scales, const std::optional<CrfSettings>& crf) {
    ScoreMap probs = multiscale_probs(image, params, scales);
    if (crf) probs = crf_refine(image, probs, *crf);
    return constrained_argmax(probs, y.value_or(LabelVector::all(probs.classes)));
}

DatasetManifest generate_target_masks(const DatasetManifest& manifest, const ClassTaxonomy& taxonomy,
                                      const NetworkParams& params, const PipelineConfig& config, const fs::path& out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec || !fs::is_directory(out_dir)) throw std::runtime_error("cannot create mask directory " + out_dir.string());
    std::set<std::string> stems;
    for (const auto& e : manifest.entries) {
        if (!e.labels) throw std::invalid_argument("generate_target_masks: entry without labels: " + e.image.string());
        if (!stems.insert(e.image.stem().string()).second)
            throw std::invalid_argument("generate_target_masks: duplicate image name " + e.image.stem().string());
    }

    DatasetManifest out = manifest;
    const std::optional<CrfSettings> crf = config.crf_on_generation ? std::optional(config.crf) : std::nullopt;
    parallel_for(out.entries.size(), config.workers, [&](std::size_t i) {
        auto& e = out.entries[i];
        const auto record = load_record(e.image, ImageSource::target);
        const auto y = entry_labels(e, taxonomy.size());
        const Mask mask = predict_mask(record, params, y, config.inference_scales, crf);
        const auto path = out_dir / (e.image.stem().string() + ".png");
        write_mask(path, mask);
        e.mask = fs::absolute(path).lexically_normal();
    });
    return out;
}

}  // namespace wss
