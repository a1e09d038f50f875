#include "wss/infer/crf.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

#include "wss/infer/permutohedral.hpp"

namespace wss {

std::vector<float> spatial_features(int height, int width, double sigma_xy) {
    std::vector<float> f(static_cast<std::size_t>(height) * static_cast<std::size_t>(width) * 2);
    for (int y = 0, i = 0; y < height; ++y)
        for (int x = 0; x < width; ++x, ++i) {
            f[static_cast<std::size_t>(i) * 2] = static_cast<float>(x / sigma_xy);
            f[static_cast<std::size_t>(i) * 2 + 1] = static_cast<float>(y / sigma_xy);
        }
    return f;
}

std::vector<float> bilateral_features(const RgbImage& image, double sigma_xy, double sigma_rgb) {
    std::vector<float> f(image.pixel_count() * 5);
    for (int y = 0, i = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x, ++i) {
            float* o = f.data() + static_cast<std::size_t>(i) * 5;
            o[0] = static_cast<float>(x / sigma_xy);
            o[1] = static_cast<float>(y / sigma_xy);
            for (int c = 0; c < 3; ++c) o[2 + c] = static_cast<float>(image.at(y, x, c) / sigma_rgb);
        }
    return f;
}

std::vector<double> exact_gaussian_filter(std::span<const float> features, int dims, std::span<const double> in,
                                          int value_size) {
    const auto d = static_cast<std::size_t>(dims);
    const auto vs = static_cast<std::size_t>(value_size);
    const std::size_t n = features.size() / d;
    if (in.size() != n * vs) throw std::invalid_argument("exact_gaussian_filter: value array has the wrong size");
    std::vector<double> out(n * vs, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double dist = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double diff = static_cast<double>(features[i * d + k]) - features[j * d + k];
                dist += diff * diff;
            }
            const double w = std::exp(-0.5 * dist);
            for (std::size_t k = 0; k < vs; ++k) out[i * vs + k] += w * in[j * vs + k];
        }
    }
    return out;
}

namespace {

struct Kernel {
    std::unique_ptr<PermutohedralLattice> lattice;
    std::vector<float> norm;
    double weight;
};

Kernel make_kernel(std::vector<float> features, int dims, int n, double weight) {
    Kernel k{std::make_unique<PermutohedralLattice>(features, dims, n), std::vector<float>(static_cast<std::size_t>(n)), weight};
    std::vector<float> ones(static_cast<std::size_t>(n), 1.0f);
    k.lattice->filter(ones, k.norm, 1);
    for (auto& v : k.norm) v = 1.0f / (v + 1e-20f);
    return k;
}

}  // namespace

ScoreMap crf_refine(const ImageRecord& image, const ScoreMap& probs, const CrfSettings& settings) {
    settings.validate();
    if (probs.space != ScoreSpace::probabilities) throw std::invalid_argument("crf_refine expects probabilities");
    if (probs.height != image.height() || probs.width != image.width())
        throw std::invalid_argument("crf_refine: image " + std::to_string(image.height()) + "x" +
                                    std::to_string(image.width()) + " vs probabilities " + std::to_string(probs.height) +
                                    "x" + std::to_string(probs.width));
    if (settings.iterations == 0) return probs;

    const int n = static_cast<int>(probs.spatial_size());
    const auto C = static_cast<std::size_t>(probs.classes);
    std::vector<Kernel> kernels;
    if (settings.gaussian_weight > 0)
        kernels.push_back(make_kernel(spatial_features(image.height(), image.width(), settings.gaussian_sigma_xy), 2, n,
                                      settings.gaussian_weight));
    if (settings.bilateral_weight > 0)
        kernels.push_back(make_kernel(bilateral_features(image.pixels, settings.bilateral_sigma_xy, settings.bilateral_sigma_rgb),
                                      5, n, settings.bilateral_weight));

    std::vector<double> unary(probs.data.size());
    for (std::size_t i = 0; i < unary.size(); ++i) unary[i] = -std::log(std::max(probs.data[i], 1e-8));

    ScoreMap q(probs.height, probs.width, probs.classes, ScoreSpace::probabilities);
    auto normalise = [&](std::vector<double>& energy) {
        for (std::size_t p = 0; p < static_cast<std::size_t>(n); ++p) {
            double* e = energy.data() + p * C;
            const double peak = *std::max_element(e, e + C);
            double sum = 0.0;
            for (std::size_t c = 0; c < C; ++c) sum += (e[c] = std::exp(e[c] - peak));
            for (std::size_t c = 0; c < C; ++c) q.data[p * C + c] = e[c] / sum;
        }
    };

    std::vector<double> energy(unary.size());
    for (std::size_t i = 0; i < energy.size(); ++i) energy[i] = -unary[i];
    normalise(energy);

    std::vector<float> qf(unary.size()), filtered(unary.size());
    for (int it = 0; it < settings.iterations; ++it) {
        for (std::size_t i = 0; i < energy.size(); ++i) energy[i] = -unary[i];
        if (!kernels.empty()) {
            for (std::size_t i = 0; i < qf.size(); ++i) qf[i] = static_cast<float>(q.data[i]);
            for (const auto& k : kernels) {
                k.lattice->filter(qf, filtered, probs.classes);
                for (std::size_t p = 0; p < static_cast<std::size_t>(n); ++p)
                    for (std::size_t c = 0; c < C; ++c)
                        energy[p * C + c] += k.weight * static_cast<double>(k.norm[p]) * filtered[p * C + c];
            }
        }
        normalise(energy);
    }
    return q;
}

}  // namespace wss
