#include "wss/train/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace wss {

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

SegLossResult softmax_nll_loss(const ScoreMap& logits, const Mask& mask) {
    if (logits.height != mask.height() || logits.width != mask.width())
        throw std::invalid_argument("softmax_nll_loss: mask " + std::to_string(mask.height()) + "x" +
                                    std::to_string(mask.width()) + " does not match logits " +
                                    std::to_string(logits.height) + "x" + std::to_string(logits.width));
    SegLossResult out;
    out.gradient = ScoreMap(logits.height, logits.width, logits.classes, ScoreSpace::logits, 0.0);
    const auto C = static_cast<std::size_t>(logits.classes);
    std::vector<double> prob(C);
    double total = 0.0;
    for (std::size_t p = 0; p < logits.spatial_size(); ++p) {
        const std::uint8_t label = mask.labels.data[p];
        if (label == kIgnoreLabel) continue;
        if (label >= logits.classes) throw std::invalid_argument("mask label exceeds class count");
        const double* f = logits.data.data() + p * C;
        const auto top = static_cast<std::size_t>(std::max_element(f, f + C) - f);
        const double peak = f[top];
        // The peak term is exactly 1; log1p of the rest keeps precision near certainty.
        double rest = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
            prob[c] = std::exp(f[c] - peak);
            if (c != top) rest += prob[c];
        }
        const double sum = 1.0 + rest;
        total += std::log1p(rest) - (f[label] - peak);
        double* g = out.gradient.data.data() + p * C;
        for (std::size_t c = 0; c < C; ++c) g[c] = prob[c] / sum;
        g[label] -= 1.0;
        ++out.valid_pixels;
    }
    if (out.valid_pixels == 0) throw std::invalid_argument("softmax_nll_loss: every position is ignored");
    const double inv = 1.0 / static_cast<double>(out.valid_pixels);
    out.loss = total * inv;
    for (double& g : out.gradient.data) g *= inv;
    return out;
}

Mask downsample_mask(const Mask& mask, int out_height, int out_width, int stride) {
    Mask out(out_height, out_width);
    for (int y = 0; y < out_height; ++y) {
        const int sy = std::min(y * stride, mask.height() - 1);
        for (int x = 0; x < out_width; ++x) out.at(y, x) = mask.at(sy, std::min(x * stride, mask.width() - 1));
    }
    return out;
}

MultiLabelLossResult multilabel_bce_loss(std::span<const double> p, std::span<const double> targets) {
    if (p.size() != targets.size())
        throw std::invalid_argument("multilabel_bce_loss: " + std::to_string(p.size()) + " scores vs " +
                                    std::to_string(targets.size()) + " labels");
    if (p.empty()) throw std::invalid_argument("multilabel_bce_loss: empty input");
    MultiLabelLossResult out;
    out.gradient.resize(p.size());
    const double inv = 1.0 / static_cast<double>(p.size());
    double total = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
        // -[y log s(p) + (1-y) log(1-s(p))] = softplus(p) - y p, split by target so a confident
        // correct score never subtracts two nearly equal numbers.
        const double y = targets[j];
        total += (1.0 - y) * softplus(p[j]) + y * softplus(-p[j]);
        out.gradient[j] = ((1.0 - y) * sigmoid(p[j]) - y * sigmoid(-p[j])) * inv;
    }
    out.loss = total * inv;
    return out;
}

MultiLabelLossResult multilabel_bce_loss(const MultiLabelScores& p, const LabelVector& y) {
    std::vector<double> targets(y.present.begin(), y.present.end());
    return multilabel_bce_loss(std::span<const double>(p.p), std::span<const double>(targets));
}

LossReport combine(double seg_loss, double multilabel_loss, double lambda, std::size_t valid_pixels) {
    return {seg_loss, multilabel_loss, seg_loss + lambda * multilabel_loss, valid_pixels};
}

LossReport combined_loss(const ScoreMap& logits, const Mask& mask, const MultiLabelScores& p, const LabelVector& y,
                         double lambda) {
    if (lambda < 0) throw std::invalid_argument("lambda must be >= 0");
    const auto seg = softmax_nll_loss(logits, mask);
    const auto ml = multilabel_bce_loss(p, y);
    return combine(seg.loss, ml.loss, lambda, seg.valid_pixels);
}

LossReport sum_reports(std::span<const LossReport> reports) {
    LossReport total;
    for (const auto& r : reports) {
        total.seg_loss += r.seg_loss;
        total.multilabel_loss += r.multilabel_loss;
        total.combined += r.combined;
        total.valid_pixel_count += r.valid_pixel_count;
    }
    return total;
}

}  // namespace wss
