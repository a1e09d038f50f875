#pragma once

#include <span>
#include <vector>

#include "wss/core/types.hpp"
#include "wss/model/network.hpp"

namespace wss {

struct SegLossResult {
    double loss = 0.0;
    ScoreMap gradient;  // d loss / d logits
    std::size_t valid_pixels = 0;
};

/// Mean negative log-softmax of the labelled class over non-ignore positions. `mask` must
/// already be at logit resolution. Throws std::invalid_argument on shape mismatch or when every
/// position is ignored.
SegLossResult softmax_nll_loss(const ScoreMap& logits, const Mask& mask);

/// Nearest-neighbour downsampling aligned with the network's output grid: logit cell (y, x)
/// takes the label at pixel (stride*y, stride*x).
Mask downsample_mask(const Mask& mask, int out_height, int out_width, int stride = kOutputStride);

struct MultiLabelLossResult {
    double loss = 0.0;
    std::vector<double> gradient;  // d loss / d p
};

/// Binary logistic loss averaged over all C entries (background included), evaluated as
/// (1-y)*softplus(p) + y*softplus(-p) so that |p| up to 1e4 neither overflows nor loses precision.
MultiLabelLossResult multilabel_bce_loss(const MultiLabelScores& p, const LabelVector& y);
/// Same loss with real-valued targets in [0, 1].
MultiLabelLossResult multilabel_bce_loss(std::span<const double> p, std::span<const double> targets);

struct LossReport {
    double seg_loss = 0.0;
    double multilabel_loss = 0.0;
    double combined = 0.0;
    std::size_t valid_pixel_count = 0;
};

LossReport combine(double seg_loss, double multilabel_loss, double lambda, std::size_t valid_pixels = 0);

/// Segmentation loss plus lambda times the multi-label loss for one image.
LossReport combined_loss(const ScoreMap& logits, const Mask& mask, const MultiLabelScores& p, const LabelVector& y,
                         double lambda);

/// Batch total: component-wise sum of per-image reports.
LossReport sum_reports(std::span<const LossReport> reports);

double sigmoid(double x);
/// log(1 + exp(x)) without overflow.
double softplus(double x);

}  // namespace wss
