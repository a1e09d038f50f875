#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "wss/core/manifest.hpp"
#include "wss/core/types.hpp"

namespace wss {

/// counts[gt][pred] over non-ignore pixels.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(int num_classes);

    int num_classes() const { return classes_; }
    std::uint64_t at(int gt, int pred) const { return counts_[index(gt, pred)]; }
    std::uint64_t& at(int gt, int pred) { return counts_[index(gt, pred)]; }
    std::uint64_t total() const;
    std::uint64_t row_sum(int gt) const;
    std::uint64_t col_sum(int pred) const;

    ConfusionMatrix& operator+=(const ConfusionMatrix& other);
    bool operator==(const ConfusionMatrix&) const = default;

private:
    std::size_t index(int gt, int pred) const {
        return static_cast<std::size_t>(gt) * static_cast<std::size_t>(classes_) + static_cast<std::size_t>(pred);
    }
    int classes_;
    std::vector<std::uint64_t> counts_;
};

/// Adds one image. Pixels whose ground truth is kIgnoreLabel are skipped; the prediction must
/// not contain kIgnoreLabel. Throws std::invalid_argument on shape mismatch or bad labels.
void accumulate(ConfusionMatrix& cm, const Mask& gt, const Mask& pred);

/// IoU_j = tp / (row + col - tp); nullopt where the denominator is zero.
std::vector<std::optional<double>> per_class_iou(const ConfusionMatrix& cm);

/// Mean over classes with a defined IoU. Throws std::domain_error when none is defined.
double mean_iou(const ConfusionMatrix& cm);

/// `class,iou` CSV: one row per class (empty IoU when undefined) followed by a `mean` row.
std::string format_iou_report(const ConfusionMatrix& cm, const ClassTaxonomy& taxonomy);

/// Reads `<pred_dir>/<image stem>.png` for every entry of the ground-truth manifest.
ConfusionMatrix evaluate_directory(const std::filesystem::path& pred_dir, const DatasetManifest& gt,
                                   const ClassTaxonomy& taxonomy);

}  // namespace wss
