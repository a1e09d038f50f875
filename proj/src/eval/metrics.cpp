#include "wss/eval/metrics.hpp"

#include <cstdio>
#include <stdexcept>

#include "wss/core/image_io.hpp"

namespace wss {

ConfusionMatrix::ConfusionMatrix(int num_classes)
    : classes_(num_classes), counts_(static_cast<std::size_t>(num_classes) * static_cast<std::size_t>(num_classes), 0) {
    if (num_classes < 1) throw std::invalid_argument("confusion matrix needs at least one class");
}

std::uint64_t ConfusionMatrix::total() const {
    std::uint64_t t = 0;
    for (auto c : counts_) t += c;
    return t;
}

std::uint64_t ConfusionMatrix::row_sum(int gt) const {
    std::uint64_t s = 0;
    for (int p = 0; p < classes_; ++p) s += at(gt, p);
    return s;
}

std::uint64_t ConfusionMatrix::col_sum(int pred) const {
    std::uint64_t s = 0;
    for (int g = 0; g < classes_; ++g) s += at(g, pred);
    return s;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
    if (other.classes_ != classes_) throw std::invalid_argument("confusion matrices differ in class count");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    return *this;
}

void accumulate(ConfusionMatrix& cm, const Mask& gt, const Mask& pred) {
    if (gt.height() != pred.height() || gt.width() != pred.width())
        throw std::invalid_argument("accumulate: ground truth " + std::to_string(gt.height()) + "x" +
                                    std::to_string(gt.width()) + " vs prediction " + std::to_string(pred.height()) +
                                    "x" + std::to_string(pred.width()));
    const int C = cm.num_classes();
    for (std::uint8_t p : pred.labels.data) {
        if (p == kIgnoreLabel) throw std::invalid_argument("accumulate: prediction contains the ignore label");
        if (p >= C) throw std::invalid_argument("accumulate: predicted class " + std::to_string(p) + " out of range");
    }
    for (std::size_t i = 0; i < gt.labels.data.size(); ++i) {
        const std::uint8_t g = gt.labels.data[i];
        if (g == kIgnoreLabel) continue;
        if (g >= C) throw std::invalid_argument("accumulate: ground-truth class " + std::to_string(g) + " out of range");
        ++cm.at(g, pred.labels.data[i]);
    }
}

std::vector<std::optional<double>> per_class_iou(const ConfusionMatrix& cm) {
    std::vector<std::optional<double>> out(static_cast<std::size_t>(cm.num_classes()));
    for (int j = 0; j < cm.num_classes(); ++j) {
        const auto tp = cm.at(j, j);
        const auto denom = cm.row_sum(j) + cm.col_sum(j) - tp;
        if (denom > 0) out[static_cast<std::size_t>(j)] = static_cast<double>(tp) / static_cast<double>(denom);
    }
    return out;
}

double mean_iou(const ConfusionMatrix& cm) {
    double sum = 0.0;
    int n = 0;
    for (const auto& v : per_class_iou(cm)) {
        if (!v) continue;
        sum += *v;
        ++n;
    }
    if (n == 0) throw std::domain_error("mean_iou: no class has a defined IoU");
    return sum / n;
}

std::string format_iou_report(const ConfusionMatrix& cm, const ClassTaxonomy& taxonomy) {
    if (taxonomy.size() != cm.num_classes()) throw std::invalid_argument("report taxonomy does not match matrix");
    auto fmt = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6f", v);
        return std::string(buf);
    };
    std::string out = "class,iou\n";
    const auto ious = per_class_iou(cm);
    for (int j = 0; j < cm.num_classes(); ++j) {
        const auto& v = ious[static_cast<std::size_t>(j)];
        out += taxonomy.name(j) + "," + (v ? fmt(*v) : std::string()) + "\n";
    }
    out += "mean," + fmt(mean_iou(cm)) + "\n";
    return out;
}

ConfusionMatrix evaluate_directory(const std::filesystem::path& pred_dir, const DatasetManifest& gt,
                                   const ClassTaxonomy& taxonomy) {
    ConfusionMatrix cm(taxonomy.size());
    for (const auto& e : gt.entries) {
        if (!e.mask) throw std::invalid_argument("evaluation entry without ground-truth mask: " + e.image.string());
        const auto pred_path = pred_dir / (e.image.stem().string() + ".png");
        accumulate(cm, read_mask(*e.mask), read_mask(pred_path));
    }
    return cm;
}

}  // namespace wss
