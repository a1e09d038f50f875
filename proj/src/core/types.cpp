#include "wss/core/types.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace wss {

ClassTaxonomy::ClassTaxonomy(std::vector<std::string> names) : names_(std::move(names)) {
    if (names_.size() < 2) throw std::invalid_argument("taxonomy needs at least 2 classes");
    if (names_.front() != "background")
        throw std::invalid_argument("taxonomy class 0 must be \"background\", got \"" + names_.front() + "\"");
    std::unordered_set<std::string> seen;
    for (const auto& n : names_) {
        if (n.empty()) throw std::invalid_argument("taxonomy contains an empty class name");
        if (!seen.insert(n).second) throw std::invalid_argument("duplicate class name \"" + n + "\"");
    }
}

ClassTaxonomy ClassTaxonomy::pascal_voc() {
    return ClassTaxonomy({"background", "aeroplane", "bicycle", "bird",      "boat",    "bottle", "bus",
                          "car",        "cat",       "chair",   "cow",       "diningtable", "dog", "horse",
                          "motorbike",  "person",    "pottedplant", "sheep", "sofa",    "train",  "tvmonitor"});
}

ClassTaxonomy ClassTaxonomy::synthetic_shapes() {
    return ClassTaxonomy({"background", "disk", "square", "triangle"});
}

std::optional<int> ClassTaxonomy::find(std::string_view name) const {
    const auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) return std::nullopt;
    return static_cast<int>(it - names_.begin());
}

int ClassTaxonomy::index_of(std::string_view name) const {
    if (auto idx = find(name)) return *idx;
    throw std::invalid_argument("unknown class \"" + std::string(name) + "\"");
}

void validate(const ImageRecord& record) {
    if (record.height() < 1 || record.width() < 1) throw std::invalid_argument("image " + record.id + " is empty");
    if (record.pixels.channels != 3) throw std::invalid_argument("image " + record.id + " is not 3-channel");
    if (record.pixels.data.size() != record.pixels.pixel_count() * 3)
        throw std::invalid_argument("image " + record.id + " has inconsistent storage");
    if (record.source == ImageSource::retrieved &&
        (!record.query_class || *record.query_class == ClassTaxonomy::kBackground))
        throw std::invalid_argument("retrieved image " + record.id + " needs a non-background query class");
}

LabelVector LabelVector::all(int num_classes) {
    LabelVector v(num_classes);
    std::fill(v.present.begin(), v.present.end(), std::uint8_t{1});
    return v;
}

LabelVector LabelVector::from_indices(int num_classes, const std::vector<int>& classes) {
    LabelVector v(num_classes);
    for (int c : classes) {
        if (c < 0 || c >= num_classes) throw std::invalid_argument("class index out of range: " + std::to_string(c));
        v.set(c);
    }
    return v;
}

std::vector<int> LabelVector::indices() const {
    std::vector<int> out;
    for (int c = 0; c < size(); ++c)
        if (has(c)) out.push_back(c);
    return out;
}

bool LabelVector::subset_of(const LabelVector& other) const {
    if (other.size() != size()) return false;
    for (int c = 0; c < size(); ++c)
        if (has(c) && !other.has(c)) return false;
    return true;
}

void validate(const Mask& mask, int num_classes) {
    for (std::uint8_t v : mask.labels.data)
        if (v != kIgnoreLabel && v >= num_classes)
            throw std::invalid_argument("mask value " + std::to_string(v) + " exceeds class count " +
                                        std::to_string(num_classes));
}

bool is_probability_map(const ScoreMap& map, double tolerance) {
    if (map.space != ScoreSpace::probabilities) return false;
    for (std::size_t p = 0; p < map.spatial_size(); ++p) {
        double sum = 0.0;
        for (int c = 0; c < map.classes; ++c) {
            const double v = map.data[p * static_cast<std::size_t>(map.classes) + static_cast<std::size_t>(c)];
            if (!(v >= 0.0)) return false;
            sum += v;
        }
        if (std::abs(sum - 1.0) > tolerance) return false;
    }
    return true;
}

ScoreMap softmax(const ScoreMap& logits) {
    ScoreMap out(logits.height, logits.width, logits.classes, ScoreSpace::probabilities);
    const auto C = static_cast<std::size_t>(logits.classes);
    for (std::size_t p = 0; p < logits.spatial_size(); ++p) {
        const double* in = logits.data.data() + p * C;
        double* o = out.data.data() + p * C;
        const double peak = *std::max_element(in, in + C);
        double sum = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
            o[c] = std::exp(in[c] - peak);
            sum += o[c];
        }
        for (std::size_t c = 0; c < C; ++c) o[c] /= sum;
    }
    return out;
}

}  // namespace wss
