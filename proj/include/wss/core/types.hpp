#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace wss {

/// Pixel value marking a mask position that is excluded from losses and evaluation.
inline constexpr std::uint8_t kIgnoreLabel = 255;

/// Ordered set of semantic classes. Index 0 is always "background".
class ClassTaxonomy {
public:
    static constexpr int kBackground = 0;

    explicit ClassTaxonomy(std::vector<std::string> names);

    /// The 21-class layout of the PASCAL VOC benchmark.
    static ClassTaxonomy pascal_voc();
    /// background + disk, square, triangle; used by the synthetic benchmark.
    static ClassTaxonomy synthetic_shapes();

    int size() const { return static_cast<int>(names_.size()); }
    const std::string& name(int index) const { return names_.at(static_cast<std::size_t>(index)); }
    const std::vector<std::string>& names() const { return names_; }

    std::optional<int> find(std::string_view name) const;
    /// Throws std::invalid_argument naming the class when it is unknown.
    int index_of(std::string_view name) const;

    bool operator==(const ClassTaxonomy&) const = default;

private:
    std::vector<std::string> names_;
};

/// Dense row-major H x W x channels raster.
template <typename T>
struct Raster {
    int height = 0;
    int width = 0;
    int channels = 1;
    std::vector<T> data;

    Raster() = default;
    Raster(int h, int w, int c, T fill = T{})
        : height(h), width(w), channels(c),
          data(static_cast<std::size_t>(h) * static_cast<std::size_t>(w) * static_cast<std::size_t>(c), fill) {}

    std::size_t index(int y, int x, int c = 0) const {
        return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) *
                   static_cast<std::size_t>(channels) +
               static_cast<std::size_t>(c);
    }
    T& at(int y, int x, int c = 0) { return data[index(y, x, c)]; }
    const T& at(int y, int x, int c = 0) const { return data[index(y, x, c)]; }
    std::size_t pixel_count() const { return static_cast<std::size_t>(height) * static_cast<std::size_t>(width); }
    bool same_shape(const Raster& other) const {
        return height == other.height && width == other.width && channels == other.channels;
    }
    bool operator==(const Raster&) const = default;
};

using RgbImage = Raster<std::uint8_t>;

enum class ImageSource { retrieved, target };

struct ImageRecord {
    std::string id;
    RgbImage pixels;  // H x W x 3, RGB order
    ImageSource source = ImageSource::target;
    std::optional<int> query_class;

    int height() const { return pixels.height; }
    int width() const { return pixels.width; }
};

/// Checks the ImageRecord invariants; throws std::invalid_argument on violation.
void validate(const ImageRecord& record);

/// Per-image class presence. present[0] (background) is always true.
struct LabelVector {
    std::vector<std::uint8_t> present;

    LabelVector() = default;
    explicit LabelVector(int num_classes) : present(static_cast<std::size_t>(num_classes), 0) { present.at(0) = 1; }

    static LabelVector all(int num_classes);
    static LabelVector from_indices(int num_classes, const std::vector<int>& classes);

    int size() const { return static_cast<int>(present.size()); }
    bool has(int cls) const { return present.at(static_cast<std::size_t>(cls)) != 0; }
    void set(int cls, bool value = true) { present.at(static_cast<std::size_t>(cls)) = value ? 1 : 0; }
    /// Sorted class indices that are present, background included.
    std::vector<int> indices() const;
    /// True when every class present here is also present in `other`.
    bool subset_of(const LabelVector& other) const;
    bool operator==(const LabelVector&) const = default;
};

/// H x W class-index raster; kIgnoreLabel marks excluded pixels.
struct Mask {
    Raster<std::uint8_t> labels;

    Mask() = default;
    Mask(int h, int w, std::uint8_t fill = 0) : labels(h, w, 1, fill) {}

    int height() const { return labels.height; }
    int width() const { return labels.width; }
    std::uint8_t& at(int y, int x) { return labels.at(y, x); }
    std::uint8_t at(int y, int x) const { return labels.at(y, x); }
    bool operator==(const Mask&) const = default;
};

/// Throws std::invalid_argument if any non-ignore value is >= num_classes.
void validate(const Mask& mask, int num_classes);

enum class ScoreSpace { logits, probabilities };

/// H x W x C real-valued field, class-minor layout.
struct ScoreMap {
    int height = 0;
    int width = 0;
    int classes = 0;
    ScoreSpace space = ScoreSpace::logits;
    std::vector<double> data;

    ScoreMap() = default;
    ScoreMap(int h, int w, int c, ScoreSpace s, double fill = 0.0)
        : height(h), width(w), classes(c), space(s),
          data(static_cast<std::size_t>(h) * static_cast<std::size_t>(w) * static_cast<std::size_t>(c), fill) {}

    std::size_t spatial_size() const { return static_cast<std::size_t>(height) * static_cast<std::size_t>(width); }
    std::size_t offset(int y, int x) const {
        return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) *
               static_cast<std::size_t>(classes);
    }
    double& at(int y, int x, int c) { return data[offset(y, x) + static_cast<std::size_t>(c)]; }
    double at(int y, int x, int c) const { return data[offset(y, x) + static_cast<std::size_t>(c)]; }
    bool same_shape(const ScoreMap& o) const { return height == o.height && width == o.width && classes == o.classes; }
    bool operator==(const ScoreMap&) const = default;
};

/// For probability maps: every entry >= 0 and each position sums to 1 within `tolerance`.
bool is_probability_map(const ScoreMap& map, double tolerance = 1e-5);

/// Per-position softmax of a logit map.
ScoreMap softmax(const ScoreMap& logits);

}  // namespace wss
