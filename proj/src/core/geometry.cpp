#include "wss/core/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <opencv2/imgproc.hpp>

#include "wss/core/random.hpp"

namespace wss {

std::pair<int, int> max_dim_size(int height, int width, int max_dim) {
    if (max_dim < 1) throw std::invalid_argument("max_dim must be >= 1");
    const int longest = std::max(height, width);
    if (longest <= max_dim) return {height, width};
    // round(side * max_dim / longest) in exact integer arithmetic
    auto scale = [&](int side) {
        const std::int64_t num = 2LL * side * max_dim + longest;
        return std::max<int>(1, static_cast<int>(num / (2LL * longest)));
    };
    if (height >= width) return {max_dim, scale(width)};
    return {scale(height), max_dim};
}

RgbImage resize_bilinear(const RgbImage& image, int height, int width) {
    if (height < 1 || width < 1) throw std::invalid_argument("resize target must be positive");
    if (height == image.height && width == image.width) return image;
    RgbImage out(height, width, image.channels);
    const int type = CV_8UC(image.channels);
    const cv::Mat src(image.height, image.width, type, const_cast<std::uint8_t*>(image.data.data()));
    cv::Mat dst(height, width, type, out.data.data());
    cv::resize(src, dst, dst.size(), 0, 0, cv::INTER_LINEAR);
    return out;
}

Mask resize_nearest(const Mask& mask, int height, int width) {
    if (height < 1 || width < 1) throw std::invalid_argument("resize target must be positive");
    if (height == mask.height() && width == mask.width()) return mask;
    Mask out(height, width);
    const cv::Mat src(mask.height(), mask.width(), CV_8UC1, const_cast<std::uint8_t*>(mask.labels.data.data()));
    cv::Mat dst(height, width, CV_8UC1, out.labels.data.data());
    // Pixel-centre sampling; plain INTER_NEAREST is biased toward the top-left.
    cv::resize(src, dst, dst.size(), 0, 0, cv::INTER_NEAREST_EXACT);
    return out;
}

ResizedPair resize_max_dim(const ImageRecord& image, int max_dim, const std::optional<Mask>& mask) {
    if (mask && (mask->height() != image.height() || mask->width() != image.width()))
        throw std::invalid_argument("image/mask shape mismatch for " + image.id);
    const auto [h, w] = max_dim_size(image.height(), image.width(), max_dim);
    ResizedPair out{image, std::nullopt};
    out.image.pixels = resize_bilinear(image.pixels, h, w);
    if (mask) out.mask = resize_nearest(*mask, h, w);
    return out;
}

CropPair random_crop_pair(const ImageRecord& image, const Mask& mask, int crop, std::uint64_t rng_seed,
                          std::array<std::uint8_t, 3> pad_value) {
    if (crop < 1) throw std::invalid_argument("crop must be >= 1");
    if (mask.height() != image.height() || mask.width() != image.width())
        throw std::invalid_argument("image/mask shape mismatch for " + image.id);
    const int ph = std::max(image.height(), crop);
    const int pw = std::max(image.width(), crop);

    Rng rng(rng_seed);
    CropPair out;
    out.offset_y = static_cast<int>(uniform_int(rng, 0, ph - crop));
    out.offset_x = static_cast<int>(uniform_int(rng, 0, pw - crop));
    out.image = image;
    out.image.pixels = RgbImage(crop, crop, 3);
    out.mask = Mask(crop, crop, kIgnoreLabel);
    for (int y = 0; y < crop; ++y) {
        const int sy = y + out.offset_y;
        for (int x = 0; x < crop; ++x) {
            const int sx = x + out.offset_x;
            const bool inside = sy < image.height() && sx < image.width();
            for (int c = 0; c < 3; ++c)
                out.image.pixels.at(y, x, c) = inside ? image.pixels.at(sy, sx, c) : pad_value[static_cast<std::size_t>(c)];
            if (inside) out.mask.at(y, x) = mask.at(sy, sx);
        }
    }
    return out;
}

RgbImage hflip(const RgbImage& image) {
    RgbImage out(image.height, image.width, image.channels);
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x)
            for (int c = 0; c < image.channels; ++c) out.at(y, x, c) = image.at(y, image.width - 1 - x, c);
    return out;
}

Mask hflip(const Mask& mask) {
    Mask out(mask.height(), mask.width());
    for (int y = 0; y < mask.height(); ++y)
        for (int x = 0; x < mask.width(); ++x) out.at(y, x) = mask.at(y, mask.width() - 1 - x);
    return out;
}

LabelVector label_vector_from_mask(const Mask& mask, const ClassTaxonomy& taxonomy) {
    LabelVector v(taxonomy.size());
    for (std::uint8_t value : mask.labels.data) {
        if (value == kIgnoreLabel) continue;
        if (value >= taxonomy.size())
            throw std::invalid_argument("mask value " + std::to_string(value) + " outside taxonomy");
        v.set(value);
    }
    return v;
}

std::array<double, 3> channel_mean(const std::vector<const RgbImage*>& images) {
    std::array<double, 3> sum{0, 0, 0};
    double count = 0;
    for (const auto* img : images) {
        for (std::size_t p = 0; p < img->pixel_count(); ++p)
            for (std::size_t c = 0; c < 3; ++c) sum[c] += img->data[p * 3 + c];
        count += static_cast<double>(img->pixel_count());
    }
    if (count == 0) return {0, 0, 0};
    for (auto& s : sum) s /= count;
    return sum;
}

}  // namespace wss
