#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <utility>

#include "wss/core/types.hpp"

namespace wss {

/// Output size for a max-dimension cap: never upscales, rounds the short side to nearest (min 1).
std::pair<int, int> max_dim_size(int height, int width, int max_dim);

/// Bilinear resampling with half-pixel centres; identity when the size is unchanged.
RgbImage resize_bilinear(const RgbImage& image, int height, int width);
/// Nearest-neighbour resampling for label rasters.
Mask resize_nearest(const Mask& mask, int height, int width);

struct ResizedPair {
    ImageRecord image;
    std::optional<Mask> mask;
};

/// Caps max(H, W) at `max_dim`. The image is resampled bilinearly, the mask nearest-neighbour.
ResizedPair resize_max_dim(const ImageRecord& image, int max_dim, const std::optional<Mask>& mask = std::nullopt);

struct CropPair {
    ImageRecord image;
    Mask mask;
    int offset_y = 0;
    int offset_x = 0;
};

/// crop x crop window at an offset drawn uniformly from the valid positions (deterministic in
/// `rng_seed`). Inputs smaller than the crop are padded bottom/right first: the image with
/// `pad_value`, the mask with kIgnoreLabel.
CropPair random_crop_pair(const ImageRecord& image, const Mask& mask, int crop, std::uint64_t rng_seed,
                          std::array<std::uint8_t, 3> pad_value = {0, 0, 0});

RgbImage hflip(const RgbImage& image);
Mask hflip(const Mask& mask);

/// Classes seen in the mask (ignore excluded); background always reported present.
LabelVector label_vector_from_mask(const Mask& mask, const ClassTaxonomy& taxonomy);

/// Per-channel mean intensity over all pixels of all images.
std::array<double, 3> channel_mean(const std::vector<const RgbImage*>& images);

}  // namespace wss
