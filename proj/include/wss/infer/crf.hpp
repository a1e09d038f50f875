#pragma once

#include <span>
#include <vector>

#include "wss/core/config.hpp"
#include "wss/core/types.hpp"

namespace wss {

/// Fully connected CRF refinement by mean-field inference. Unary = -log(max(p, 1e-8)); the
/// pairwise term is a Potts model over two Gaussian kernels, a spatial one (gaussian_*) and a
/// bilateral position + colour one (bilateral_*), each normalised per pixel. Every iteration
/// computes
///   Q_i(l) ∝ exp(-U_i(l) + sum_m w_m * (K_m Q)_i(l) / (K_m 1)_i)
/// with the kernel sums evaluated on a permutohedral lattice. Zero iterations return the input
/// unchanged.
ScoreMap crf_refine(const ImageRecord& image, const ScoreMap& probs, const CrfSettings& settings);

/// Per-pixel features for the spatial kernel: (x, y) / sigma_xy.
std::vector<float> spatial_features(int height, int width, double sigma_xy);
/// Per-pixel features for the bilateral kernel: (x/sxy, y/sxy, r/srgb, g/srgb, b/srgb).
std::vector<float> bilateral_features(const RgbImage& image, double sigma_xy, double sigma_rgb);

/// O(N^2) evaluation of sum_j exp(-|f_i - f_j|^2 / 2) * in_j, for checking the lattice.
std::vector<double> exact_gaussian_filter(std::span<const float> features, int dims, std::span<const double> in,
                                          int value_size);

}  // namespace wss
