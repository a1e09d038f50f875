#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wss/core/config.hpp"
#include "wss/core/manifest.hpp"
#include "wss/core/types.hpp"
#include "wss/model/network.hpp"

namespace wss {

/// Per-pixel argmax restricted to the classes present in `y`; ties go to the lowest index.
/// Requires a probability map (non-negative scores) whose class count matches `y`.
Mask constrained_argmax(const ScoreMap& probs, const LabelVector& y);

/// Bilinear resampling of a score map where output pixel p reads source coordinate
/// p * scale + offset (per axis), clamped to the source extent.
ScoreMap resample_scores(const ScoreMap& scores, int out_height, int out_width, double scale_y, double offset_y,
                         double scale_x, double offset_x);

/// Upsamples stride-8 network scores computed on an image of (in_h, in_w) pixels back to
/// (out_h, out_w), honouring the network's cell-to-pixel alignment.
ScoreMap upsample_network_scores(const ScoreMap& scores, int in_height, int in_width, int out_height, int out_width);

/// Divides every position by its class sum.
void renormalize(ScoreMap& probs);

/// forward -> softmax -> upsample to full resolution -> renormalise, at input scale 1.
ScoreMap single_scale_probs(const RgbImage& image, const NetworkParams& params);

/// Mean of the upsampled per-scale probabilities, renormalised per pixel. Scales whose
/// resized image falls below the network minimum are skipped and reported in `warnings`;
/// throws std::invalid_argument when every scale is skipped.
ScoreMap multiscale_probs(const ImageRecord& image, const NetworkParams& params, std::span<const double> scales,
                          std::vector<std::string>* warnings = nullptr);

/// multiscale_probs -> optional crf_refine -> constrained_argmax (y defaults to all classes).
Mask predict_mask(const ImageRecord& image, const NetworkParams& params, const std::optional<LabelVector>& y,
                  std::span<const double> scales, const std::optional<CrfSettings>& crf);

/// Writes `<out_dir>/<image stem>.png` for every entry using its label constraint and returns
/// the manifest with mask paths filled in. CRF runs only when config.crf_on_generation is set.
DatasetManifest generate_target_masks(const DatasetManifest& manifest, const ClassTaxonomy& taxonomy,
                                      const NetworkParams& params, const PipelineConfig& config,
                                      const std::filesystem::path& out_dir);

}  // namespace wss
