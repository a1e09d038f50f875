#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "wss/core/manifest.hpp"
#include "wss/core/types.hpp"

namespace wss {

/// Class indices of the synthetic taxonomy (ClassTaxonomy::synthetic_shapes()).
enum class Shape : int { disk = 1, square = 2, triangle = 3 };
inline constexpr int kShapeClasses = 3;

struct SynthSpec {
    int num_images = 30;
    int canvas = 96;
    double noise_level = 0.3;
    bool clutter = true;
    std::uint64_t rng_seed = 0;

    void validate() const;
};

/// One retrieved-style image: a single shape of `class_index`, with its binary ground truth.
struct SynthGroupImage {
    ImageRecord record;
    Mask binary;  // 0 background, 1 foreground
};

struct SynthGroup {
    int class_index = 0;
    std::vector<SynthGroupImage> images;
};

/// num_images images split round-robin over the three shape classes. Each holds one shape
/// (random position, size and colour within the class palette) on a textured background.
std::vector<SynthGroup> generate_retrieved_groups(const SynthSpec& spec);

struct SynthTargetImage {
    ImageRecord record;
    Mask gt;             // full class-index ground truth
    LabelVector labels;  // equals label_vector_from_mask(gt)
};

/// Images with 1-3 shapes of distinct classes drawn in order (later shapes occlude earlier
/// ones); with clutter enabled, class-coloured checkerboard patches sit in the background.
std::vector<SynthTargetImage> generate_target_set(const SynthSpec& spec);

/// Writes `<dir>/<class name>/<id>.png` plus the sidecar `<id>.mask.png` (0/255).
void write_retrieved_groups(const std::filesystem::path& dir, const std::vector<SynthGroup>& groups,
                            const ClassTaxonomy& taxonomy);

/// Writes images and ground-truth masks under `<dir>/<name>/` and two manifests:
/// `<dir>/<name>_labels.txt` (image-level labels only) and `<dir>/<name>_gt.txt`
/// (ground-truth masks plus labels, for evaluation).
void write_target_set(const std::filesystem::path& dir, const std::string& name,
                      const std::vector<SynthTargetImage>& images, const ClassTaxonomy& taxonomy);

/// What `synthbench --spec` reads: `key = value` lines with keys retrieved_images,
/// target_images, eval_images, canvas, noise_level, clutter, seed.
struct SynthBenchPlan {
    int retrieved_images = 200;
    int target_images = 100;
    int eval_images = 60;
    int canvas = 96;
    double noise_level = 0.3;
    bool clutter = true;
    std::uint64_t seed = 0;
};

SynthBenchPlan parse_synth_plan(const std::string& text);

/// Generates retrieved groups under `<out>/retrieved`, the target training set (`train`) and
/// the withheld evaluation set (`val`), each from its own derived seed.
void write_synth_benchmark(const std::filesystem::path& out, const SynthBenchPlan& plan);

}  // namespace wss
