#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace wss {

/// Fully connected CRF parameters (mean-field inference, Potts compatibility).
struct CrfSettings {
    int iterations = 10;
    double gaussian_weight = 3.0;
    double gaussian_sigma_xy = 3.0;
    double bilateral_weight = 5.0;
    double bilateral_sigma_xy = 50.0;
    double bilateral_sigma_rgb = 10.0;

    /// Throws std::invalid_argument when a field is out of range.
    void validate() const;
    bool operator==(const CrfSettings&) const = default;
};

struct PipelineConfig {
    // Loss balance and optimizer.
    double lambda_balance = 1.0;
    int batch_size = 16;
    int crop_size = 320;
    double learning_rate = 16e-4;
    double weight_decay = 5e-4;
    double momentum = 0.9;
    int stage1_iters = 5000;
    int stage2_iters = 11000;
    double lr_drop_factor = 10.0;
    double lr_drop_at = 0.8;  // fraction of total iterations
    bool hflip = true;
    bool detach_branch = false;
    int checkpoint_every = 0;  // 0 disables periodic checkpoints

    // Inference.
    std::vector<double> inference_scales{0.75, 1.0, 1.25};
    bool crf_on_generation = false;
    bool crf_on_final = true;
    CrfSettings crf;

    // Mask filtering and resizing.
    double fg_min = 0.20;
    double fg_max = 0.80;
    int retrieved_max_dim = 340;
    int target_max_dim = 500;

    // Model.
    std::string backbone = "toy";
    int branch_head_convs = 1;

    // Pipeline sources and run control.
    std::vector<std::string> classes;  // empty means PASCAL VOC
    std::string retrieved_dir;
    std::string target_manifest;
    std::string eval_manifest;
    std::string mask_source = "oracle";
    int max_per_class = 1000;
    std::uint64_t seed = 0;
    int workers = 1;

    /// Throws std::invalid_argument naming the first violated constraint.
    void validate() const;
    bool operator==(const PipelineConfig&) const = default;
};

/// Parses `key = value` lines; '#' starts a comment. Unknown keys and malformed values throw
/// std::invalid_argument with the line number.
PipelineConfig parse_config(const std::string& text);
PipelineConfig load_config(const std::filesystem::path& path);
/// Serializes every field in declaration order; parse_config(format_config(c)) == c.
std::string format_config(const PipelineConfig& config);

/// Names of all recognised config keys, in serialization order.
std::vector<std::string> config_keys();

}  // namespace wss
