#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "wss/core/config.hpp"
#include "wss/core/manifest.hpp"
#include "wss/model/network.hpp"
#include "wss/train/losses.hpp"

namespace wss {

enum class TrainStage { initial, final };

/// One in-memory training example. Labels are only consulted by the final stage.
struct TrainingSample {
    ImageRecord image;
    Mask mask;
    LabelVector labels;
};

struct TrainLogRow {
    int iteration = 0;
    double seg_loss = 0.0;         // per-image mean over the batch
    double multilabel_loss = 0.0;  // per-image mean over the batch
    double combined = 0.0;         // per-image mean over the batch
    double lr = 0.0;
};

struct TrainResult {
    NetworkParams params;
    std::vector<TrainLogRow> log;
};

struct TrainOptions {
    /// Overrides the stage's iteration count from the config.
    std::optional<int> iterations;
    /// Final stage only: train the multi-label branch. false gives the single-branch model
    /// trained with the segmentation loss alone.
    bool use_branch = true;
    /// Starting point instead of a freshly initialised backbone.
    std::optional<NetworkParams> init;
    std::optional<std::filesystem::path> checkpoint_dir;
};

/// Iteration at which the learning rate drops (floor(lr_drop_at * total)).
int lr_drop_iteration(int total_iterations, const PipelineConfig& config);
double learning_rate_at(int iteration, int total_iterations, const PipelineConfig& config);

/// Loads manifest entries into memory. Initial stage needs masks; final needs masks and labels.
std::vector<TrainingSample> load_training_samples(const DatasetManifest& manifest, const ClassTaxonomy& taxonomy,
                                                  TrainStage stage);

/// Momentum SGD over random crops (plus horizontal flips when enabled). Each iteration draws
/// batch_size samples from a per-epoch shuffle and sums the per-image losses. Per-sample work
/// runs on config.workers threads; results are reduced in sample order so the outcome does not
/// depend on the worker count.
TrainResult train_samples(const std::vector<TrainingSample>& samples, int num_classes, const PipelineConfig& config,
                          TrainStage stage, std::uint64_t rng_seed, const TrainOptions& options = {});

TrainResult train_stage(const DatasetManifest& manifest, const ClassTaxonomy& taxonomy, const PipelineConfig& config,
                        TrainStage stage, std::uint64_t rng_seed, const TrainOptions& options = {});

/// CSV with header `iteration,seg_loss,multilabel_loss,combined,lr`.
void write_training_log(const std::filesystem::path& path, const std::vector<TrainLogRow>& log);

/// Mean segmentation loss of full (uncropped) images under `params`.
double evaluate_seg_loss(const std::vector<TrainingSample>& samples, const NetworkParams& params);

}  // namespace wss
