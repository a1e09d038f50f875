#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "wss/core/config.hpp"
#include "wss/core/manifest.hpp"
#include "wss/core/types.hpp"
#include "wss/eval/metrics.hpp"
#include "wss/model/network.hpp"

namespace wss {

/// Stage names in execution order.
inline const std::vector<std::string> kPipelineStages{"ingest", "coseg", "train-initial",
                                                      "genmasks", "train-final", "evaluate"};

struct StageRecord {
    std::string stage;
    std::filesystem::path path;
    std::string hash;
    bool operator==(const StageRecord&) const = default;
};

struct PipelineRunManifest {
    std::string run_id;  // digest of the config snapshot
    std::filesystem::path config_snapshot;
    std::uint64_t seed = 0;
    std::vector<StageRecord> stages;

    const StageRecord* find(const std::string& stage) const;
    bool operator==(const PipelineRunManifest&) const = default;
};

/// Text form: `run_id`, `config`, `seed` header lines, then one `stage <name> <path> <hash>`
/// line per completed stage (tab-separated).
std::string format_run_manifest(const PipelineRunManifest& manifest);
PipelineRunManifest parse_run_manifest(const std::string& text);

/// Taxonomy named by config.classes, or PASCAL VOC when the list is empty.
ClassTaxonomy taxonomy_from_config(const PipelineConfig& config);

/// Makes relative source paths (retrieved_dir, target_manifest, eval_manifest) absolute against `base`.
PipelineConfig resolve_config_paths(PipelineConfig config, const std::filesystem::path& base);

/// Intermediate cache root: $WSS_CACHE_DIR/<run_id> when the variable is set, else `<out>/cache`.
std::filesystem::path cache_root(const std::filesystem::path& out, const std::string& run_id);

/// Content hash of a stage output: the file digest, or for a manifest the digest of the manifest
/// together with every file it references.
std::string stage_output_hash(const std::filesystem::path& path, const ClassTaxonomy& taxonomy);

struct PipelineOptions {
    bool resume = true;
    std::function<void(const std::string&)> log;
};

/// Runs ingest -> coseg+filter -> train-initial -> genmasks -> train-final -> evaluate, writing
/// every intermediate to disk and recording it in `<out>/run_manifest.txt`. With resume on, a
/// stage is skipped while it and all stages before it are recorded with an unchanged hash
/// under the same config snapshot. A failing stage throws StageError naming it.
PipelineRunManifest run_pipeline(const PipelineConfig& config, const std::filesystem::path& out,
                                 const PipelineOptions& options = {});

class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string& what)
        : std::runtime_error("stage " + stage + " failed: " + what), stage_(std::move(stage)) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

/// Predicts full-resolution masks for every entry (no label constraint) and accumulates them
/// against the entries' ground-truth masks. Predictions are written to `pred_dir` when given.
ConfusionMatrix evaluate_model(const DatasetManifest& gt, const ClassTaxonomy& taxonomy, const NetworkParams& params,
                               const std::vector<double>& scales, const std::optional<CrfSettings>& crf, int workers,
                               const std::optional<std::filesystem::path>& pred_dir = std::nullopt);

struct AblationRow {
    std::string setting;
    double mean_iou = 0.0;
    std::vector<std::optional<double>> per_class;
};

/// The four settings: initial mask generator; simple final model (no multi-label branch);
/// final model with the multi-label branch; that model with multi-scale inference and CRF.
/// Reuses (or runs) the pipeline in `<out>/pipeline`, then trains the single-branch final
/// model on the same generated masks. The first three rows use single-scale inference.
std::vector<AblationRow> ablation_run(const PipelineConfig& config, const std::filesystem::path& out,
                                      const PipelineOptions& options = {});

/// `setting,mean_iou,<class names...>` CSV, one row per setting.
std::string format_ablation_table(const std::vector<AblationRow>& rows, const ClassTaxonomy& taxonomy);

}  // namespace wss
