#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "wss/core/types.hpp"

namespace wss {

/// Dense float tensor with an explicit shape; values are row-major.
struct Tensor {
    std::vector<int> shape;
    std::vector<float> values;

    Tensor() = default;
    explicit Tensor(std::vector<int> s, float fill = 0.0f);

    std::size_t numel() const;
    bool operator==(const Tensor&) const = default;
};

/// Named tensors in deterministic (lexicographic) order.
using TensorSet = std::map<std::string, Tensor>;

enum class BackboneKind { toy, dilated_resnet_contract };

/// Architecture descriptor; `id()` round-trips through `parse`.
struct ArchitectureSpec {
    BackboneKind kind = BackboneKind::toy;
    int num_classes = 2;
    bool dual_branch = false;
    int branch_head_convs = 1;
    std::array<int, 6> widths{16, 32, 64, 64, 64, 64};

    std::string id() const;
    static ArchitectureSpec parse(const std::string& id);
    /// Names and shapes of every trainable tensor, in TensorSet order.
    std::vector<std::pair<std::string, std::vector<int>>> tensor_shapes() const;
    bool operator==(const ArchitectureSpec&) const = default;
};

/// Network parameters (theta) plus the input normalisation they were trained with.
struct NetworkParams {
    std::string architecture_id;
    TensorSet tensors;
    std::array<float, 3> input_mean{127.5f, 127.5f, 127.5f};

    ArchitectureSpec architecture() const { return ArchitectureSpec::parse(architecture_id); }
    std::size_t parameter_count() const;
    /// False for contract-only architectures whose weights were never supplied.
    bool materialized() const;
    bool operator==(const NetworkParams&) const = default;
};

struct MultiLabelScores {
    std::vector<double> p;  // one logit per class, background included
};

enum class PaddingMode { zeros, wrap };

struct ForwardOptions {
    PaddingMode padding = PaddingMode::zeros;
};

/// Smallest accepted input side.
inline constexpr int kMinInputSize = 8;
inline constexpr int kOutputStride = 8;
/// Inputs are fed as (pixel - mean) * kInputScale.
inline constexpr float kInputScale = 1.0f / 64.0f;

/// Builds and initialises a backbone. The toy network is six 3x3 conv blocks: a stride-2 stem,
/// two stride-2 downsampling blocks, one plain block and two dilation-2 blocks, then a 1x1
/// classifier (output stride 8). He fan-in initialisation with per-tensor seeds, so the trunk
/// of a single- and a dual-branch network built from one seed are identical.
/// The dilated-resnet-contract kind only declares the architecture; its tensors stay empty
/// until weights are loaded from a checkpoint.
NetworkParams build_backbone(BackboneKind kind, int num_classes, bool dual_branch, std::uint64_t rng_seed,
                             int branch_head_convs = 1);

/// Dense logits at ceil(H/8) x ceil(W/8) x C.
ScoreMap forward_segmentation(const ImageRecord& image, const NetworkParams& params, const ForwardOptions& options = {});
ScoreMap forward_segmentation(const RgbImage& image, const NetworkParams& params, const ForwardOptions& options = {});

/// Multi-label branch: forks after the second downsampling block, runs its private head
/// convolutions, global-average-pools and applies a linear layer. Throws std::logic_error for
/// single-branch architectures.
MultiLabelScores forward_multilabel(const ImageRecord& image, const NetworkParams& params,
                                    const ForwardOptions& options = {});

/// Everything a backward pass needs from one forward pass over a single image.
struct ForwardCache;

struct TrainingForward {
    ScoreMap logits;
    std::optional<MultiLabelScores> multilabel;
    std::shared_ptr<ForwardCache> cache;
};

TrainingForward forward_train(const RgbImage& image, const NetworkParams& params, bool with_branch,
                              const ForwardOptions& options = {});

/// Accumulates parameter gradients into `grads` (created on demand with zero values).
/// `dmultilabel` may be null. With `detach_branch`, the branch does not propagate into
/// the shared trunk layers.
void backward(const TrainingForward& pass, const NetworkParams& params, const ScoreMap& dlogits,
              const std::vector<double>* dmultilabel, bool detach_branch, TensorSet& grads);

/// Zero-filled tensors matching every trainable parameter.
TensorSet zeros_like(const TensorSet& tensors);

}  // namespace wss
