#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "wss/core/manifest.hpp"
#include "wss/core/types.hpp"
#include "wss/ingest/ingest.hpp"

namespace wss {

struct GroupMaskResult {
    std::string image_id;
    Mask binary_mask;  // 0 background, 1 foreground
    double fg_fraction = 0.0;
};

/// Exact ratio of foreground (non-zero) pixels to all pixels; 0 for an empty raster.
double foreground_fraction(const Mask& mask);

/// Keeps results with fg_min <= fg_fraction <= fg_max, in order.
/// Throws std::invalid_argument unless 0 <= fg_min < fg_max <= 1.
std::vector<GroupMaskResult> filter_by_foreground(const std::vector<GroupMaskResult>& results, double fg_min,
                                                  double fg_max);

/// Foreground becomes class_index, background 0. Throws for the background class or a negative index.
Mask binary_to_class_mask(const GroupMaskResult& result, int class_index);

/// Co-segmentation over a whole class group: one result per record, in record order.
class CosegmentationSource {
public:
    virtual ~CosegmentationSource() = default;
    virtual std::vector<GroupMaskResult> cosegment_group(const ClassGroup& group) const = 0;
};

/// Reads `<id>.mask.png` sidecars (0/255) from `<root>/<class name>/`, falling back to `<root>/`.
/// A sidecar whose size differs from the image is resized nearest-neighbour.
class OracleSource final : public CosegmentationSource {
public:
    OracleSource(std::filesystem::path root, ClassTaxonomy taxonomy);
    std::vector<GroupMaskResult> cosegment_group(const ClassGroup& group) const override;

private:
    std::filesystem::path root_;
    ClassTaxonomy taxonomy_;
};

struct ConsensusSettings {
    double prior_box = 0.6;  // side fraction of the centred seed box
    int rounds = 5;
    int bins = 32;            // per channel
    double smoothing = 1.0;   // pseudo-count added to every histogram bin
    bool largest_component = true;
    int workers = 1;

    void validate() const;
};

/// A deliberately simple stand-in for real co-segmentation: every image is seeded with a
/// centred box, then pixels are repeatedly reassigned to whichever of the group-pooled
/// foreground/background colour histograms explains them better. The final mask keeps the
/// largest 8-connected foreground component.
class ConsensusBaseline final : public CosegmentationSource {
public:
    explicit ConsensusBaseline(ConsensusSettings settings = {});
    std::vector<GroupMaskResult> cosegment_group(const ClassGroup& group) const override;

private:
    ConsensusSettings settings_;
};

struct CosegOutput {
    DatasetManifest kept;      // (image, class mask, query label) for every kept image
    std::string fractions_csv; // `image,class,fg_fraction,kept` for every image
    std::size_t total = 0;
};

/// Co-segments every class group of a retrieved corpus, applies the foreground filter and
/// writes class masks of the kept images to `<out_dir>/<class name>/<id>.png`.
CosegOutput cosegment_corpus(const DatasetManifest& corpus, const CosegmentationSource& source, double fg_min,
                             double fg_max, const ClassTaxonomy& taxonomy, const std::filesystem::path& out_dir);

/// "oracle" or "consensus".
std::unique_ptr<CosegmentationSource> make_mask_source(const std::string& kind, const std::filesystem::path& oracle_root,
                                                       const ClassTaxonomy& taxonomy, int workers = 1);

}  // namespace wss
