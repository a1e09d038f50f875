#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "wss/core/config.hpp"
#include "wss/core/manifest.hpp"
#include "wss/core/types.hpp"

namespace wss {

struct FetchRequest {
    std::string query;  // a non-background class name
    int max_results = 1;
    std::filesystem::path destination;
};

/// Raw bytes of one candidate plus its optional ground-truth sidecar (`<id>.mask.png`).
struct FetchedItem {
    std::string name;  // file name to store under, e.g. "disk_00003.png"
    std::vector<std::uint8_t> bytes;
    std::optional<std::vector<std::uint8_t>> sidecar;
};

/// Source of candidate images for a class-name query.
class ImageFetcher {
public:
    virtual ~ImageFetcher() = default;
    /// Candidate identifiers in a deterministic order.
    virtual std::vector<std::string> candidates(const std::string& query) const = 0;
    /// Retrieves one candidate. Throws std::runtime_error on transport failure.
    virtual FetchedItem fetch(const std::string& candidate) const = 0;
};

/// Copies from a local folder: `<root>/<query>/` when it exists, else `<root>` itself.
/// Sidecar masks (`*.mask.png`) are never candidates but travel with their image.
class DirectoryFetcher final : public ImageFetcher {
public:
    explicit DirectoryFetcher(std::filesystem::path root);
    std::vector<std::string> candidates(const std::string& query) const override;
    FetchedItem fetch(const std::string& candidate) const override;

private:
    std::filesystem::path root_;
};

/// Reads a UTF-8 file with one URL per line (blank lines and '#' comments skipped).
/// Supports http:// (plain) and file:// URLs; anything else is a per-item transport error.
class UrlListFetcher final : public ImageFetcher {
public:
    explicit UrlListFetcher(std::filesystem::path list_file);
    std::vector<std::string> candidates(const std::string& query) const override;
    FetchedItem fetch(const std::string& candidate) const override;

private:
    std::filesystem::path list_file_;
};

struct FetchReport {
    std::vector<std::filesystem::path> files;  // stored images, in candidate order
    int warnings = 0;                          // undecodable files and transport failures
    std::vector<std::string> messages;
};

/// Stores up to max_results decodable images in request.destination. Transport failures and
/// corrupt files are counted and skipped. Throws std::invalid_argument on a bad request and
/// std::runtime_error when the destination is not writable.
FetchReport fetch_class_images(const FetchRequest& request, const ImageFetcher& fetcher,
                               const ClassTaxonomy& taxonomy);

/// Retrieved images sharing one query class.
struct ClassGroup {
    int class_index = 0;
    std::vector<ImageRecord> records;
};

/// Loads every image (sidecars excluded) in `dir`, ordered by id, at most `limit` of them.
ClassGroup load_class_group(const std::filesystem::path& dir, int class_index, int limit = -1);

/// Loads one group per non-background class from `<root>/<class name>/`; classes whose folder
/// is missing yield an empty group.
std::vector<ClassGroup> load_class_groups(const std::filesystem::path& root, const ClassTaxonomy& taxonomy,
                                          int limit_per_class = -1);

struct CorpusResult {
    DatasetManifest manifest;
    std::vector<std::string> warnings;
};

/// Resizes every record to config.retrieved_max_dim and writes it to
/// `<out_dir>/<class name>/<id>.png`. Entries carry the query class as the only label and are
/// ordered by class index, then id. Empty groups are dropped with a warning.
CorpusResult build_retrieved_corpus(const std::vector<ClassGroup>& groups, const PipelineConfig& config,
                                    const ClassTaxonomy& taxonomy, const std::filesystem::path& out_dir);

/// Regroups a corpus manifest (each entry has exactly one non-background label).
std::vector<ClassGroup> groups_from_manifest(const DatasetManifest& manifest, const ClassTaxonomy& taxonomy);

/// Resizes images (and masks, nearest-neighbour) to config.target_max_dim and writes them to
/// `<out_dir>/images/` and `<out_dir>/masks/`. Throws when an image and its mask disagree in shape.
DatasetManifest prepare_target_images(const DatasetManifest& manifest, const PipelineConfig& config,
                                      const std::filesystem::path& out_dir);

}  // namespace wss
