#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "wss/core/types.hpp"

namespace wss {

enum class Split { train, val, test };

struct ManifestEntry {
    std::filesystem::path image;
    std::optional<std::filesystem::path> mask;
    std::optional<std::vector<int>> labels;  // class indices, in file order

    bool operator==(const ManifestEntry&) const = default;
};

/// Tab-separated list of (image, mask, labels) records. Paths are held absolute once loaded.
struct DatasetManifest {
    Split split = Split::train;
    std::vector<ManifestEntry> entries;

    bool operator==(const DatasetManifest&) const = default;
};

/// Parses manifest text. Relative paths resolve against `base_dir`. Throws std::invalid_argument on a
/// malformed line (message carries the 1-based line number) or an unknown class name.
DatasetManifest parse_manifest(const std::string& text, const ClassTaxonomy& taxonomy,
                               const std::filesystem::path& base_dir, Split split = Split::train);

/// Reads and validates a manifest file; every referenced path must be a readable file.
DatasetManifest load_manifest(const std::filesystem::path& path, const ClassTaxonomy& taxonomy,
                              Split split = Split::train);

/// Formats entries with paths relative to `base_dir` when they live below it.
std::string format_manifest(const DatasetManifest& manifest, const ClassTaxonomy& taxonomy,
                            const std::filesystem::path& base_dir);

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest,
                    const ClassTaxonomy& taxonomy);

/// Label vector built from an entry's label list; background is always present.
LabelVector entry_labels(const ManifestEntry& entry, int num_classes);

std::string_view split_name(Split split);

}  // namespace wss
