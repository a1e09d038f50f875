#include "wss/core/manifest.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "wss/core/image_io.hpp"

namespace wss {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto tab = line.find('\t', start);
        out.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
        if (tab == std::string::npos) break;
        start = tab + 1;
    }
    return out;
}

fs::path resolve(const fs::path& base, const std::string& text) {
    fs::path p(text);
    return (p.is_absolute() ? p : base / p).lexically_normal();
}

std::string relative_text(const fs::path& path, const fs::path& base) {
    if (!base.empty()) {
        const auto rel = path.lexically_relative(base);
        if (!rel.empty() && *rel.begin() != "..") return rel.generic_string();
    }
    return path.generic_string();
}

bool readable_file(const fs::path& p) {
    std::error_code ec;
    if (!fs::is_regular_file(p, ec)) return false;
    std::ifstream in(p, std::ios::binary);
    return static_cast<bool>(in);
}

}  // namespace

DatasetManifest parse_manifest(const std::string& text, const ClassTaxonomy& taxonomy, const fs::path& base_dir,
                               Split split) {
    DatasetManifest manifest;
    manifest.split = split;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_tabs(line);
        const auto where = "manifest line " + std::to_string(line_no) + ": ";
        if (fields.size() != 3) throw std::invalid_argument(where + "expected 3 tab-separated fields");
        if (fields[0].empty() || fields[0] == "-") throw std::invalid_argument(where + "missing image path");
        if (fields[1].empty() || fields[2].empty()) throw std::invalid_argument(where + "empty field (use '-')");
        ManifestEntry entry;
        entry.image = resolve(base_dir, fields[0]);
        if (fields[1] != "-") entry.mask = resolve(base_dir, fields[1]);
        if (fields[2] != "-") {
            std::vector<int> labels;
            std::stringstream ss(fields[2]);
            std::string name;
            while (std::getline(ss, name, ',')) {
                const auto idx = taxonomy.find(name);
                if (!idx) throw std::invalid_argument(where + "unknown class \"" + name + "\"");
                labels.push_back(*idx);
            }
            entry.labels = std::move(labels);
        }
        manifest.entries.push_back(std::move(entry));
    }
    return manifest;
}

DatasetManifest load_manifest(const fs::path& path, const ClassTaxonomy& taxonomy, Split split) {
    if (!fs::exists(path)) throw std::runtime_error("manifest not found: " + path.string());
    const auto base = fs::absolute(path).parent_path();
    auto manifest = parse_manifest(read_text_file(path), taxonomy, base, split);
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
        const auto& e = manifest.entries[i];
        if (!readable_file(e.image))
            throw std::runtime_error("manifest entry " + std::to_string(i + 1) + ": unreadable image " + e.image.string());
        if (e.mask && !readable_file(*e.mask))
            throw std::runtime_error("manifest entry " + std::to_string(i + 1) + ": unreadable mask " + e.mask->string());
    }
    return manifest;
}

std::string format_manifest(const DatasetManifest& manifest, const ClassTaxonomy& taxonomy, const fs::path& base_dir) {
    std::string out;
    for (const auto& e : manifest.entries) {
        out += relative_text(e.image, base_dir);
        out += '\t';
        out += e.mask ? relative_text(*e.mask, base_dir) : std::string("-");
        out += '\t';
        if (e.labels && !e.labels->empty()) {
            for (std::size_t i = 0; i < e.labels->size(); ++i) {
                if (i) out += ',';
                out += taxonomy.name((*e.labels)[i]);
            }
        } else {
            out += '-';
        }
        out += '\n';
    }
    return out;
}

void write_manifest(const fs::path& path, const DatasetManifest& manifest, const ClassTaxonomy& taxonomy) {
    const auto base = fs::absolute(path).parent_path();
    write_text_file(path, format_manifest(manifest, taxonomy, base));
}

LabelVector entry_labels(const ManifestEntry& entry, int num_classes) {
    if (!entry.labels) return LabelVector::all(num_classes);
    return LabelVector::from_indices(num_classes, *entry.labels);
}

std::string_view split_name(Split split) {
    switch (split) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "train";
}

}  // namespace wss
