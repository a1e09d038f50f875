#include "wss/ingest/ingest.hpp"

#include <httplib.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <opencv2/imgcodecs.hpp>
#include <sstream>
#include <stdexcept>

#include "wss/core/geometry.hpp"
#include "wss/core/image_io.hpp"
#include "wss/core/parallel.hpp"

namespace wss {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kSidecarSuffix = ".mask.png";

bool is_sidecar(const fs::path& p) {
    const auto name = p.filename().string();
    return name.size() > kSidecarSuffix.size() && name.ends_with(kSidecarSuffix);
}

bool is_image_file(const fs::path& p) {
    if (is_sidecar(p)) return false;
    auto ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp" || ext == ".ppm" || ext == ".tif" ||
           ext == ".tiff" || ext == ".webp";
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

bool decodable(const std::vector<std::uint8_t>& bytes) {
    if (bytes.empty()) return false;
    const cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
    return !cv::imdecode(buf, cv::IMREAD_COLOR).empty();
}

std::vector<fs::path> sorted_images(const fs::path& dir) {
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && is_image_file(e.path())) out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

fs::path sidecar_for(const fs::path& image) {
    return image.parent_path() / (image.stem().string() + std::string(kSidecarSuffix));
}

/// Last path segment when it looks like an image file name, else empty.
std::string url_file_name(const std::string& url) {
    auto name = url.substr(url.find_last_of('/') + 1);
    if (const auto q = name.find_first_of("?#"); q != std::string::npos) name.erase(q);
    return is_image_file(name) ? name : std::string();
}

}  // namespace

DirectoryFetcher::DirectoryFetcher(fs::path root) : root_(std::move(root)) {
    if (!fs::is_directory(root_)) throw std::invalid_argument("fetcher source is not a directory: " + root_.string());
}

std::vector<std::string> DirectoryFetcher::candidates(const std::string& query) const {
    const auto dir = fs::is_directory(root_ / query) ? root_ / query : root_;
    std::vector<std::string> out;
    for (const auto& p : sorted_images(dir)) out.push_back(p.string());
    return out;
}

FetchedItem DirectoryFetcher::fetch(const std::string& candidate) const {
    const fs::path path(candidate);
    FetchedItem item{path.filename().string(), read_bytes(path), std::nullopt};
    if (const auto side = sidecar_for(path); fs::is_regular_file(side)) item.sidecar = read_bytes(side);
    return item;
}

UrlListFetcher::UrlListFetcher(fs::path list_file) : list_file_(std::move(list_file)) {
    if (!fs::is_regular_file(list_file_)) throw std::invalid_argument("URL list not found: " + list_file_.string());
}

std::vector<std::string> UrlListFetcher::candidates(const std::string&) const {
    std::istringstream in(read_text_file(list_file_));
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        line.erase(0, line.find_first_not_of(" \t\r"));
        line.erase(line.find_last_not_of(" \t\r") + 1);
        if (!line.empty() && line[0] != '#') out.push_back(line);
    }
    return out;
}

FetchedItem UrlListFetcher::fetch(const std::string& candidate) const {
    static constexpr std::string_view kFile = "file://", kHttp = "http://";
    if (candidate.starts_with(kFile)) {
        const fs::path path(candidate.substr(kFile.size()));
        return {path.filename().string(), read_bytes(path), std::nullopt};
    }
    if (!candidate.starts_with(kHttp)) throw std::runtime_error("unsupported URL scheme: " + candidate);
    const auto rest = candidate.substr(kHttp.size());
    const auto slash = rest.find('/');
    const auto host = rest.substr(0, slash);
    const auto target = slash == std::string::npos ? std::string("/") : rest.substr(slash);
    httplib::Client client("http://" + host);
    client.set_connection_timeout(10);
    client.set_read_timeout(30);
    client.set_follow_location(true);
    const auto res = client.Get(target);
    if (!res) throw std::runtime_error("transport error for " + candidate + ": " + httplib::to_string(res.error()));
    if (res->status != 200) throw std::runtime_error("HTTP " + std::to_string(res->status) + " for " + candidate);
    return {url_file_name(candidate), std::vector<std::uint8_t>(res->body.begin(), res->body.end()), std::nullopt};
}

FetchReport fetch_class_images(const FetchRequest& request, const ImageFetcher& fetcher,
                               const ClassTaxonomy& taxonomy) {
    if (request.max_results < 1) throw std::invalid_argument("max_results must be >= 1");
    if (taxonomy.index_of(request.query) == ClassTaxonomy::kBackground)
        throw std::invalid_argument("query must be a foreground class");
    std::error_code ec;
    fs::create_directories(request.destination, ec);
    const auto probe = request.destination / ".write_probe";
    {
        std::ofstream out(probe);
        if (!out) throw std::runtime_error("destination not writable: " + request.destination.string());
    }
    fs::remove(probe, ec);

    FetchReport report;
    const auto names = fetcher.candidates(request.query);
    for (std::size_t i = 0; i < names.size() && static_cast<int>(report.files.size()) < request.max_results; ++i) {
        FetchedItem item;
        try {
            item = fetcher.fetch(names[i]);
        } catch (const std::exception& e) {
            ++report.warnings;
            report.messages.push_back(e.what());
            continue;
        }
        if (!decodable(item.bytes)) {
            ++report.warnings;
            report.messages.push_back("undecodable image skipped: " + names[i]);
            continue;
        }
        const auto dest = request.destination / (item.name.empty() ? "item_" + std::to_string(i) + ".png" : item.name);
        write_bytes(dest, item.bytes);
        if (item.sidecar) write_bytes(sidecar_for(dest), *item.sidecar);
        report.files.push_back(dest);
    }
    return report;
}

ClassGroup load_class_group(const fs::path& dir, int class_index, int limit) {
    ClassGroup group{class_index, {}};
    for (const auto& p : sorted_images(dir)) {
        if (limit >= 0 && static_cast<int>(group.records.size()) >= limit) break;
        auto rec = load_record(p, ImageSource::retrieved);
        rec.query_class = class_index;
        group.records.push_back(std::move(rec));
    }
    return group;
}

std::vector<ClassGroup> load_class_groups(const fs::path& root, const ClassTaxonomy& taxonomy, int limit_per_class) {
    std::vector<ClassGroup> groups;
    for (int c = 1; c < taxonomy.size(); ++c) {
        const auto dir = root / taxonomy.name(c);
        groups.push_back(fs::is_directory(dir) ? load_class_group(dir, c, limit_per_class) : ClassGroup{c, {}});
    }
    return groups;
}

CorpusResult build_retrieved_corpus(const std::vector<ClassGroup>& groups, const PipelineConfig& config,
                                    const ClassTaxonomy& taxonomy, const fs::path& out_dir) {
    std::vector<const ClassGroup*> ordered;
    CorpusResult result;
    for (const auto& g : groups) {
        if (g.class_index <= ClassTaxonomy::kBackground || g.class_index >= taxonomy.size())
            throw std::invalid_argument("class group has invalid class index " + std::to_string(g.class_index));
        if (g.records.empty()) {
            result.warnings.push_back("empty group dropped: " + taxonomy.name(g.class_index));
            continue;
        }
        ordered.push_back(&g);
    }
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const ClassGroup* a, const ClassGroup* b) { return a->class_index < b->class_index; });

    for (const auto* g : ordered) {
        std::vector<const ImageRecord*> recs;
        for (const auto& r : g->records) recs.push_back(&r);
        std::stable_sort(recs.begin(), recs.end(), [](const ImageRecord* a, const ImageRecord* b) { return a->id < b->id; });
        const auto dir = out_dir / taxonomy.name(g->class_index);
        fs::create_directories(dir);
        std::vector<ManifestEntry> entries(recs.size());
        parallel_for(recs.size(), config.workers, [&](std::size_t i) {
            const auto resized = resize_max_dim(*recs[i], config.retrieved_max_dim);
            const auto path = fs::absolute(dir / (recs[i]->id + ".png")).lexically_normal();
            write_image(path, resized.image.pixels);
            entries[i] = {path, std::nullopt, std::vector<int>{g->class_index}};
        });
        for (auto& e : entries) result.manifest.entries.push_back(std::move(e));
    }
    return result;
}

std::vector<ClassGroup> groups_from_manifest(const DatasetManifest& manifest, const ClassTaxonomy& taxonomy) {
    std::map<int, ClassGroup> by_class;
    for (const auto& e : manifest.entries) {
        if (!e.labels || e.labels->size() != 1 || (*e.labels)[0] == ClassTaxonomy::kBackground)
            throw std::invalid_argument("corpus entry needs exactly one foreground label: " + e.image.string());
        const int c = (*e.labels)[0];
        if (c >= taxonomy.size()) throw std::invalid_argument("corpus label out of range: " + e.image.string());
        auto& g = by_class[c];
        g.class_index = c;
        auto rec = load_record(e.image, ImageSource::retrieved);
        rec.query_class = c;
        g.records.push_back(std::move(rec));
    }
    std::vector<ClassGroup> out;
    for (auto& [c, g] : by_class) out.push_back(std::move(g));
    return out;
}

DatasetManifest prepare_target_images(const DatasetManifest& manifest, const PipelineConfig& config,
                                      const fs::path& out_dir) {
    DatasetManifest out{manifest.split, std::vector<ManifestEntry>(manifest.entries.size())};
    fs::create_directories(out_dir / "images");
    if (std::any_of(manifest.entries.begin(), manifest.entries.end(), [](const ManifestEntry& e) { return e.mask.has_value(); }))
        fs::create_directories(out_dir / "masks");
    std::map<std::string, std::size_t> stems;
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
        const auto stem = manifest.entries[i].image.stem().string();
        if (!stems.emplace(stem, i).second) throw std::invalid_argument("duplicate image name in manifest: " + stem);
    }
    parallel_for(manifest.entries.size(), config.workers, [&](std::size_t i) {
        const auto& e = manifest.entries[i];
        const auto rec = load_record(e.image, ImageSource::target);
        std::optional<Mask> mask;
        if (e.mask) {
            mask = read_mask(*e.mask);
            if (mask->height() != rec.height() || mask->width() != rec.width())
                throw std::invalid_argument("image/mask shape mismatch: " + e.image.string());
        }
        const auto resized = resize_max_dim(rec, config.target_max_dim, mask);
        auto& dst = out.entries[i];
        dst.image = fs::absolute(out_dir / "images" / (rec.id + ".png")).lexically_normal();
        write_image(dst.image, resized.image.pixels);
        if (resized.mask) {
            dst.mask = fs::absolute(out_dir / "masks" / (rec.id + ".png")).lexically_normal();
            write_mask(*dst.mask, *resized.mask);
        }
        dst.labels = e.labels;
    });
    return out;
}

}  // namespace wss
