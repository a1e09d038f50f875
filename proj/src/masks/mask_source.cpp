#include "wss/masks/mask_source.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <opencv2/imgproc.hpp>
#include <stdexcept>

#include "wss/core/geometry.hpp"
#include "wss/core/image_io.hpp"
#include "wss/core/parallel.hpp"

namespace wss {

namespace fs = std::filesystem;

double foreground_fraction(const Mask& mask) {
    const auto n = mask.labels.data.size();
    if (n == 0) return 0.0;
    const auto fg = std::count_if(mask.labels.data.begin(), mask.labels.data.end(), [](std::uint8_t v) { return v != 0; });
    return static_cast<double>(fg) / static_cast<double>(n);
}

std::vector<GroupMaskResult> filter_by_foreground(const std::vector<GroupMaskResult>& results, double fg_min,
                                                  double fg_max) {
    if (!(fg_min >= 0.0 && fg_min < fg_max && fg_max <= 1.0))
        throw std::invalid_argument("foreground bounds must satisfy 0 <= fg_min < fg_max <= 1");
    std::vector<GroupMaskResult> kept;
    for (const auto& r : results)
        if (r.fg_fraction >= fg_min && r.fg_fraction <= fg_max) kept.push_back(r);
    return kept;
}

Mask binary_to_class_mask(const GroupMaskResult& result, int class_index) {
    if (class_index <= ClassTaxonomy::kBackground || class_index >= kIgnoreLabel)
        throw std::invalid_argument("binary_to_class_mask needs a foreground class index");
    Mask out(result.binary_mask.height(), result.binary_mask.width(), 0);
    for (std::size_t i = 0; i < out.labels.data.size(); ++i)
        if (result.binary_mask.labels.data[i]) out.labels.data[i] = static_cast<std::uint8_t>(class_index);
    return out;
}

namespace {

GroupMaskResult make_result(std::string id, Mask binary) {
    GroupMaskResult r{std::move(id), std::move(binary), 0.0};
    r.fg_fraction = foreground_fraction(r.binary_mask);
    return r;
}

void require_nonempty(const ClassGroup& group) {
    if (group.records.empty()) throw std::invalid_argument("cannot co-segment an empty group");
}

}  // namespace

OracleSource::OracleSource(fs::path root, ClassTaxonomy taxonomy)
    : root_(std::move(root)), taxonomy_(std::move(taxonomy)) {}

std::vector<GroupMaskResult> OracleSource::cosegment_group(const ClassGroup& group) const {
    require_nonempty(group);
    std::vector<GroupMaskResult> out;
    out.reserve(group.records.size());
    for (const auto& rec : group.records) {
        const auto name = rec.id + ".mask.png";
        auto path = root_ / taxonomy_.name(group.class_index) / name;
        if (!fs::is_regular_file(path)) path = root_ / name;
        if (!fs::is_regular_file(path)) throw std::runtime_error("missing sidecar mask for " + rec.id);
        auto sidecar = read_mask(path);
        if (sidecar.height() != rec.height() || sidecar.width() != rec.width())
            sidecar = resize_nearest(sidecar, rec.height(), rec.width());
        for (auto& v : sidecar.labels.data) v = v >= 128 ? 1 : 0;
        out.push_back(make_result(rec.id, std::move(sidecar)));
    }
    return out;
}

void ConsensusSettings::validate() const {
    if (!(prior_box > 0.0 && prior_box <= 1.0)) throw std::invalid_argument("consensus prior_box must be in (0, 1]");
    if (rounds < 0) throw std::invalid_argument("consensus rounds must be >= 0");
    if (bins < 1 || bins > 256) throw std::invalid_argument("consensus bins must be in [1, 256]");
    if (!(smoothing > 0.0)) throw std::invalid_argument("consensus smoothing must be positive");
}

ConsensusBaseline::ConsensusBaseline(ConsensusSettings settings) : settings_(settings) { settings_.validate(); }

std::vector<GroupMaskResult> ConsensusBaseline::cosegment_group(const ClassGroup& group) const {
    require_nonempty(group);
    const int bins = settings_.bins;
    const auto nbins = static_cast<std::size_t>(bins) * static_cast<std::size_t>(bins) * static_cast<std::size_t>(bins);
    const std::size_t n = group.records.size();

    // Colour bin per pixel, computed once.
    std::vector<std::vector<std::uint32_t>> bin_of(n);
    std::vector<Mask> masks(n);
    parallel_for(n, settings_.workers, [&](std::size_t i) {
        const auto& img = group.records[i].pixels;
        auto& b = bin_of[i];
        b.resize(img.pixel_count());
        for (std::size_t p = 0; p < b.size(); ++p) {
            std::uint32_t idx = 0;
            for (std::size_t c = 0; c < 3; ++c) idx = idx * static_cast<std::uint32_t>(bins) + img.data[p * 3 + c] * static_cast<std::uint32_t>(bins) / 256U;
            b[p] = idx;
        }
        const int h = img.height, w = img.width;
        const double margin = (1.0 - settings_.prior_box) / 2.0;
        const int y0 = static_cast<int>(std::floor(margin * h)), y1 = static_cast<int>(std::ceil((1.0 - margin) * h));
        const int x0 = static_cast<int>(std::floor(margin * w)), x1 = static_cast<int>(std::ceil((1.0 - margin) * w));
        masks[i] = Mask(h, w, 0);
        for (int y = y0; y < y1; ++y)
            for (int x = x0; x < x1; ++x) masks[i].at(y, x) = 1;
    });

    std::vector<double> fg_hist(nbins), bg_hist(nbins);
    for (int round = 0; round < settings_.rounds; ++round) {
        std::fill(fg_hist.begin(), fg_hist.end(), 0.0);
        std::fill(bg_hist.begin(), bg_hist.end(), 0.0);
        double fg_total = 0, bg_total = 0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t p = 0; p < bin_of[i].size(); ++p) {
                if (masks[i].labels.data[p]) {
                    fg_hist[bin_of[i][p]] += 1;
                    fg_total += 1;
                } else {
                    bg_hist[bin_of[i][p]] += 1;
                    bg_total += 1;
                }
            }
        const double a = settings_.smoothing;
        const double fg_norm = fg_total + a * static_cast<double>(nbins);
        const double bg_norm = bg_total + a * static_cast<double>(nbins);
        parallel_for(n, settings_.workers, [&](std::size_t i) {
            for (std::size_t p = 0; p < bin_of[i].size(); ++p) {
                const auto b = bin_of[i][p];
                masks[i].labels.data[p] = (fg_hist[b] + a) / fg_norm > (bg_hist[b] + a) / bg_norm ? 1 : 0;
            }
        });
    }

    std::vector<GroupMaskResult> out(n);
    parallel_for(n, settings_.workers, [&](std::size_t i) {
        auto& m = masks[i];
        if (settings_.largest_component) {
            cv::Mat bin(m.height(), m.width(), CV_8UC1, m.labels.data.data());
            cv::Mat labels, stats, centroids;
            const int count = cv::connectedComponentsWithStats(bin, labels, stats, centroids, 8, CV_32S);
            int best = 0, best_area = 0;
            for (int k = 1; k < count; ++k) {
                const int area = stats.at<int>(k, cv::CC_STAT_AREA);
                if (area > best_area) {
                    best = k;
                    best_area = area;
                }
            }
            for (int y = 0; y < m.height(); ++y)
                for (int x = 0; x < m.width(); ++x) m.at(y, x) = best > 0 && labels.at<int>(y, x) == best ? 1 : 0;
        }
        out[i] = make_result(group.records[i].id, std::move(m));
    });
    return out;
}

CosegOutput cosegment_corpus(const DatasetManifest& corpus, const CosegmentationSource& source, double fg_min,
                             double fg_max, const ClassTaxonomy& taxonomy, const fs::path& out_dir) {
    CosegOutput out;
    std::ostringstream fractions;
    fractions << "image,class,fg_fraction,kept\n";
    std::map<std::string, fs::path> image_paths;
    for (const auto& e : corpus.entries) image_paths[e.image.stem().string()] = e.image;
    for (const auto& group : groups_from_manifest(corpus, taxonomy)) {
        const auto results = source.cosegment_group(group);
        const auto kept = filter_by_foreground(results, fg_min, fg_max);
        const auto dir = out_dir / taxonomy.name(group.class_index);
        fs::create_directories(dir);
        std::size_t k = 0;
        for (const auto& r : results) {
            const bool keep = k < kept.size() && kept[k].image_id == r.image_id;
            char frac[32];
            std::snprintf(frac, sizeof frac, "%.6f", r.fg_fraction);
            fractions << r.image_id << ',' << taxonomy.name(group.class_index) << ',' << frac << ',' << (keep ? 1 : 0)
                      << '\n';
            if (!keep) continue;
            ++k;
            const auto mask_path = fs::absolute(dir / (r.image_id + ".png")).lexically_normal();
            write_mask(mask_path, binary_to_class_mask(r, group.class_index));
            out.kept.entries.push_back({image_paths.at(r.image_id), mask_path, std::vector<int>{group.class_index}});
        }
        out.total += results.size();
    }
    out.fractions_csv = fractions.str();
    return out;
}

std::unique_ptr<CosegmentationSource> make_mask_source(const std::string& kind, const fs::path& oracle_root,
                                                       const ClassTaxonomy& taxonomy, int workers) {
    if (kind == "oracle") return std::make_unique<OracleSource>(oracle_root, taxonomy);
    if (kind == "consensus") {
        ConsensusSettings s;
        s.workers = workers;
        return std::make_unique<ConsensusBaseline>(s);
    }
    throw std::invalid_argument("unknown mask source \"" + kind + "\" (expected oracle or consensus)");
}

}  // namespace wss
