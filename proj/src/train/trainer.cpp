#include "wss/train/trainer.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "wss/core/geometry.hpp"
#include "wss/core/image_io.hpp"
#include "wss/core/parallel.hpp"
#include "wss/core/random.hpp"
#include "wss/model/checkpoint.hpp"
#include "wss/train/sgd.hpp"

namespace wss {

int lr_drop_iteration(int total_iterations, const PipelineConfig& config) {
    return static_cast<int>(std::floor(config.lr_drop_at * total_iterations));
}

double learning_rate_at(int iteration, int total_iterations, const PipelineConfig& config) {
    return iteration < lr_drop_iteration(total_iterations, config) ? config.learning_rate
                                                                   : config.learning_rate / config.lr_drop_factor;
}

std::vector<TrainingSample> load_training_samples(const DatasetManifest& manifest, const ClassTaxonomy& taxonomy,
                                                  TrainStage stage) {
    std::vector<TrainingSample> samples;
    samples.reserve(manifest.entries.size());
    for (const auto& e : manifest.entries) {
        if (!e.mask) throw std::invalid_argument("training entry without mask: " + e.image.string());
        if (stage == TrainStage::final && !e.labels)
            throw std::invalid_argument("final-stage entry without image-level labels: " + e.image.string());
        TrainingSample s;
        s.image = load_record(e.image, ImageSource::target);
        s.mask = read_mask(*e.mask);
        if (s.mask.height() != s.image.height() || s.mask.width() != s.image.width())
            throw std::invalid_argument("image/mask shape mismatch: " + e.image.string());
        validate(s.mask, taxonomy.size());
        s.labels = entry_labels(e, taxonomy.size());
        samples.push_back(std::move(s));
    }
    return samples;
}

namespace {

struct SampleOutcome {
    LossReport report;
    TensorSet grads;
    bool used = false;
};

/// Sample order for the whole run: concatenated per-epoch shuffles.
class EpochSampler {
public:
    EpochSampler(std::size_t n, std::uint64_t seed) : order_(n), seed_(seed) { reshuffle(); }

    std::size_t next() {
        if (pos_ == order_.size()) {
            ++epoch_;
            reshuffle();
        }
        return order_[pos_++];
    }

private:
    void reshuffle() {
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        Rng rng(derive_seed(seed_, static_cast<std::uint64_t>(epoch_)));
        for (std::size_t i = order_.size(); i > 1; --i)
            std::swap(order_[i - 1], order_[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(i) - 1))]);
        pos_ = 0;
    }

    std::vector<std::size_t> order_;
    std::uint64_t seed_;
    std::size_t pos_ = 0;
    std::size_t epoch_ = 0;
};

}  // namespace

TrainResult train_samples(const std::vector<TrainingSample>& samples, int num_classes, const PipelineConfig& config,
                          TrainStage stage, std::uint64_t rng_seed, const TrainOptions& options) {
    config.validate();
    if (samples.empty()) throw std::invalid_argument("training set is empty");
    const bool with_branch = stage == TrainStage::final && options.use_branch;
    const int total = options.iterations.value_or(stage == TrainStage::initial ? config.stage1_iters : config.stage2_iters);

    TrainResult result;
    if (options.init) {
        result.params = *options.init;
    } else {
        result.params = build_backbone(BackboneKind::toy, num_classes, with_branch, derive_seed(rng_seed, "init"),
                                       config.branch_head_convs);
        std::vector<const RgbImage*> images;
        for (const auto& s : samples) images.push_back(&s.image.pixels);
        const auto mean = channel_mean(images);
        for (std::size_t c = 0; c < 3; ++c) result.params.input_mean[c] = static_cast<float>(mean[c]);
    }
    auto& params = result.params;
    const auto spec = params.architecture();
    if (spec.num_classes != num_classes) throw std::invalid_argument("initial parameters have the wrong class count");
    if (with_branch && !spec.dual_branch) throw std::invalid_argument("final stage needs a dual-branch architecture");

    std::array<std::uint8_t, 3> pad{};
    for (std::size_t c = 0; c < 3; ++c)
        pad[c] = static_cast<std::uint8_t>(std::lround(std::clamp(params.input_mean[c], 0.0f, 255.0f)));

    const auto batch = static_cast<std::size_t>(config.batch_size);
    EpochSampler sampler(samples.size(), derive_seed(rng_seed, "shuffle"));
    std::vector<SampleOutcome> outcomes(batch);
    for (auto& o : outcomes) o.grads = zeros_like(params.tensors);
    TensorSet total_grads = zeros_like(params.tensors);
    TensorSet velocity = zeros_like(params.tensors);
    std::vector<std::size_t> picks(batch);
    const double lambda = with_branch ? config.lambda_balance : 0.0;

    result.log.reserve(static_cast<std::size_t>(total));
    for (int it = 0; it < total; ++it) {
        for (auto& p : picks) p = sampler.next();
        parallel_for(batch, config.workers, [&](std::size_t k) {
            auto& out = outcomes[k];
            for (auto& [name, t] : out.grads) std::fill(t.values.begin(), t.values.end(), 0.0f);
            out.used = false;
            out.report = {};
            const auto& sample = samples[picks[k]];
            const auto sample_seed = derive_seed(rng_seed, static_cast<std::uint64_t>(it) * batch + k);
            auto crop = random_crop_pair(sample.image, sample.mask, config.crop_size, derive_seed(sample_seed, 1), pad);
            if (config.hflip && (Rng(derive_seed(sample_seed, 2))() & 1U)) {
                crop.image.pixels = hflip(crop.image.pixels);
                crop.mask = hflip(crop.mask);
            }
            auto pass = forward_train(crop.image.pixels, params, with_branch);
            const auto target = downsample_mask(crop.mask, pass.logits.height, pass.logits.width);
            if (std::all_of(target.labels.data.begin(), target.labels.data.end(),
                            [](std::uint8_t v) { return v == kIgnoreLabel; }))
                return;
            const auto seg = softmax_nll_loss(pass.logits, target);
            std::vector<double> dml;
            double ml_loss = 0.0;
            if (with_branch) {
                const auto ml = multilabel_bce_loss(*pass.multilabel, sample.labels);
                ml_loss = ml.loss;
                dml.resize(ml.gradient.size());
                for (std::size_t j = 0; j < dml.size(); ++j) dml[j] = lambda * ml.gradient[j];
            }
            backward(pass, params, seg.gradient, with_branch ? &dml : nullptr, config.detach_branch, out.grads);
            out.report = combine(seg.loss, ml_loss, lambda, seg.valid_pixels);
            out.used = true;
        });

        for (auto& [name, t] : total_grads) std::fill(t.values.begin(), t.values.end(), 0.0f);
        std::vector<LossReport> reports;
        for (const auto& o : outcomes) {
            if (!o.used) continue;
            reports.push_back(o.report);
            for (auto& [name, t] : total_grads) {
                const auto& src = o.grads.at(name).values;
                for (std::size_t i = 0; i < t.values.size(); ++i) t.values[i] += src[i];
            }
        }
        const double lr = learning_rate_at(it, total, config);
        sgd_step(params, total_grads, velocity, {lr, config.momentum, config.weight_decay});

        const auto sum = sum_reports(reports);
        const double n = reports.empty() ? 1.0 : static_cast<double>(reports.size());
        result.log.push_back({it, sum.seg_loss / n, sum.multilabel_loss / n, sum.combined / n, lr});

        if (options.checkpoint_dir && config.checkpoint_every > 0 && (it + 1) % config.checkpoint_every == 0)
            save_checkpoint(*options.checkpoint_dir / ("iter_" + std::to_string(it + 1) + ".ckpt"), params);
    }
    return result;
}

TrainResult train_stage(const DatasetManifest& manifest, const ClassTaxonomy& taxonomy, const PipelineConfig& config,
                        TrainStage stage, std::uint64_t rng_seed, const TrainOptions& options) {
    if (manifest.entries.empty()) throw std::invalid_argument("train_stage: manifest is empty");
    const auto samples = load_training_samples(manifest, taxonomy, stage);
    return train_samples(samples, taxonomy.size(), config, stage, rng_seed, options);
}

void write_training_log(const std::filesystem::path& path, const std::vector<TrainLogRow>& log) {
    std::ostringstream os;
    os.precision(17);
    os << "iteration,seg_loss,multilabel_loss,combined,lr\n";
    for (const auto& r : log)
        os << r.iteration << ',' << r.seg_loss << ',' << r.multilabel_loss << ',' << r.combined << ',' << r.lr << '\n';
    write_text_file(path, os.str());
}

double evaluate_seg_loss(const std::vector<TrainingSample>& samples, const NetworkParams& params) {
    double total = 0.0;
    std::size_t counted = 0;
    for (const auto& s : samples) {
        const auto logits = forward_segmentation(s.image, params);
        const auto target = downsample_mask(s.mask, logits.height, logits.width);
        if (std::all_of(target.labels.data.begin(), target.labels.data.end(),
                        [](std::uint8_t v) { return v == kIgnoreLabel; }))
            continue;
        total += softmax_nll_loss(logits, target).loss;
        ++counted;
    }
    if (counted == 0) throw std::invalid_argument("evaluate_seg_loss: no labelled samples");
    return total / static_cast<double>(counted);
}

}  // namespace wss
