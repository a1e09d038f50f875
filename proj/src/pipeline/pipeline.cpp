#include "wss/pipeline/pipeline.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "wss/core/image_io.hpp"
#include "wss/core/parallel.hpp"
#include "wss/core/random.hpp"
#include "wss/infer/inference.hpp"
#include "wss/ingest/ingest.hpp"
#include "wss/masks/mask_source.hpp"
#include "wss/model/checkpoint.hpp"
#include "wss/train/trainer.hpp"

namespace wss {

namespace fs = std::filesystem;

const StageRecord* PipelineRunManifest::find(const std::string& stage) const {
    for (const auto& s : stages)
        if (s.stage == stage) return &s;
    return nullptr;
}

std::string format_run_manifest(const PipelineRunManifest& m) {
    std::ostringstream os;
    os << "run_id\t" << m.run_id << '\n';
    os << "config\t" << m.config_snapshot.string() << '\n';
    os << "seed\t" << m.seed << '\n';
    for (const auto& s : m.stages) os << "stage\t" << s.stage << '\t' << s.path.string() << '\t' << s.hash << '\n';
    return os.str();
}

PipelineRunManifest parse_run_manifest(const std::string& text) {
    PipelineRunManifest m;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::istringstream ls(line);
        for (std::string part; std::getline(ls, part, '\t');) f.push_back(part);
        auto bad = [&] { return std::invalid_argument("run manifest line " + std::to_string(line_no) + " is malformed"); };
        if (f[0] == "run_id" && f.size() == 2) m.run_id = f[1];
        else if (f[0] == "config" && f.size() == 2) m.config_snapshot = f[1];
        else if (f[0] == "seed" && f.size() == 2) m.seed = std::stoull(f[1]);
        else if (f[0] == "stage" && f.size() == 4) m.stages.push_back({f[1], f[2], f[3]});
        else throw bad();
    }
    return m;
}

ClassTaxonomy taxonomy_from_config(const PipelineConfig& config) {
    return config.classes.empty() ? ClassTaxonomy::pascal_voc() : ClassTaxonomy(config.classes);
}

PipelineConfig resolve_config_paths(PipelineConfig config, const fs::path& base) {
    for (auto* p : {&config.retrieved_dir, &config.target_manifest, &config.eval_manifest})
        if (!p->empty() && fs::path(*p).is_relative()) *p = fs::absolute(base / *p).lexically_normal().string();
    return config;
}

fs::path cache_root(const fs::path& out, const std::string& run_id) {
    if (const char* env = std::getenv("WSS_CACHE_DIR"); env && *env) return fs::path(env) / run_id;
    return out / "cache";
}

std::string stage_output_hash(const fs::path& path, const ClassTaxonomy& taxonomy) {
    if (path.extension() != ".txt") return file_digest(path);
    const auto text = read_text_file(path);
    std::string acc = text;
    for (const auto& e : parse_manifest(text, taxonomy, path.parent_path()).entries) {
        acc += file_digest(e.image);
        if (e.mask) acc += file_digest(*e.mask);
    }
    return text_digest(acc);
}

ConfusionMatrix evaluate_model(const DatasetManifest& gt, const ClassTaxonomy& taxonomy, const NetworkParams& params,
                               const std::vector<double>& scales, const std::optional<CrfSettings>& crf, int workers,
                               const std::optional<fs::path>& pred_dir) {
    if (pred_dir) fs::create_directories(*pred_dir);
    std::vector<ConfusionMatrix> per_image(gt.entries.size(), ConfusionMatrix(taxonomy.size()));
    parallel_for(gt.entries.size(), workers, [&](std::size_t i) {
        const auto& e = gt.entries[i];
        if (!e.mask) throw std::invalid_argument("evaluation entry without ground-truth mask: " + e.image.string());
        const auto record = load_record(e.image, ImageSource::target);
        const auto pred = predict_mask(record, params, std::nullopt, scales, crf);
        if (pred_dir) write_mask(*pred_dir / (e.image.stem().string() + ".png"), pred);
        accumulate(per_image[i], read_mask(*e.mask), pred);
    });
    ConfusionMatrix total(taxonomy.size());
    for (const auto& cm : per_image) total += cm;
    return total;
}

namespace {

struct StagePaths {
    fs::path cache;
    fs::path corpus_dir, corpus_manifest;
    fs::path coseg_dir, coseg_manifest, coseg_fractions;
    fs::path stage1_ckpt, stage1_log;
    fs::path target_dir, genmask_dir, genmask_manifest;
    fs::path stage2_ckpt, stage2_log;
    fs::path eval_dir, pred_dir, report;

    StagePaths(const fs::path& out, const fs::path& root)
        : cache(root),
          corpus_dir(root / "corpus"),
          corpus_manifest(root / "corpus.txt"),
          coseg_dir(root / "coseg"),
          coseg_manifest(root / "coseg.txt"),
          coseg_fractions(root / "coseg_fractions.csv"),
          stage1_ckpt(root / "stage1.ckpt"),
          stage1_log(root / "stage1_log.csv"),
          target_dir(root / "target"),
          genmask_dir(root / "genmasks"),
          genmask_manifest(root / "genmasks.txt"),
          stage2_ckpt(root / "stage2.ckpt"),
          stage2_log(root / "stage2_log.csv"),
          eval_dir(root / "eval"),
          pred_dir(out / "predictions"),
          report(out / "report.csv") {}
};

void write_atomic(const fs::path& path, const std::string& text) {
    const auto tmp = fs::path(path.string() + ".tmp");
    write_text_file(tmp, text);
    fs::rename(tmp, path);
}

fs::path run_ingest(const PipelineConfig& config, const ClassTaxonomy& taxonomy, const StagePaths& p,
                    const std::function<void(const std::string&)>& log) {
    if (config.retrieved_dir.empty()) throw std::invalid_argument("config has no retrieved_dir");
    const auto groups = load_class_groups(config.retrieved_dir, taxonomy, config.max_per_class);
    fs::remove_all(p.corpus_dir);
    auto corpus = build_retrieved_corpus(groups, config, taxonomy, p.corpus_dir);
    for (const auto& w : corpus.warnings) log("warning: " + w);
    if (corpus.manifest.entries.empty()) throw std::runtime_error("retrieved corpus is empty");
    write_manifest(p.corpus_manifest, corpus.manifest, taxonomy);
    log("corpus: " + std::to_string(corpus.manifest.entries.size()) + " images");
    return p.corpus_manifest;
}

fs::path run_coseg(const PipelineConfig& config, const ClassTaxonomy& taxonomy, const StagePaths& p,
                   const std::function<void(const std::string&)>& log) {
    const auto corpus = load_manifest(p.corpus_manifest, taxonomy);
    const auto source = make_mask_source(config.mask_source, config.retrieved_dir, taxonomy, config.workers);
    fs::remove_all(p.coseg_dir);
    const auto result = cosegment_corpus(corpus, *source, config.fg_min, config.fg_max, taxonomy, p.coseg_dir);
    if (result.kept.entries.empty()) throw std::runtime_error("foreground filter kept no images");
    write_text_file(p.coseg_fractions, result.fractions_csv);
    write_manifest(p.coseg_manifest, result.kept, taxonomy);
    log("coseg: kept " + std::to_string(result.kept.entries.size()) + " of " + std::to_string(result.total));
    return p.coseg_manifest;
}

fs::path run_train(const PipelineConfig& config, const ClassTaxonomy& taxonomy, const fs::path& manifest,
                   TrainStage stage, const fs::path& ckpt, const fs::path& log_path, std::string_view tag) {
    const auto data = load_manifest(manifest, taxonomy);
    TrainOptions opts;
    if (config.checkpoint_every > 0) opts.checkpoint_dir = ckpt.parent_path() / (ckpt.stem().string() + "_snapshots");
    if (opts.checkpoint_dir) fs::create_directories(*opts.checkpoint_dir);
    const auto result = train_stage(data, taxonomy, config, stage, derive_seed(config.seed, tag), opts);
    write_training_log(log_path, result.log);
    save_checkpoint(ckpt, result.params);
    return ckpt;
}

fs::path run_genmasks(const PipelineConfig& config, const ClassTaxonomy& taxonomy, const StagePaths& p,
                      const std::function<void(const std::string&)>& log) {
    if (config.target_manifest.empty()) throw std::invalid_argument("config has no target_manifest");
    const auto target = load_manifest(config.target_manifest, taxonomy);
    fs::remove_all(p.target_dir);
    fs::remove_all(p.genmask_dir);
    auto prepared = prepare_target_images(target, config, p.target_dir);
    for (auto& e : prepared.entries) e.mask.reset();
    const auto params = load_checkpoint(p.stage1_ckpt);
    const auto generated = generate_target_masks(prepared, taxonomy, params, config, p.genmask_dir);
    write_manifest(p.genmask_manifest, generated, taxonomy);
    log("genmasks: " + std::to_string(generated.entries.size()) + " masks");
    return p.genmask_manifest;
}

fs::path run_evaluate(const PipelineConfig& config, const ClassTaxonomy& taxonomy, const StagePaths& p,
                      const std::function<void(const std::string&)>& log) {
    if (config.eval_manifest.empty()) throw std::invalid_argument("config has no eval_manifest");
    const auto gt = load_manifest(config.eval_manifest, taxonomy, Split::val);
    fs::remove_all(p.eval_dir);
    fs::remove_all(p.pred_dir);
    const auto prepared = prepare_target_images(gt, config, p.eval_dir);
    const auto params = load_checkpoint(p.stage2_ckpt);
    const std::optional<CrfSettings> crf = config.crf_on_final ? std::optional(config.crf) : std::nullopt;
    const auto cm = evaluate_model(prepared, taxonomy, params, config.inference_scales, crf, config.workers, p.pred_dir);
    write_atomic(p.report, format_iou_report(cm, taxonomy));
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", mean_iou(cm));
    log(std::string("evaluate: mean IoU ") + buf);
    return p.report;
}

}  // namespace

PipelineRunManifest run_pipeline(const PipelineConfig& config, const fs::path& out, const PipelineOptions& options) {
    config.validate();
    const auto log = options.log ? options.log : [](const std::string&) {};
    const auto taxonomy = taxonomy_from_config(config);
    fs::create_directories(out);
    const auto snapshot_text = format_config(config);
    const auto snapshot_path = fs::absolute(out / "config.snapshot").lexically_normal();
    const auto manifest_path = out / "run_manifest.txt";

    PipelineRunManifest run{text_digest(snapshot_text), snapshot_path, config.seed, {}};
    PipelineRunManifest previous;
    if (options.resume && fs::is_regular_file(manifest_path) && fs::is_regular_file(snapshot_path) &&
        read_text_file(snapshot_path) == snapshot_text) {
        previous = parse_run_manifest(read_text_file(manifest_path));
        if (previous.run_id != run.run_id) previous = {};
    }
    write_text_file(snapshot_path, snapshot_text);

    const StagePaths paths(fs::absolute(out).lexically_normal(), fs::absolute(cache_root(out, run.run_id)).lexically_normal());
    fs::create_directories(paths.cache);

    using StageFn = std::function<fs::path()>;
    const std::vector<std::pair<std::string, StageFn>> stages{
        {"ingest", [&] { return run_ingest(config, taxonomy, paths, log); }},
        {"coseg", [&] { return run_coseg(config, taxonomy, paths, log); }},
        {"train-initial",
         [&] {
             return run_train(config, taxonomy, paths.coseg_manifest, TrainStage::initial, paths.stage1_ckpt,
                              paths.stage1_log, "train-initial");
         }},
        {"genmasks", [&] { return run_genmasks(config, taxonomy, paths, log); }},
        {"train-final",
         [&] {
             return run_train(config, taxonomy, paths.genmask_manifest, TrainStage::final, paths.stage2_ckpt,
                              paths.stage2_log, "train-final");
         }},
        {"evaluate", [&] { return run_evaluate(config, taxonomy, paths, log); }},
    };

    bool chain_valid = true;
    for (const auto& [name, fn] : stages) {
        if (chain_valid) {
            const auto* rec = previous.find(name);
            if (rec && fs::exists(rec->path)) {
                std::string hash;
                try {
                    hash = stage_output_hash(rec->path, taxonomy);
                } catch (const std::exception&) {
                }
                if (hash == rec->hash) {
                    run.stages.push_back(*rec);
                    log("skip " + name + " (up to date)");
                    continue;
                }
            }
            chain_valid = false;
        }
        log("run " + name);
        StageRecord rec{name, {}, {}};
        try {
            rec.path = fn();
            rec.hash = stage_output_hash(rec.path, taxonomy);
        } catch (const std::exception& e) {
            throw StageError(name, e.what());
        }
        run.stages.push_back(rec);
        write_atomic(manifest_path, format_run_manifest(run));
    }
    write_atomic(manifest_path, format_run_manifest(run));
    return run;
}

std::vector<AblationRow> ablation_run(const PipelineConfig& config, const fs::path& out, const PipelineOptions& options) {
    const auto log = options.log ? options.log : [](const std::string&) {};
    const auto taxonomy = taxonomy_from_config(config);
    const auto run = run_pipeline(config, out / "pipeline", options);
    const auto stage_path = [&](const std::string& s) { return run.find(s)->path; };

    const auto simple_ckpt = out / "simple_final.ckpt";
    log("ablation: training single-branch final model");
    TrainOptions simple;
    simple.use_branch = false;
    const auto generated = load_manifest(stage_path("genmasks"), taxonomy);
    const auto simple_model = train_stage(generated, taxonomy, config, TrainStage::final,
                                          derive_seed(config.seed, "train-final"), simple);
    save_checkpoint(simple_ckpt, simple_model.params);

    const auto gt = load_manifest(config.eval_manifest, taxonomy, Split::val);
    fs::remove_all(out / "eval");
    const auto prepared = prepare_target_images(gt, config, out / "eval");
    const std::vector<double> single{1.0};
    const auto initial = load_checkpoint(stage_path("train-initial"));
    const auto final_model = load_checkpoint(stage_path("train-final"));

    std::vector<AblationRow> rows;
    auto add = [&](std::string name, const NetworkParams& params, const std::vector<double>& scales,
                   const std::optional<CrfSettings>& crf) {
        log("ablation: evaluating " + name);
        const auto cm = evaluate_model(prepared, taxonomy, params, scales, crf, config.workers);
        rows.push_back({std::move(name), mean_iou(cm), per_class_iou(cm)});
    };
    add("initial mask generator", initial, single, std::nullopt);
    add("simple final model", simple_model.params, single, std::nullopt);
    add("final model with multi-label module", final_model, single, std::nullopt);
    add("final model + MS infer + CRF", final_model, config.inference_scales, config.crf);
    return rows;
}

std::string format_ablation_table(const std::vector<AblationRow>& rows, const ClassTaxonomy& taxonomy) {
    std::ostringstream os;
    os << "setting,mean_iou";
    for (const auto& n : taxonomy.names()) os << ',' << n;
    os << '\n';
    char buf[32];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.6f", r.mean_iou);
        os << r.setting << ',' << buf;
        for (const auto& v : r.per_class) {
            os << ',';
            if (v) {
                std::snprintf(buf, sizeof buf, "%.6f", *v);
                os << buf;
            }
        }
        os << '\n';
    }
    return os.str();
}

}  // namespace wss
